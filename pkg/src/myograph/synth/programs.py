"""Hand-authored joint-angle programs, one per exercise.

Each program is a base period of phase-keyed knots per joint (cosine-eased
between knots, wrapping at phase 1.0) plus a support-leg schedule. The
`notes` string documents the actuated joints and the intended muscle
signature; `segment_tags` derives the per-segment direction labels.

Conventions match figure.py: hip/shoulder angles positive forward, knee/
elbow angles are bend amounts, lean positive forward, root_x/root_y in
normalized image units (y down, so positive root_y lowers the body).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import Exercise


@dataclass(frozen=True)
class Track:
    """Phase-keyed knots; values are cosine-eased and wrap at phase 1."""

    knots: tuple[tuple[float, float], ...]

    def __post_init__(self):
        phases = [p for p, _ in self.knots]
        if any(not (0.0 <= p < 1.0) for p in phases):
            raise ValueError(f"knot phases must lie in [0, 1): {phases}")
        if phases != sorted(phases) or len(set(phases)) != len(phases):
            raise ValueError(f"knot phases must be strictly increasing: {phases}")

    def at(self, phase: np.ndarray) -> np.ndarray:
        phase = np.asarray(phase, dtype=np.float64) % 1.0
        if len(self.knots) == 1:
            return np.full_like(phase, self.knots[0][1])
        ps = np.array([p for p, _ in self.knots])
        vs = np.array([v for _, v in self.knots])
        # wrap: segment from the last knot back to the first
        ps_ext = np.concatenate([ps, [ps[0] + 1.0]])
        vs_ext = np.concatenate([vs, [vs[0]]])
        shifted = (phase - ps[0]) % 1.0 + ps[0]
        idx = np.searchsorted(ps_ext, shifted, side="right") - 1
        p0, p1 = ps_ext[idx], ps_ext[idx + 1]
        v0, v1 = vs_ext[idx], vs_ext[idx + 1]
        u = np.where(p1 > p0, (shifted - p0) / np.where(p1 > p0, p1 - p0, 1.0), 0.0)
        ease = 0.5 * (1.0 - np.cos(np.pi * u))
        return v0 + (v1 - v0) * ease

    def segments(self):
        """(phase0, phase1, tag) per inter-knot segment, incl. the wrap segment."""
        out = []
        ext = list(self.knots) + [(self.knots[0][0] + 1.0, self.knots[0][1])]
        for (p0, v0), (p1, v1) in zip(ext[:-1], ext[1:]):
            if v1 > v0 + 1e-9:
                tag = "concentric"
            elif v1 < v0 - 1e-9:
                tag = "eccentric"
            else:
                tag = "hold"
            out.append((p0, p1, tag))
        return out


def const(v: float) -> Track:
    return Track(((0.0, v),))


@dataclass(frozen=True)
class ExerciseProgram:
    exercise: Exercise
    period_s: float
    tracks: dict[str, Track]
    # (phase0, phase1, sides) with sides a subset of "lr"; phases may wrap
    support: tuple[tuple[float, float, str], ...]
    notes: str = ""

    def angles(self, phase: np.ndarray) -> dict[str, np.ndarray]:
        return {name: tr.at(phase) for name, tr in self.tracks.items()}

    def support_at(self, phase: np.ndarray) -> np.ndarray:
        phase = np.asarray(phase, dtype=np.float64) % 1.0
        out = np.zeros((phase.shape[0], 2), dtype=bool)
        for p0, p1, sides in self.support:
            if p1 > p0:
                mask = (phase >= p0) & (phase < p1)
            else:  # wrapping interval
                mask = (phase >= p0) | (phase < p1)
            if "l" in sides:
                out[mask, 0] = True
            if "r" in sides:
                out[mask, 1] = True
        return out

    @property
    def segment_tags(self) -> dict[str, list]:
        return {name: tr.segments() for name, tr in self.tracks.items()}


def _p(exercise, period_s, tracks, support, notes):
    return ExerciseProgram(exercise, period_s, tracks, tuple(support), notes)


EXERCISE_PROGRAMS: dict[Exercise, ExerciseProgram] = {}


def _register(program: ExerciseProgram):
    EXERCISE_PROGRAMS[program.exercise] = program


_register(
    _p(
        Exercise.JumpingJack,
        1.6,
        {
            "shoulder_l": Track(((0.0, 0.15), (0.5, 2.9))),
            "shoulder_r": Track(((0.0, 0.15), (0.5, 2.9))),
            "elbow_l": Track(((0.0, 0.15), (0.5, 0.55))),
            "elbow_r": Track(((0.0, 0.15), (0.5, 0.55))),
            "hip_l": Track(((0.0, 0.0), (0.5, -0.32))),
            "hip_r": Track(((0.0, 0.0), (0.5, 0.32))),
            "knee_l": Track(((0.0, 0.5), (0.2, 0.1), (0.5, 0.5), (0.7, 0.1))),
            "knee_r": Track(((0.0, 0.5), (0.2, 0.1), (0.5, 0.5), (0.7, 0.1))),
            "root_y": Track(((0.0, 0.012), (0.25, -0.028), (0.5, 0.012), (0.75, -0.028))),
        },
        [(0.85, 0.15, "lr"), (0.35, 0.65, "lr")],
        "arms swing overhead with an elbow pump, legs split, two hops per "
        "cycle; quads load on each landing, biceps/triceps pump with the swing",
    )
)

_register(
    _p(
        Exercise.HighKick,
        2.0,
        {
            "hip_r": Track(((0.0, 0.0), (0.15, 0.05), (0.35, 1.75), (0.55, 0.05), (0.75, 0.0))),
            "knee_r": Track(((0.0, 0.1), (0.15, 0.45), (0.35, 0.1), (0.5, 0.45), (0.65, 0.1))),
            "knee_l": const(0.1),
            "shoulder_l": Track(((0.0, 0.2), (0.35, 0.7), (0.7, 0.2))),
            "shoulder_r": Track(((0.0, 0.45), (0.35, 0.1), (0.7, 0.45))),
            "elbow_l": const(0.3),
            "elbow_r": const(0.3),
        },
        [(0.0, 0.6, "l"), (0.6, 1.0, "lr")],
        "right leg swings high to the front with a chamber; right quad fires "
        "on the snap, right hamstring on the shank curls of the lifted leg",
    )
)

_register(
    _p(
        Exercise.LegBack,
        2.0,
        {
            "hip_r": Track(((0.0, 0.05), (0.2, 0.0), (0.45, -1.15), (0.7, 0.0))),
            "knee_r": Track(((0.0, 0.1), (0.2, 0.15), (0.45, 0.75), (0.7, 0.15))),
            "knee_l": const(0.1),
            "shoulder_l": const(0.35),
            "shoulder_r": const(0.35),
            "elbow_l": const(0.25),
            "elbow_r": const(0.25),
            "lean": Track(((0.0, 0.0), (0.2, 0.0), (0.45, 0.25), (0.7, 0.0))),
        },
        [(0.0, 0.75, "l"), (0.75, 1.0, "lr")],
        "right leg sweeps backward past vertical with a shank curl; the "
        "back-swing is the hamstring's active direction (unlike a front kick)",
    )
)

_register(
    _p(
        Exercise.FrontKick,
        2.0,
        {
            "hip_r": Track(((0.0, 0.0), (0.15, 0.0), (0.4, 1.5), (0.7, 0.0))),
            "knee_r": Track(((0.0, 0.1), (0.15, 0.16), (0.4, 0.04), (0.6, 0.1))),
            "knee_l": const(0.1),
            "shoulder_l": const(0.5),
            "shoulder_r": const(0.5),
            "elbow_l": const(1.3),
            "elbow_r": const(1.3),
        },
        [(0.0, 0.7, "l"), (0.7, 1.0, "lr")],
        "right leg snaps forward-up, knee extending at the top (quad); the "
        "drop back down is gravity's work, so the hamstring stays quiet",
    )
)

_register(
    _p(
        Exercise.FrontPunch,
        1.6,
        {
            "elbow_r": Track(((0.0, 1.6), (0.2, 0.15), (0.45, 1.6))),
            "elbow_l": Track(((0.0, 1.6), (0.5, 1.6), (0.7, 0.15), (0.95, 1.6))),
            "shoulder_r": Track(((0.0, 0.35), (0.2, 0.95), (0.45, 0.35))),
            "shoulder_l": Track(((0.0, 0.35), (0.5, 0.35), (0.7, 0.95), (0.95, 0.35))),
            "knee_l": const(0.18),
            "knee_r": const(0.18),
            "lean": const(0.05),
        },
        [(0.0, 1.0, "lr")],
        "alternating straight punches: triceps fire on each extension, "
        "biceps on each recoil; quiet loaded stance underneath",
    )
)

_register(
    _p(
        Exercise.HookPunch,
        2.0,
        {
            "elbow_r": Track(((0.0, 1.9), (0.12, 1.9), (0.3, 0.7), (0.42, 0.7), (0.6, 1.9))),
            "shoulder_r": Track(((0.0, 0.6), (0.12, 0.6), (0.3, 1.5), (0.42, 1.5), (0.6, 0.6))),
            "elbow_l": const(1.6),
            "shoulder_l": const(0.45),
            "knee_l": const(0.15),
            "knee_r": const(0.15),
            "lean": Track(((0.0, 0.0), (0.3, 0.12), (0.6, 0.0))),
        },
        [(0.0, 1.0, "lr")],
        "right hook: the elbow extends through the swing and pauses in front "
        "of the chest, so the tricep fires (unlike the elbow punch)",
    )
)

_register(
    _p(
        Exercise.Pirouette,
        2.5,
        {
            "shoulder_l": Track(((0.0, 2.5), (0.5, 2.7))),
            "shoulder_r": Track(((0.0, 2.7), (0.5, 2.5))),
            "elbow_l": const(0.9),
            "elbow_r": const(0.9),
            "knee_l": const(0.9),
            "hip_l": const(0.35),
            "knee_r": const(0.08),
            "root_x": Track(((0.0, -0.04), (0.5, 0.04))),
        },
        [(0.0, 1.0, "r")],
        "arms held overhead, left leg in a raised hold, slow spin wobble on "
        "the right support leg; deliberately the quietest program",
    )
)

_register(
    _p(
        Exercise.Skater,
        1.8,
        {
            "root_x": Track(((0.0, -0.085), (0.5, 0.085))),
            # the deep bend lives entirely inside the leg's unloaded half
            "knee_l": Track(((0.0, 0.28), (0.5, 0.28), (0.62, 1.1), (0.78, 1.1), (0.93, 0.28))),
            "knee_r": Track(((0.0, 0.28), (0.12, 1.1), (0.28, 1.1), (0.43, 0.28), (0.5, 0.28))),
            "hip_l": Track(((0.0, 0.02), (0.45, 0.02), (0.6, -0.42), (0.85, -0.42), (0.97, 0.02))),
            "hip_r": Track(((0.0, -0.42), (0.35, -0.42), (0.47, 0.02), (0.95, 0.02))),
            "shoulder_l": Track(((0.0, 0.7), (0.5, 0.2))),
            "shoulder_r": Track(((0.0, 0.2), (0.5, 0.7))),
            "elbow_l": const(0.35),
            "elbow_r": const(0.35),
        },
        [(0.0, 0.5, "l"), (0.5, 1.0, "r")],
        "lateral hops: the trailing leg is bent deep but UNLOADED; only the "
        "shallow-bent support leg ever loads its quad (side-lunge contrast)",
    )
)

_register(
    _p(
        Exercise.Twist,
        1.7,
        {
            "shoulder_l": Track(((0.0, 0.55), (0.5, 0.15))),
            "shoulder_r": Track(((0.0, 0.15), (0.5, 0.55))),
            "elbow_l": const(1.25),
            "elbow_r": const(1.25),
            "knee_l": const(0.14),
            "knee_r": const(0.14),
            "root_x": Track(((0.0, -0.015), (0.5, 0.015))),
        },
        [(0.0, 1.0, "lr")],
        "torso rotation proxy: shoulders counter-swing with bent arms held; "
        "light constant leg load",
    )
)

_register(
    _p(
        Exercise.Squats,
        3.0,
        {
            "knee_l": Track(((0.0, 0.12), (0.3, 1.25), (0.55, 1.25), (0.85, 0.12))),
            "knee_r": Track(((0.0, 0.12), (0.3, 1.25), (0.55, 1.25), (0.85, 0.12))),
            "hip_l": Track(((0.0, 0.05), (0.3, 0.75), (0.55, 0.75), (0.85, 0.05))),
            "hip_r": Track(((0.0, 0.05), (0.3, 0.75), (0.55, 0.75), (0.85, 0.05))),
            "root_y": Track(((0.0, 0.0), (0.3, 0.055), (0.55, 0.055), (0.85, 0.0))),
            "lean": Track(((0.0, 0.02), (0.3, 0.3), (0.55, 0.3), (0.85, 0.02))),
            "shoulder_l": Track(((0.0, 0.1), (0.3, 0.85), (0.55, 0.85), (0.85, 0.1))),
            "shoulder_r": Track(((0.0, 0.1), (0.3, 0.85), (0.55, 0.85), (0.85, 0.1))),
            "elbow_l": const(0.12),
            "elbow_r": const(0.12),
        },
        [(0.0, 1.0, "lr")],
        "deep two-leg squat with a bottom hold: quad load through the bend, "
        "an onset spike at the hold, concentric quads on the rise",
    )
)

_register(
    _p(
        Exercise.FeetCross,
        1.6,
        {
            "hip_l": Track(((0.0, 0.22), (0.5, -0.22))),
            "hip_r": Track(((0.0, -0.22), (0.5, 0.22))),
            "knee_l": Track(((0.0, 0.2), (0.25, 0.1), (0.5, 0.2), (0.75, 0.1))),
            "knee_r": Track(((0.0, 0.1), (0.25, 0.2), (0.5, 0.1), (0.75, 0.2))),
            "root_x": Track(((0.0, -0.05), (0.5, 0.05))),
            "shoulder_l": const(0.1),
            "shoulder_r": const(0.1),
            "elbow_l": const(0.2),
            "elbow_r": const(0.2),
        },
        [(0.0, 0.5, "l"), (0.5, 1.0, "r")],
        "crossing steps: small alternating hip swings and knee pumps, "
        "relaxed arms; light lateral leg work",
    )
)

_register(
    _p(
        Exercise.ElbowPunch,
        1.6,
        {
            "elbow_r": const(1.5),
            "shoulder_r": Track(((0.0, 0.25), (0.2, 1.35), (0.42, 1.35), (0.6, 0.25))),
            "elbow_l": const(1.5),
            "shoulder_l": const(0.3),
            "knee_l": const(0.02),
            "knee_r": const(0.02),
        },
        [(0.0, 1.0, "lr")],
        "the elbow stays fully flexed while the shoulder sweeps and pauses "
        "parallel to the shoulders: no tricep, and a straight-legged stance "
        "keeps the quads silent",
    )
)

_register(
    _p(
        Exercise.SideShuffle,
        1.4,
        {
            "root_x": Track(((0.0, -0.09), (0.5, 0.09))),
            "hip_l": Track(((0.0, 0.3), (0.5, -0.3))),
            "hip_r": Track(((0.0, -0.3), (0.5, 0.3))),
            "knee_l": Track(((0.0, 0.45), (0.3, 0.15), (0.5, 0.45), (0.8, 0.15))),
            "knee_r": Track(((0.0, 0.15), (0.3, 0.45), (0.5, 0.15), (0.8, 0.45))),
            "shoulder_l": const(0.3),
            "shoulder_r": const(0.3),
            "elbow_l": Track(((0.0, 0.45), (0.5, 0.2))),
            "elbow_r": Track(((0.0, 0.2), (0.5, 0.45))),
        },
        [(0.0, 0.5, "r"), (0.5, 1.0, "l")],
        "lateral shuffle: alternating support with knee pumps and hip "
        "swings; muscularly a lateral cousin of running",
    )
)

_register(
    _p(
        Exercise.Batting,
        2.6,
        {
            "knee_l": const(0.38),
            "knee_r": const(0.38),
            "elbow_r": Track(((0.0, 1.55), (0.25, 1.55), (0.45, 0.35), (0.6, 0.35), (0.85, 1.55))),
            "shoulder_r": Track(((0.0, 0.9), (0.25, 0.9), (0.45, 1.35), (0.6, 1.35), (0.85, 0.9))),
            "elbow_l": Track(((0.0, 1.1), (0.25, 1.1), (0.45, 0.3), (0.6, 0.3), (0.85, 1.1))),
            "shoulder_l": Track(((0.0, 0.75), (0.25, 0.75), (0.45, 1.1), (0.6, 1.1), (0.85, 0.75))),
            "lean": Track(((0.0, 0.05), (0.25, 0.05), (0.45, 0.18), (0.6, 0.18), (0.85, 0.05))),
            "root_x": Track(((0.0, -0.02), (0.45, 0.04), (0.85, -0.02))),
        },
        [(0.0, 1.0, "lr")],
        "batting: a loaded crouched stance held between swings (quad holds), "
        "two-arm swing extends the elbows (triceps) and re-cocks (biceps)",
    )
)

_register(
    _p(
        Exercise.SideLunge,
        3.0,
        {
            "knee_l": Track(((0.0, 0.1), (0.25, 1.25), (0.55, 1.25), (0.8, 0.1))),
            "hip_l": Track(((0.0, 0.05), (0.25, 0.5), (0.55, 0.5), (0.8, 0.05))),
            "hip_r": Track(((0.0, -0.05), (0.25, -0.55), (0.55, -0.55), (0.8, -0.05))),
            "knee_r": const(0.05),
            "root_x": Track(((0.0, 0.0), (0.25, -0.07), (0.55, -0.07), (0.8, 0.0))),
            "root_y": Track(((0.0, 0.0), (0.25, 0.05), (0.55, 0.05), (0.8, 0.0))),
            "shoulder_l": const(0.55),
            "shoulder_r": const(0.55),
            "elbow_l": const(0.4),
            "elbow_r": const(0.4),
        },
        [(0.15, 0.85, "l"), (0.85, 0.15, "lr")],
        "deep lunge onto the bent LEFT leg with a long hold: the left quad "
        "is loaded the whole way down (the skater's bent leg never is)",
    )
)

_register(
    _p(
        Exercise.Running,
        1.0,
        {
            "hip_l": Track(((0.0, 0.5), (0.5, -0.35))),
            "hip_r": Track(((0.0, -0.35), (0.5, 0.5))),
            "knee_l": Track(((0.0, 0.25), (0.25, 0.85), (0.5, 0.3), (0.75, 0.12))),
            "knee_r": Track(((0.0, 0.3), (0.25, 0.12), (0.5, 0.25), (0.75, 0.85))),
            "root_y": Track(((0.0, -0.012), (0.25, 0.012), (0.5, -0.012), (0.75, 0.012))),
            "shoulder_l": Track(((0.0, -0.3), (0.5, 0.45))),
            "shoulder_r": Track(((0.0, 0.45), (0.5, -0.3))),
            "elbow_l": const(1.2),
            "elbow_r": const(1.2),
        },
        [(0.05, 0.45, "r"), (0.55, 0.95, "l")],
        "jog in place: free-leg shank curls pump the hamstrings, support "
        "knees load the quads, bent arms swing from the shoulder",
    )
)

_register(
    _p(
        Exercise.BallThrow,
        2.4,
        {
            "elbow_r": Track(((0.0, 1.7), (0.2, 1.7), (0.38, 0.15), (0.55, 0.6), (0.8, 1.7))),
            "shoulder_r": Track(((0.0, 1.2), (0.2, 1.9), (0.38, 0.9), (0.6, 0.5), (0.8, 1.2))),
            "elbow_l": const(0.8),
            "shoulder_l": const(0.4),
            "lean": Track(((0.0, -0.08), (0.2, -0.12), (0.38, 0.22), (0.6, 0.05), (0.8, -0.08))),
            "knee_l": Track(((0.0, 0.15), (0.2, 0.3), (0.38, 0.12), (0.6, 0.15))),
            "knee_r": Track(((0.0, 0.15), (0.2, 0.3), (0.38, 0.12), (0.6, 0.15))),
        },
        [(0.0, 1.0, "lr")],
        "overhand throw: wind-up hold, explosive elbow extension (tricep "
        "burst), then a re-cock; slight leg dip at release",
    )
)

_register(
    _p(
        Exercise.Bowling,
        2.4,
        {
            "shoulder_r": Track(((0.0, 0.3), (0.25, -0.75), (0.55, 0.95), (0.8, 0.3))),
            "elbow_r": const(0.25),
            "shoulder_l": const(0.25),
            "elbow_l": const(0.45),
            "hip_l": Track(((0.0, 0.0), (0.25, 0.12), (0.55, -0.85), (0.8, 0.0))),
            "knee_l": Track(((0.0, 0.15), (0.55, 0.3), (0.8, 0.15))),
            "knee_r": Track(((0.0, 0.12), (0.55, 0.4), (0.8, 0.12))),
            "lean": Track(((0.0, 0.1), (0.55, 0.42), (0.8, 0.1))),
            "root_x": Track(((0.0, -0.03), (0.55, 0.05), (0.8, -0.03))),
        },
        [(0.3, 0.85, "r"), (0.85, 0.3, "lr")],
        "bowling delivery: the trailing left leg sweeps back past vertical "
        "(hamstring), straight-arm pendulum swing, support knee takes load",
    )
)

_register(
    _p(
        Exercise.KneeKick,
        1.8,
        {
            "hip_r": Track(((0.0, -0.05), (0.35, 1.25), (0.6, -0.05))),
            "knee_r": Track(((0.0, 0.15), (0.35, 1.35), (0.6, 0.15))),
            "knee_l": const(0.12),
            "shoulder_l": Track(((0.0, 0.9), (0.35, 0.25), (0.6, 0.9))),
            "shoulder_r": Track(((0.0, 0.9), (0.35, 0.25), (0.6, 0.9))),
            "elbow_l": Track(((0.0, 0.9), (0.35, 1.3), (0.6, 0.9))),
            "elbow_r": Track(((0.0, 0.9), (0.35, 1.3), (0.6, 0.9))),
        },
        [(0.0, 0.65, "l"), (0.65, 1.0, "lr")],
        "knee drive: hip and knee of the right leg rise together (free-leg "
        "shank curl works the hamstring; visually close to a front kick), "
        "arms pull down into the knee",
    )
)

_register(
    _p(
        Exercise.Woodchop,
        2.6,
        {
            "shoulder_l": Track(((0.0, 2.5), (0.15, 2.5), (0.42, 0.3), (0.6, 0.3), (0.95, 2.5))),
            "shoulder_r": Track(((0.0, 2.5), (0.15, 2.5), (0.42, 0.3), (0.6, 0.3), (0.95, 2.5))),
            "elbow_l": Track(((0.0, 0.6), (0.15, 0.6), (0.42, 0.12), (0.6, 0.12), (0.95, 0.6))),
            "elbow_r": Track(((0.0, 0.6), (0.15, 0.6), (0.42, 0.12), (0.6, 0.12), (0.95, 0.6))),
            "knee_l": Track(((0.0, 0.1), (0.15, 0.12), (0.42, 0.95), (0.6, 0.95), (0.95, 0.1))),
            "knee_r": Track(((0.0, 0.1), (0.15, 0.12), (0.42, 0.95), (0.6, 0.95), (0.95, 0.1))),
            "root_y": Track(((0.0, 0.0), (0.15, 0.0), (0.42, 0.05), (0.6, 0.05), (0.95, 0.0))),
            "lean": Track(((0.0, -0.05), (0.15, -0.05), (0.42, 0.38), (0.6, 0.38), (0.95, -0.05))),
        },
        [(0.0, 1.0, "lr")],
        "two-arm overhead chop into a squat: quads load at the bottom while "
        "both triceps extend on the chop and biceps re-raise; the quad+arm "
        "combination the elbow punch lacks",
    )
)


def program_for(exercise: Exercise) -> ExerciseProgram:
    return EXERCISE_PROGRAMS[exercise]
