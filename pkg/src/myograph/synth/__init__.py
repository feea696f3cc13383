"""Procedural generator of synchronized keypoint + sEMG clips.

An analytic motion-to-muscle oracle drives the EMG channels; a stick
figure renders the same joint trajectories as 25 2D keypoints. Both are
pure functions of (exercise, subject, duration, seed), so every corpus
is reproducible bit for bit.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

import numpy as np

from ..data import Clip, Dataset, Exercise, FPS, N_MUSCLES
from .figure import StickFigure
from .oracle import OracleConfig, load_oracle_config, muscle_oracle, save_oracle_config
from .programs import EXERCISE_PROGRAMS, ExerciseProgram, Track, program_for

__all__ = [
    "SubjectParams",
    "OracleConfig",
    "StickFigure",
    "ExerciseProgram",
    "Track",
    "EXERCISE_PROGRAMS",
    "program_for",
    "muscle_oracle",
    "load_oracle_config",
    "save_oracle_config",
    "default_oracle_config",
    "generate_clip",
    "generate_corpus",
    "default_subjects",
    "ContractResult",
    "activation_contracts",
]

MIN_DURATION_S = 3.0

GAIN_RANGE = (0.8, 1.2)
SPEED_RANGE = (0.85, 1.15)
OFFSET_RANGE = (0.0, 3.0)

# per-clip variation so repetitions are not bit-identical trajectories
TEMPO_JITTER = 0.08
AMP_JITTER = 0.08


@dataclass(frozen=True)
class SubjectParams:
    """Per-subject EMG gains, execution speed, and sensor offsets."""

    subject_id: str
    gains: np.ndarray  # (8,) in [0.8, 1.2]
    speed: float  # in [0.85, 1.15]
    offsets: np.ndarray  # (8,) raw units in [0, 3]
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "gains", np.asarray(self.gains, dtype=np.float64))
        object.__setattr__(self, "offsets", np.asarray(self.offsets, dtype=np.float64))
        if self.gains.shape != (N_MUSCLES,) or self.offsets.shape != (N_MUSCLES,):
            raise ValueError("SubjectParams: gains and offsets must have 8 entries")
        if np.any(self.gains < GAIN_RANGE[0]) or np.any(self.gains > GAIN_RANGE[1]):
            raise ValueError(f"SubjectParams: gains outside {GAIN_RANGE}")
        if not (SPEED_RANGE[0] <= self.speed <= SPEED_RANGE[1]):
            raise ValueError(f"SubjectParams: speed outside {SPEED_RANGE}")
        if np.any(self.offsets < OFFSET_RANGE[0]) or np.any(self.offsets > OFFSET_RANGE[1]):
            raise ValueError(f"SubjectParams: offsets outside {OFFSET_RANGE}")

    @classmethod
    def from_seed(cls, subject_id: str, seed: int) -> "SubjectParams":
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(0x5B1EC7, seed)))
        return cls(
            subject_id=subject_id,
            gains=rng.uniform(*GAIN_RANGE, size=N_MUSCLES),
            speed=float(rng.uniform(*SPEED_RANGE)),
            offsets=rng.uniform(*OFFSET_RANGE, size=N_MUSCLES),
            seed=seed,
        )

    @classmethod
    def neutral(cls, subject_id: str = "S0") -> "SubjectParams":
        """Unit gains, unit speed, zero offsets."""
        return cls(subject_id, np.ones(N_MUSCLES), 1.0, np.zeros(N_MUSCLES), seed=0)


def default_subjects(n: int, master_seed: int) -> list[SubjectParams]:
    return [SubjectParams.from_seed(f"S{i + 1}", master_seed + i) for i in range(n)]


def default_oracle_config() -> OracleConfig:
    return OracleConfig()


def packaged_oracle_config_path():
    return importlib.resources.files("myograph.synth") / "oracle_defaults.cfg"


def generate_clip(
    exercise: Exercise,
    subject: SubjectParams,
    duration_s: float,
    seed: int,
    config: OracleConfig = OracleConfig(),
    clip_id: str | None = None,
    figure: StickFigure = StickFigure(),
) -> Clip:
    """One synchronized clip at 10 fps.

    The clip seed drives a start phase, a tempo jitter, a mild per-joint
    amplitude jitter, the sensor noise, nothing else; the subject's speed
    factor time-warps the program identically across clip seeds.
    """
    if duration_s < MIN_DURATION_S:
        raise ValueError(f"duration_s must be >= {MIN_DURATION_S}, got {duration_s}")
    program = program_for(exercise)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed,)))
    phase0 = rng.uniform(0.0, 1.0)
    tempo = rng.uniform(1.0 - TEMPO_JITTER, 1.0 + TEMPO_JITTER)
    amp = {
        name: rng.uniform(1.0 - AMP_JITTER, 1.0 + AMP_JITTER) for name in sorted(program.tracks)
    }

    t = int(round(duration_s * FPS))
    times = np.arange(t) / FPS
    phase = phase0 + times * subject.speed * tempo / program.period_s
    angles = {name: track.at(phase) * amp[name] for name, track in program.tracks.items()}
    support = program.support_at(phase)

    keypoints = figure.project(angles)
    activation = muscle_oracle(angles, support, gains=subject.gains, config=config)
    noise = rng.normal(0.0, config.noise_sigma, size=activation.shape)
    emg_raw = np.maximum(0.0, activation + subject.offsets + noise)

    return Clip(
        clip_id=clip_id or f"{subject.subject_id}-{exercise.name}-seed{seed}",
        subject_id=subject.subject_id,
        exercise=exercise,
        keypoints=keypoints,
        emg_raw=emg_raw,
    )


def _clip_seed(master_seed: int, subject_idx: int, exercise_idx: int, rep: int) -> int:
    ss = np.random.SeedSequence(entropy=(master_seed, subject_idx, exercise_idx, rep))
    return int(ss.generate_state(1, np.uint64)[0])


def _roles(n: int) -> list[str]:
    if n == 1:
        return ["train"]
    if n == 2:
        return ["train", "test"]
    cycle = ["train", "val", "test"]
    return [cycle[i % 3] for i in range(n)]


def generate_corpus(
    subjects: list[SubjectParams],
    exercises: list[Exercise],
    clips_per_pair: int | dict[str, int],
    duration_s: float,
    seed: int,
    config: OracleConfig = OracleConfig(),
) -> Dataset:
    """Deterministic corpus of clips for every (subject, exercise) pair.

    `clips_per_pair` may be a single count or a per-subject_id mapping
    (the recorded corpora this mirrors were far larger for one subject).
    Split roles cycle [train, val, test] over each pair's repetitions.
    """
    if not subjects or not exercises:
        raise ValueError("generate_corpus: subjects and exercises must be non-empty")
    clips, split = [], {}
    for si, subject in enumerate(subjects):
        n = clips_per_pair[subject.subject_id] if isinstance(clips_per_pair, dict) else int(clips_per_pair)
        roles = _roles(n)
        for ei, exercise in enumerate(exercises):
            for rep in range(n):
                clip = generate_clip(
                    exercise,
                    subject,
                    duration_s,
                    seed=_clip_seed(seed, si, ei, rep),
                    config=config,
                    clip_id=f"{subject.subject_id}-{exercise.name}-r{rep}",
                )
                clips.append(clip)
                split[clip.clip_id] = roles[rep]
    ds = Dataset(clips, split)
    ds.fit_norm_stats()
    return ds


# ---------------------------------------------------------------------------
# Activation contract suite (also run by the CLI selftest)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContractResult:
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.value >= self.threshold


def _program_means(exercise: Exercise, config: OracleConfig, duration_s: float = 60.0):
    from ..data import Muscle  # local import keeps module load light

    program = program_for(exercise)
    phase = np.arange(int(duration_s * FPS)) / FPS / program.period_s
    act = muscle_oracle(program.angles(phase), program.support_at(phase), config=config)
    return act.mean(axis=0), Muscle


def _ratio(a: float, b: float) -> float:
    return float("inf") if b == 0 else a / b


def activation_contracts(config: OracleConfig = OracleConfig()) -> list[ContractResult]:
    """The qualitative activation structure the generator must reproduce.

    Three direction/support contrasts (back vs front kick hamstring, lunge
    vs skater quad, hook vs elbow punch tricep), the chop-vs-elbow-punch
    quad+arm contrast, and the onset/dip/rise hold-dynamics shape.
    """
    from ..data import Muscle

    out = []
    lb, _ = _program_means(Exercise.LegBack, config)
    fk, _ = _program_means(Exercise.FrontKick, config)
    out.append(
        ContractResult(
            "hamstring: LegBack vs FrontKick",
            _ratio(lb[Muscle.RightHamstring], fk[Muscle.RightHamstring]),
            3.0,
        )
    )
    sl, _ = _program_means(Exercise.SideLunge, config)
    sk, _ = _program_means(Exercise.Skater, config)
    out.append(
        ContractResult(
            "left quad: SideLunge vs Skater",
            _ratio(sl[Muscle.LeftQuad], sk[Muscle.LeftQuad]),
            3.0,
        )
    )
    hp, _ = _program_means(Exercise.HookPunch, config)
    ep, _ = _program_means(Exercise.ElbowPunch, config)
    out.append(
        ContractResult(
            "tricep: HookPunch vs ElbowPunch",
            _ratio(hp[Muscle.RightTricep], ep[Muscle.RightTricep]),
            3.0,
        )
    )
    wc, _ = _program_means(Exercise.Woodchop, config)
    quad = lambda m: (m[Muscle.LeftQuad] + m[Muscle.RightQuad]) / 2
    arms = (
        wc[Muscle.LeftBicep] + wc[Muscle.RightBicep] + wc[Muscle.LeftTricep] + wc[Muscle.RightTricep]
    ) / 4
    out.append(ContractResult("quads: Woodchop vs ElbowPunch", _ratio(quad(wc), quad(ep)), 3.0))
    out.append(ContractResult("Woodchop arm activation", arms, 1.0))

    # 6-second loaded static hold: onset peak, dip by 2 s, rise again by 6 s
    t = int(6.5 * FPS)
    angles = {"knee_l": np.full(t, 1.0)}
    support = np.ones((t, 2), dtype=bool)
    act = muscle_oracle(angles, support, config=config)
    from ..data import Muscle as M

    q = act[:, M.LeftQuad]
    onset = q[:FPS].max()
    dip = q[2 * FPS]
    late = q[6 * FPS]
    out.append(ContractResult("hold onset is the maximum", _ratio(onset, q.max()), 1.0))
    out.append(ContractResult("hold dips by 2 s", _ratio(onset, dip) if dip < onset else 0.0, 1.0 + 1e-9))
    out.append(ContractResult("hold rises again by 6 s", _ratio(late, dip) if late > dip else 0.0, 1.0 + 1e-9))
    return out
