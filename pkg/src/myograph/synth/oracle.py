"""Analytic motion-to-muscle oracle.

Each muscle's noise-free activation is

    a_m(t) = gain_m * max(0, w_g * G_m(t) + w_c * C_m(t) + H_m(t))

with a gravity-opposition load term G (nonzero only while the limb is
load-bearing), a concentric-motion term C (joint angular velocity in the
muscle's pulling direction, attenuated when gravity does the work), and a
hold-dynamics term H (onset spike that decays, then a slow fatigue rise,
active only while a loaded joint is held still). The constants live in
`OracleConfig`; the shipped defaults were tuned once so the activation
contract suite passes, then frozen in oracle_defaults.cfg.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ..data import FPS, N_MUSCLES, Muscle

ORACLE_CONFIG_VERSION = 1

HALF_PI = np.pi / 2.0


@dataclass(frozen=True)
class OracleConfig:
    gravity_weight: float = 6.0  # w_g
    concentric_weight: float = 10.0  # w_c
    hold_onset_amp: float = 8.0  # A
    hold_fatigue_amp: float = 5.0  # B
    hold_onset_tau_s: float = 0.5  # tau_1
    hold_fatigue_tau_s: float = 3.0  # tau_2
    velocity_threshold: float = 0.2  # rad/s, stillness gate for holds
    passive_factor: float = 0.15  # attenuation for gravity-assisted motion
    hold_load_threshold: float = 0.3  # min load moment for hold dynamics
    arm_load_scale: float = 0.4  # forearm-carry load on the biceps
    tricep_load_scale: float = 0.3  # straight-arm-carry load on the triceps
    ham_support_load: float = 0.25  # support-leg hip-extension load
    free_knee_flex_scale: float = 0.8  # free-leg shank curls onto the hamstring
    kick_hip_threshold: float = 0.35  # raised-hip gate for free-leg knee snaps
    noise_sigma: float = 2.0  # raw units, applied by generate_clip
    max_sensor_offset: float = 3.0  # raw units, per-subject upper bound


def save_oracle_config(config: OracleConfig, path) -> None:
    """Write the documented `key = value` text format."""
    lines = [
        "# motion-to-muscle oracle constants",
        f"version = {ORACLE_CONFIG_VERSION}",
    ]
    for f in dataclasses.fields(config):
        lines.append(f"{f.name} = {getattr(config, f.name)!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_oracle_config(path) -> OracleConfig:
    names = {f.name for f in dataclasses.fields(OracleConfig)}
    values = {}
    version = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"oracle config line {lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key == "version":
                version = int(val)
            elif key in names:
                values[key] = float(val)
            else:
                raise ValueError(f"oracle config line {lineno}: unknown key {key!r}")
    if version != ORACLE_CONFIG_VERSION:
        raise ValueError(f"oracle config: version {version!r}, expected {ORACLE_CONFIG_VERSION}")
    return OracleConfig(**values)


def _velocity(angle: np.ndarray) -> np.ndarray:
    v = np.zeros_like(angle)
    v[1:] = (angle[1:] - angle[:-1]) * FPS
    return v


def _hold_term(loaded: np.ndarray, still: np.ndarray, cfg: OracleConfig) -> np.ndarray:
    """Onset-clocked hold dynamics over the frames where a loaded joint is still."""
    in_hold = loaded & still
    h = np.zeros(in_hold.shape[0])
    age = -1
    for t in range(in_hold.shape[0]):
        if in_hold[t]:
            age = age + 1 if age >= 0 else 0
            dt = age / FPS
            h[t] = cfg.hold_onset_amp * np.exp(-dt / cfg.hold_onset_tau_s) + (
                cfg.hold_fatigue_amp * -np.expm1(-dt / cfg.hold_fatigue_tau_s)
            )
        else:
            age = -1
    return h


def muscle_oracle(
    angles: dict[str, np.ndarray],
    support: np.ndarray,
    gains: np.ndarray | None = None,
    config: OracleConfig = OracleConfig(),
) -> np.ndarray:
    """Noise-free raw activations (T, 8) for a joint-angle trajectory at 10 fps.

    `angles` holds per-frame radians for hip/knee/elbow/shoulder left/right
    (missing joints default to zero); `support` is a (T, 2) bool array of
    load-bearing legs in (left, right) order. `gains` are the per-muscle
    subject gains (default 1).
    """
    support = np.asarray(support, dtype=bool)
    t = support.shape[0]
    if support.shape != (t, 2):
        raise ValueError(f"support must be (T, 2), got {support.shape}")

    def track(name):
        arr = np.asarray(angles.get(name, np.zeros(t)), dtype=np.float64)
        return np.broadcast_to(arr, (t,))

    if gains is None:
        gains = np.ones(N_MUSCLES)
    out = np.zeros((t, N_MUSCLES))
    cfg = config

    for side_idx, side in enumerate(("l", "r")):
        sup = support[:, side_idx]
        hip = track(f"hip_{side}")
        knee = track(f"knee_{side}")
        elbow = track(f"elbow_{side}")
        shoulder = track(f"shoulder_{side}")
        v_hip = _velocity(hip)
        v_knee = _velocity(knee)
        v_elbow = _velocity(elbow)

        arm_raised = np.maximum(0.0, np.sin(shoulder))
        g_bicep = cfg.arm_load_scale * arm_raised * np.sin(np.clip(elbow, 0.0, HALF_PI))
        g_tricep = cfg.tricep_load_scale * arm_raised * np.maximum(0.0, 1.0 - elbow)
        g_quad = np.where(sup, np.sin(np.clip(knee, 0.0, HALF_PI)), 0.0)
        g_ham = cfg.ham_support_load * np.where(sup, np.sin(np.clip(-hip, 0.0, HALF_PI)), 0.0)

        c_bicep = np.maximum(0.0, v_elbow)
        c_tricep = np.maximum(0.0, -v_elbow)
        # knee extension: always active on the support leg (raising the body);
        # on a free leg only the upward kick snap fights gravity
        quad_gate = np.where(sup, 1.0, np.where(hip > cfg.kick_hip_threshold, 1.0, cfg.passive_factor))
        c_quad = np.maximum(0.0, -v_knee) * quad_gate
        # hip extension: active when swinging past vertical, passive when the
        # raised leg merely drops back; free-leg shank curls also pull
        ham_gate = np.where(hip <= 0.0, 1.0, cfg.passive_factor)
        c_ham = np.maximum(0.0, -v_hip) * ham_gate + (
            cfg.free_knee_flex_scale * np.maximum(0.0, v_knee) * (~sup)
        )

        per_muscle = {
            "Bicep": (g_bicep, c_bicep, np.abs(v_elbow)),
            "Tricep": (g_tricep, c_tricep, np.abs(v_elbow)),
            "Quad": (g_quad, c_quad, np.abs(v_knee)),
            "Hamstring": (g_ham, c_ham, np.abs(v_hip)),
        }
        prefix = "Left" if side == "l" else "Right"
        for stem, (g, c, joint_speed) in per_muscle.items():
            m = Muscle[f"{prefix}{stem}"]
            loaded = g > cfg.hold_load_threshold
            still = joint_speed < cfg.velocity_threshold
            h = _hold_term(loaded, still, cfg)
            raw = cfg.gravity_weight * g + cfg.concentric_weight * c + h
            out[:, m] = gains[m] * np.maximum(0.0, raw)

    return out
