"""MSE training with Adam, fine-tuning, and checkpoint persistence.

Training is a deterministic function of (dataset, config, seed): batches
are drawn from a seeded generator, gradients accumulate in a fixed order,
and the returned weights are the best-validation snapshot.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import tensor as tc
from .data import Dataset, EXERCISES, Window
from .models import (
    CNN,
    CnnConfig,
    ModelWeights,
    TRANSFORMER,
    TransformerConfig,
    forward,
    init_cnn,
    init_model,
    init_transformer,
    predict,
    windows_to_arrays,
)
from .tensor import Tape, Tensor, backward

CHECKPOINT_MAGIC = b"MIAC"
CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, detail: str = ""):
        super().__init__(f"non-finite loss at step {step}{': ' + detail if detail else ''}")
        self.step = step


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 32
    max_steps: int = 1200
    eval_every: int = 50
    patience: int = 20  # evals without improvement before stopping
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    window: int = 30
    train_stride: int = 5
    preset: str = "desk"

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


# desk presets are sized so the full protocol suite runs in minutes on a
# laptop core; "paper" keeps the published optimizer settings and is only
# smoke-tested for stability at desk scale
def preset(name: str, arch: str, seed: int = 0, window: int = 30) -> TrainConfig:
    batch = 32 if arch == TRANSFORMER else 8
    base = dict(batch_size=batch, seed=seed, window=window, preset=name)
    if name == "desk":
        return TrainConfig(lr=3e-4, max_steps=1200, eval_every=50, **base)
    if name == "desk-loo":
        return TrainConfig(lr=3e-4, max_steps=450, eval_every=75, patience=6, **base)
    if name == "desk-transfer":
        return TrainConfig(lr=3e-4, max_steps=500, eval_every=50, patience=10, **base)
    if name == "paper":
        return TrainConfig(lr=5e-6, max_steps=20000, eval_every=500, **base)
    raise ValueError(f"unknown preset {name!r}")


class AdamState:
    """First/second moment tensors plus the step counter."""

    def __init__(self, weights: ModelWeights):
        self.m = {n: np.zeros_like(p.data) for n, p in weights.trainable()}
        self.v = {n: np.zeros_like(p.data) for n, p in weights.trainable()}
        self.t = 0


def adam_step(
    weights: ModelWeights, grads: dict[str, np.ndarray], state: AdamState, config: TrainConfig
) -> None:
    """Standard bias-corrected Adam update, in place."""
    state.t += 1
    bc1 = 1.0 - config.beta1**state.t
    bc2 = 1.0 - config.beta2**state.t
    for name, p in weights.trainable():
        g = grads[name]
        if g.shape != p.data.shape:
            raise tc.ShapeError(f"adam_step: grad shape {g.shape} != param {p.data.shape} ({name})")
        state.m[name] = config.beta1 * state.m[name] + (1.0 - config.beta1) * g
        state.v[name] = config.beta2 * state.v[name] + (1.0 - config.beta2) * (g * g)
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        p.data -= config.lr * m_hat / (np.sqrt(v_hat) + config.eps)


@dataclass
class TrainResult:
    weights: ModelWeights  # best-validation snapshot (final weights if no val split)
    loss_curve: list[float] = field(default_factory=list)  # per-step batch MSE
    val_curve: list[tuple[int, float]] = field(default_factory=list)  # (step, RMSE)
    best_step: int = 0

    @property
    def best_val_rmse(self) -> float:
        return min((r for _, r in self.val_curve), default=float("nan"))


def batch_loss_and_grads(
    weights: ModelWeights, x: np.ndarray, y: np.ndarray, training: bool = True
) -> tuple[float, dict[str, np.ndarray]]:
    """One forward/backward over a batch; returns (mean-squared-error, grads by name)."""
    tape = Tape()
    pred = forward(weights, Tensor(x), tape, training=training)
    loss = tc.mse(tape, pred, Tensor(y))
    backward(tape, loss)
    grads = {n: p.grad.copy() for n, p in weights.trainable()}
    return loss.item(), grads


def _val_rmse(weights: ModelWeights, x: np.ndarray, y: np.ndarray) -> float:
    pred = predict(weights, x)
    return float(np.sqrt(np.mean((pred - y) ** 2)))


def train_on_windows(
    model: str | ModelWeights,
    train_windows: list[Window],
    val_windows: list[Window],
    config: TrainConfig,
) -> TrainResult:
    if not train_windows:
        raise ValueError("train_on_windows: no training windows")
    weights = model.copy() if isinstance(model, ModelWeights) else init_model(model, config.window, config.seed)
    x, y = windows_to_arrays(train_windows)
    xv, yv = windows_to_arrays(val_windows) if val_windows else (None, None)

    rng = np.random.default_rng(np.random.SeedSequence(entropy=(0x7E41, config.seed)))
    state = AdamState(weights)
    result = TrainResult(weights=weights)
    best_rmse = np.inf
    evals_since_best = 0
    order = rng.permutation(len(train_windows))
    cursor = 0

    for step in range(config.max_steps):
        if cursor + config.batch_size > len(order):
            order = rng.permutation(len(train_windows))
            cursor = 0
        # pools smaller than the batch just yield the whole (reshuffled) pool
        idx = order[cursor : cursor + config.batch_size]
        cursor += config.batch_size
        try:
            loss, grads = batch_loss_and_grads(weights, x[idx], y[idx], training=True)
        except FloatingPointError as exc:
            raise TrainingDiverged(step, str(exc)) from exc
        if not np.isfinite(loss):
            raise TrainingDiverged(step)
        adam_step(weights, grads, state, config)
        result.loss_curve.append(loss)

        if xv is not None and (step + 1) % config.eval_every == 0:
            vr = _val_rmse(weights, xv, yv)
            result.val_curve.append((step + 1, vr))
            if vr < best_rmse - 1e-12:
                best_rmse = vr
                result.weights = weights.copy()
                result.best_step = step + 1
                evals_since_best = 0
            else:
                evals_since_best += 1
                if evals_since_best >= config.patience:
                    break

    if xv is None or not result.val_curve:
        result.weights = weights
        result.best_step = len(result.loss_curve)
    return result


def train(model: str | ModelWeights, dataset: Dataset, config: TrainConfig) -> TrainResult:
    train_w = dataset.windows("train", config.window, config.train_stride)
    val_w = dataset.windows("val", config.window)
    return train_on_windows(model, train_w, val_w, config)


def fine_tune(
    weights: ModelWeights,
    train_windows: list[Window],
    val_windows: list[Window],
    exercise_count: int,
    config: TrainConfig,
) -> TrainResult:
    """Continue training from a checkpoint on the first k exercises' windows.

    All layers stay trainable; k = 0 returns the checkpoint weights
    unchanged, k = 20 is ordinary continued training on everything.
    """
    allowed = set(EXERCISES[:exercise_count])
    sub_train = [w for w in train_windows if w.exercise in allowed]
    sub_val = [w for w in val_windows if w.exercise in allowed]
    if exercise_count == 0 or not sub_train:
        return TrainResult(weights=weights.copy())
    return train_on_windows(weights, sub_train, sub_val, config)


# ---------------------------------------------------------------------------
# Checkpoints: magic "MIAC", u32 version, u64 header length, JSON header,
# then contiguous little-endian float32 payloads in header order.
# ---------------------------------------------------------------------------


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    weights: ModelWeights
    adam: AdamState | None = None
    train_config: TrainConfig | None = None
    rng_state: dict | None = None


def _named_arrays(weights: ModelWeights) -> dict[str, np.ndarray]:
    out = {name: p.data for name, p in weights.params.items()}
    for name, stats in weights.bn_stats.items():
        out[f"running.{name}.mean"] = stats.mean
        out[f"running.{name}.var"] = stats.var
    return out


def save_checkpoint(
    path,
    weights: ModelWeights,
    adam: AdamState | None = None,
    train_config: TrainConfig | None = None,
    rng_state: dict | None = None,
) -> None:
    arrays = _named_arrays(weights)
    tensors, payload, offset = [], [], 0
    for name in sorted(arrays):
        f32 = arrays[name].astype("<f4")
        tensors.append({"name": name, "dtype": "f32", "shape": list(f32.shape), "offset": offset})
        payload.append(f32.tobytes())
        offset += f32.nbytes
    adam_entry = None
    if adam is not None:
        adam_tensors = []
        moments = {f"m.{n}": a for n, a in adam.m.items()}
        moments.update({f"v.{n}": a for n, a in adam.v.items()})
        for name in sorted(moments):
            f32 = moments[name].astype("<f4")
            adam_tensors.append(
                {"name": name, "dtype": "f32", "shape": list(f32.shape), "offset": offset}
            )
            payload.append(f32.tobytes())
            offset += f32.nbytes
        adam_entry = {"step": adam.t, "tensors": adam_tensors}
    header = {
        "arch": weights.arch,
        "config": dataclasses.asdict(weights.config),
        "tensors": tensors,
        "adam": adam_entry,
        "train_config": dataclasses.asdict(train_config) if train_config else None,
        "rng_state": rng_state,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for chunk in payload:
            fh.write(chunk)


def _read_tensor(payload: bytes, entry: dict) -> np.ndarray:
    shape = tuple(entry["shape"])
    count = int(np.prod(shape)) if shape else 1
    start = entry["offset"]
    end = start + 4 * count
    if end > len(payload):
        raise CheckpointError(f"truncated payload: tensor {entry['name']!r} ends at {end}")
    arr = np.frombuffer(payload[start:end], dtype="<f4").reshape(shape)
    return arr.astype(np.float64)


def load_checkpoint(path, for_resume: bool = False) -> Checkpoint:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad magic {raw[:4]!r}, expected {CHECKPOINT_MAGIC!r}")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (header_len,) = struct.unpack_from("<Q", raw, 8)
    header_end = 16 + header_len
    if header_end > len(raw):
        raise CheckpointError("truncated header")
    try:
        header = json.loads(raw[16:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"malformed header: {exc}") from exc
    payload = raw[header_end:]

    arch = header["arch"]
    if arch == TRANSFORMER:
        config = TransformerConfig(**header["config"])
        weights = init_transformer(config, seed=0)
    elif arch == CNN:
        cfg = dict(header["config"])
        cfg["channels"] = tuple(cfg["channels"])
        cfg["spatial_kernels"] = tuple(cfg["spatial_kernels"])
        config = CnnConfig(**cfg)
        weights = init_cnn(config, seed=0)
    else:
        raise CheckpointError(f"unknown arch {arch!r}")
    expected = _named_arrays(weights)
    seen = set()
    for entry in header["tensors"]:
        name = entry["name"]
        if name not in expected:
            raise CheckpointError(f"unexpected tensor {name!r} for arch {arch!r}")
        arr = _read_tensor(payload, entry)
        if arr.shape != expected[name].shape:
            raise CheckpointError(
                f"shape mismatch for {name!r}: checkpoint {arr.shape}, model {expected[name].shape}"
            )
        if name.startswith("running."):
            _, bn, kind = name.split(".")
            setattr(weights.bn_stats[bn], kind, arr)
        else:
            weights.params[name].data = np.ascontiguousarray(arr)
        seen.add(name)
    missing = set(expected) - seen
    if missing:
        raise CheckpointError(f"missing tensors: {sorted(missing)}")

    adam = None
    if header.get("adam"):
        adam = AdamState(weights)
        adam.t = header["adam"]["step"]
        for entry in header["adam"]["tensors"]:
            name = entry["name"]
            kind, pname = name.split(".", 1)
            store = adam.m if kind == "m" else adam.v
            if pname not in store:
                raise CheckpointError(f"unexpected adam tensor {name!r}")
            arr = _read_tensor(payload, entry)
            if arr.shape != store[pname].shape:
                raise CheckpointError(f"shape mismatch for adam tensor {name!r}")
            store[pname] = arr
    if for_resume and adam is None:
        raise CheckpointError("checkpoint has no optimizer state; cannot resume training")

    train_config = TrainConfig(**header["train_config"]) if header.get("train_config") else None
    return Checkpoint(weights, adam, train_config, header.get("rng_state"))
