"""The two learned architectures.

The main model is a local motion encoder (one temporal convolution whose
spatial extent covers the whole flattened keypoint dimension) feeding an
unmasked pre-layer-norm transformer with a per-timestep linear head. The
baseline is a 5-layer spatio-temporal CNN that collapses the keypoint
axis to the muscle count with valid padding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as tc
from .tensor import BnStats, Tape, Tensor

TRANSFORMER = "transformer"
CNN = "cnn"


@dataclass(frozen=True)
class TransformerConfig:
    d_model: int = 128
    layers: int = 4
    heads: int = 8
    ffn_hidden: int = 256
    conv_channels: int = 128
    conv_kernel: int = 9  # frames, roughly a second at 10 fps, odd for symmetric padding
    input_dim: int = 50  # 25 keypoints x 2
    output_dim: int = 8
    window: int = 30

    def __post_init__(self):
        if self.d_model % self.heads:
            raise ValueError("d_model must be divisible by heads")
        if self.conv_kernel % 2 == 0:
            raise ValueError("conv_kernel must be odd")
        if self.conv_channels != self.d_model:
            raise ValueError("conv channels feed the transformer width directly")


@dataclass(frozen=True)
class CnnConfig:
    channels: tuple[int, ...] = (1, 16, 32, 32, 16, 8)
    spatial_kernels: tuple[int, ...] = (11, 11, 11, 11, 10)
    temporal_kernel: int = 3
    batch_norm_layers: int = 3
    input_dim: int = 50
    output_dim: int = 8
    window: int = 30

    def __post_init__(self):
        if len(self.channels) != len(self.spatial_kernels) + 1:
            raise ValueError("need one channel count per layer boundary")
        h = self.input_dim
        for k in self.spatial_kernels:
            h = h - k + 1
        if h != 1:
            raise ValueError(f"spatial kernels must collapse {self.input_dim} -> 1, got {h}")
        if self.channels[-1] != self.output_dim:
            raise ValueError("last channel count must equal the muscle count")

    @property
    def spatial_extents(self) -> tuple[int, ...]:
        out = [self.input_dim]
        for k in self.spatial_kernels:
            out.append(out[-1] - k + 1)
        return tuple(out)


@dataclass
class ModelWeights:
    """Named parameter tensors for either architecture (+ CNN running stats)."""

    arch: str
    config: TransformerConfig | CnnConfig
    params: dict[str, Tensor]
    bn_stats: dict[str, BnStats] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.params) != len(set(self.params)):
            raise ValueError("duplicate parameter name")

    def trainable(self) -> list[tuple[str, Tensor]]:
        return [(n, p) for n, p in self.params.items() if p.requires_grad]

    def copy(self) -> "ModelWeights":
        params = {
            n: Tensor(p.data.copy(), requires_grad=p.requires_grad, name=p.name)
            for n, p in self.params.items()
        }
        stats = {n: s.copy() for n, s in self.bn_stats.items()}
        return ModelWeights(self.arch, self.config, params, stats)


def sinusoidal_table(length: int, d_model: int) -> np.ndarray:
    pos = np.arange(length)[:, None].astype(np.float64)
    i = np.arange(0, d_model, 2).astype(np.float64)
    div = np.exp(-np.log(10000.0) * i / d_model)
    table = np.zeros((length, d_model))
    table[:, 0::2] = np.sin(pos * div)
    table[:, 1::2] = np.cos(pos * div)
    return table


def _uniform(rng, fan_in, *shape):
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_transformer(config: TransformerConfig, seed: int) -> ModelWeights:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(0x70D0, seed)))
    d, f = config.d_model, config.ffn_hidden
    p: dict[str, Tensor] = {}

    def param(name, arr):
        p[name] = Tensor(arr, requires_grad=True, name=name)

    conv_fan = config.input_dim * config.conv_kernel
    param("conv.kernel", _uniform(rng, conv_fan, config.conv_channels, config.input_dim, config.conv_kernel))
    param("conv.bias", _uniform(rng, conv_fan, config.conv_channels))
    p["pos.table"] = Tensor(sinusoidal_table(config.window, d), requires_grad=False, name="pos.table")
    for i in range(config.layers):
        for ln in ("ln1", "ln2"):
            param(f"layer{i}.{ln}.gain", np.ones(d))
            param(f"layer{i}.{ln}.bias", np.zeros(d))
        for proj in ("wq", "wk", "wv", "wo"):
            param(f"layer{i}.attn.{proj}", _uniform(rng, d, d, d))
            if proj != "wk":
                # a key bias shifts every score in a row equally, which softmax
                # cancels; the parameter would be dead weight
                param(f"layer{i}.attn.{proj[1]}b", _uniform(rng, d, d))
        param(f"layer{i}.ffn.w1", _uniform(rng, d, d, f))
        param(f"layer{i}.ffn.b1", _uniform(rng, d, f))
        param(f"layer{i}.ffn.w2", _uniform(rng, f, f, d))
        param(f"layer{i}.ffn.b2", _uniform(rng, f, d))
    param("final_ln.gain", np.ones(d))
    param("final_ln.bias", np.zeros(d))
    param("head.weight", _uniform(rng, d, d, config.output_dim))
    param("head.bias", _uniform(rng, d, config.output_dim))
    return ModelWeights(TRANSFORMER, config, p)


def init_cnn(config: CnnConfig, seed: int) -> ModelWeights:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(0xC44, seed)))
    p: dict[str, Tensor] = {}
    stats: dict[str, BnStats] = {}
    kt = config.temporal_kernel
    for i, (c_in, c_out, kh) in enumerate(
        zip(config.channels[:-1], config.channels[1:], config.spatial_kernels)
    ):
        fan = c_in * kh * kt
        p[f"conv{i}.kernel"] = Tensor(
            _uniform(rng, fan, c_out, c_in, kh, kt), requires_grad=True, name=f"conv{i}.kernel"
        )
        if i < config.batch_norm_layers:
            # batch norm re-centers each channel, so a conv bias here is dead weight
            p[f"bn{i}.gamma"] = Tensor(np.ones(c_out), requires_grad=True, name=f"bn{i}.gamma")
            p[f"bn{i}.beta"] = Tensor(np.zeros(c_out), requires_grad=True, name=f"bn{i}.beta")
            stats[f"bn{i}"] = BnStats(c_out)
        else:
            p[f"conv{i}.bias"] = Tensor(
                _uniform(rng, fan, c_out), requires_grad=True, name=f"conv{i}.bias"
            )
    return ModelWeights(CNN, config, p, stats)


def transformer_param_count(config: TransformerConfig) -> int:
    """Trainable parameters (the sinusoidal table is fixed, K has no bias)."""
    d, f = config.d_model, config.ffn_hidden
    conv = config.conv_channels * config.input_dim * config.conv_kernel + config.conv_channels
    per_layer = 4 * d + (4 * d * d + 3 * d) + (d * f + f) + (f * d + d)
    head = d * config.output_dim + config.output_dim
    return conv + config.layers * per_layer + 2 * d + head


def cnn_param_count(config: CnnConfig) -> int:
    total = 0
    kt = config.temporal_kernel
    for i, (c_in, c_out, kh) in enumerate(
        zip(config.channels[:-1], config.channels[1:], config.spatial_kernels)
    ):
        total += c_out * c_in * kh * kt
        total += 2 * c_out if i < config.batch_norm_layers else c_out
    return total


def param_count(weights: ModelWeights) -> int:
    return sum(p.size for _, p in weights.trainable())


# ---------------------------------------------------------------------------
# Forward passes (batched: x is (B, T, kd))
# ---------------------------------------------------------------------------


def local_motion_encode(weights: ModelWeights, x: Tensor, tape: Tape | None) -> Tensor:
    """One temporal convolution over the flattened keypoint axis: (B,T,kd) -> (B,T,c)."""
    xt = tc.transpose(tape, x)  # (B, kd, T)
    h = tc.conv1d_temporal(tape, xt, weights.params["conv.kernel"], weights.params["conv.bias"])
    return tc.transpose(tape, h)  # (B, T, c)


def _attention(weights, prefix, h, tape, config, attn_sink=None):
    p = weights.params
    q = tc.linear(tape, h, p[f"{prefix}.wq"], p[f"{prefix}.qb"])
    k = tc.matmul(tape, h, p[f"{prefix}.wk"])
    v = tc.linear(tape, h, p[f"{prefix}.wv"], p[f"{prefix}.vb"])
    dh = config.d_model // config.heads
    ctx = []
    for head in range(config.heads):
        qh = tc.slice_lastdim(tape, q, head * dh, dh)
        kh = tc.slice_lastdim(tape, k, head * dh, dh)
        vh = tc.slice_lastdim(tape, v, head * dh, dh)
        scores = tc.mul_scalar(tape, tc.matmul(tape, qh, tc.transpose(tape, kh)), 1.0 / np.sqrt(dh))
        attn = tc.softmax_lastdim(tape, scores)
        if attn_sink is not None:
            attn_sink.append(attn.data)
        ctx.append(tc.matmul(tape, attn, vh))
    merged = tc.concat(tape, *ctx)
    return tc.linear(tape, merged, p[f"{prefix}.wo"], p[f"{prefix}.ob"])


def global_encode(
    weights: ModelWeights,
    emb: Tensor,
    tape: Tape | None,
    attn_sink: list | None = None,
    return_embeddings: bool = False,
) -> Tensor:
    """Positional encoding + unmasked transformer + per-timestep head: (B,T,c) -> (B,T,n)."""
    config: TransformerConfig = weights.config
    p = weights.params
    b, t, d = emb.shape
    if t > config.window:
        raise tc.ShapeError(f"window length {t} exceeds positional table {config.window}")
    pos = Tensor(np.ascontiguousarray(np.broadcast_to(p["pos.table"].data[:t], (b, t, d))))
    h = tc.add(tape, emb, pos)
    for i in range(config.layers):
        n1 = tc.layer_norm(tape, h, p[f"layer{i}.ln1.gain"], p[f"layer{i}.ln1.bias"])
        h = tc.add(tape, h, _attention(weights, f"layer{i}.attn", n1, tape, config, attn_sink))
        n2 = tc.layer_norm(tape, h, p[f"layer{i}.ln2.gain"], p[f"layer{i}.ln2.bias"])
        ff = tc.linear(tape, n2, p[f"layer{i}.ffn.w1"], p[f"layer{i}.ffn.b1"])
        ff = tc.relu(tape, ff)
        ff = tc.linear(tape, ff, p[f"layer{i}.ffn.w2"], p[f"layer{i}.ffn.b2"])
        h = tc.add(tape, h, ff)
    h = tc.layer_norm(tape, h, p["final_ln.gain"], p["final_ln.bias"])
    if return_embeddings:
        return h
    return tc.linear(tape, h, p["head.weight"], p["head.bias"])


def transformer_forward(
    weights: ModelWeights, x: Tensor, tape: Tape | None = None, attn_sink: list | None = None
) -> Tensor:
    return global_encode(weights, local_motion_encode(weights, x, tape), tape, attn_sink)


def transformer_embed(weights: ModelWeights, x: Tensor) -> np.ndarray:
    """Final-layer embeddings before the head (for the similarity-matrix flag)."""
    emb = local_motion_encode(weights, x, None)
    return global_encode(weights, emb, None, return_embeddings=True).data


def cnn_forward(
    weights: ModelWeights, x: Tensor, tape: Tape | None = None, training: bool = False
) -> Tensor:
    config: CnnConfig = weights.config
    p = weights.params
    b, t, kd = x.shape
    h = tc.transpose(tape, x)  # (B, kd, T)
    h = tc.reshape(tape, h, (b, 1, kd, t))
    n_layers = len(config.spatial_kernels)
    for i in range(n_layers):
        if i < config.batch_norm_layers:
            zero_bias = Tensor(np.zeros(config.channels[i + 1]))
            h = tc.conv2d_spatiotemporal(tape, h, p[f"conv{i}.kernel"], zero_bias)
            h = tc.batch_norm2d(
                tape, h, p[f"bn{i}.gamma"], p[f"bn{i}.beta"], weights.bn_stats[f"bn{i}"], training
            )
        else:
            h = tc.conv2d_spatiotemporal(tape, h, p[f"conv{i}.kernel"], p[f"conv{i}.bias"])
        if i < n_layers - 1:
            h = tc.relu(tape, h)
    h = tc.reshape(tape, h, (b, config.output_dim, t))
    return tc.transpose(tape, h)  # (B, T, n)


def forward(
    weights: ModelWeights, x: Tensor, tape: Tape | None = None, training: bool = False
) -> Tensor:
    if weights.arch == TRANSFORMER:
        return transformer_forward(weights, x, tape)
    if weights.arch == CNN:
        return cnn_forward(weights, x, tape, training)
    raise ValueError(f"unknown arch {weights.arch!r}")


def windows_to_arrays(windows) -> tuple[np.ndarray, np.ndarray]:
    """Stack windows into (N, T, kd) inputs and (N, T, 8) targets."""
    x = np.stack([w.keypoints.reshape(w.length, -1) for w in windows])
    y = np.stack([w.emg for w in windows])
    return x, y


def predict(weights: ModelWeights, x: np.ndarray, batch_size: int = 128) -> np.ndarray:
    """Inference over (N, T, kd) inputs -> (N, T, n); eval-mode, no tape."""
    outs = []
    for at in range(0, x.shape[0], batch_size):
        xb = Tensor(x[at : at + batch_size])
        outs.append(forward(weights, xb, tape=None, training=False).data)
    return np.concatenate(outs, axis=0)


def predict_windows(weights: ModelWeights, windows, batch_size: int = 128) -> np.ndarray:
    x, _ = windows_to_arrays(windows)
    return predict(weights, x, batch_size=batch_size)


def init_model(arch: str, window: int, seed: int) -> ModelWeights:
    if arch == TRANSFORMER:
        return init_transformer(TransformerConfig(window=window), seed)
    if arch == CNN:
        return init_cnn(CnnConfig(window=window), seed)
    raise ValueError(f"unknown arch {arch!r}")
