"""Dense float64 tensors with tape-based reverse-mode automatic differentiation.

Just enough machinery for the two architectures in this package: a flat
registry of operations (each a forward plus an adjoint rule), a recording
tape, a reverse sweep, and a finite-difference gradient checker. Tensors
are immutable once produced by an op; there is no broadcasting beyond
scalar*tensor (each op documents the exact shapes it accepts).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "OPS",
    "apply_op",
    "backward",
    "grad_check",
    "matmul",
    "transpose",
    "add",
    "mul_scalar",
    "relu",
    "layer_norm",
    "softmax_lastdim",
    "linear",
    "concat",
    "slice_lastdim",
    "reshape",
    "conv1d_temporal",
    "conv2d_spatiotemporal",
    "batch_norm2d",
    "mse",
]

LAYER_NORM_EPS = 1e-8
BATCH_NORM_EPS = 1e-5


class ShapeError(ValueError):
    """Raised when an op's inputs have incompatible shapes."""


class Tensor:
    """A shaped float64 array plus an optional gradient of the same shape."""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.ascontiguousarray(data, dtype=np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"


class Tape:
    """Ordered record of executed ops; backward replays it in exact reverse."""

    def __init__(self):
        # each record: (kind, inputs tuple[Tensor], output Tensor, adjoint fn)
        self.records: list[tuple] = []
        self._leaves: dict[int, Tensor] = {}

    def record(self, kind, inputs, output, adjoint) -> None:
        self.records.append((kind, inputs, output, adjoint))
        for t in inputs:
            if t.requires_grad:
                self._leaves.setdefault(id(t), t)

    @property
    def leaves(self) -> list[Tensor]:
        """Every requires_grad tensor that appeared as an op input, in first-use order."""
        return list(self._leaves.values())

    def __len__(self) -> int:
        return len(self.records)


def _shapes(tensors) -> str:
    return ", ".join(str(t.shape) for t in tensors)


# ---------------------------------------------------------------------------
# Op registry. Each op is `forward(datas, attrs, need_grad) -> (out, adjoint)`
# where adjoint(grad_out) returns one gradient array (or None) per input.
# ---------------------------------------------------------------------------

OPS: dict[str, callable] = {}


def _op(kind):
    def register(fn):
        OPS[kind] = fn
        return fn

    return register


@_op("matmul")
def _matmul(datas, attrs, need_grad):
    a, b = datas
    if a.ndim == 2 and b.ndim == 2:
        if a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: inner dims differ for {a.shape} @ {b.shape}")
    elif a.ndim == 3 and b.ndim == 3:
        if a.shape[0] != b.shape[0] or a.shape[2] != b.shape[1]:
            raise ShapeError(f"matmul: incompatible batched shapes {a.shape} @ {b.shape}")
    elif a.ndim == 3 and b.ndim == 2:
        if a.shape[2] != b.shape[0]:
            raise ShapeError(f"matmul: inner dims differ for {a.shape} @ {b.shape}")
    else:
        raise ShapeError(f"matmul: expects 2D@2D, 3D@3D or 3D@2D, got {a.shape} @ {b.shape}")
    out = a @ b
    if not need_grad:
        return out, None

    def adjoint(g):
        ga = g @ np.swapaxes(b, -1, -2)
        if a.ndim == 3 and b.ndim == 2:
            gb = np.einsum("bti,btj->ij", a, g, optimize=True)
        else:
            gb = np.swapaxes(a, -1, -2) @ g
        return ga, gb

    return out, adjoint


@_op("transpose")
def _transpose(datas, attrs, need_grad):
    (x,) = datas
    if x.ndim == 2:
        out = np.ascontiguousarray(x.T)
    elif x.ndim == 3:
        out = np.ascontiguousarray(np.swapaxes(x, 1, 2))
    else:
        raise ShapeError(f"transpose: expects 2D or 3D, got {x.shape}")
    if not need_grad:
        return out, None

    def adjoint(g):
        return (np.ascontiguousarray(np.swapaxes(g, -1, -2)),)

    return out, adjoint


@_op("add")
def _add(datas, attrs, need_grad):
    a, b = datas
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes differ: {a.shape} vs {b.shape}")
    out = a + b
    if not need_grad:
        return out, None
    return out, lambda g: (g, g)


@_op("mul_scalar")
def _mul_scalar(datas, attrs, need_grad):
    (x,) = datas
    c = float(attrs["scalar"])
    out = x * c
    if not need_grad:
        return out, None
    return out, lambda g: (g * c,)


@_op("relu")
def _relu(datas, attrs, need_grad):
    (x,) = datas
    out = np.maximum(x, 0.0)
    if not need_grad:
        return out, None
    # adjoint at exactly 0 is 0 (mask is x > 0)
    mask = x > 0.0
    return out, lambda g: (g * mask,)


@_op("layer_norm")
def _layer_norm(datas, attrs, need_grad):
    x, gain, bias = datas
    feat = x.shape[-1]
    if gain.shape != (feat,) or bias.shape != (feat,):
        raise ShapeError(
            f"layer_norm: gain/bias must be ({feat},), got {gain.shape} and {bias.shape}"
        )
    eps = attrs.get("eps", LAYER_NORM_EPS)
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain + bias
    if not need_grad:
        return out, None

    def adjoint(g):
        lead = tuple(range(x.ndim - 1))
        dgain = (g * xhat).sum(axis=lead)
        dbias = g.sum(axis=lead)
        gh = g * gain
        m1 = gh.mean(axis=-1, keepdims=True)
        m2 = (gh * xhat).mean(axis=-1, keepdims=True)
        dx = inv * (gh - m1 - xhat * m2)
        return dx, dgain, dbias

    return out, adjoint


@_op("softmax_lastdim")
def _softmax_lastdim(datas, attrs, need_grad):
    (x,) = datas
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)
    if not need_grad:
        return out, None

    def adjoint(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return out, adjoint


@_op("linear")
def _linear(datas, attrs, need_grad):
    x, w, b = datas
    if x.shape[-1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ShapeError(
            f"linear: incompatible x {x.shape}, W {w.shape}, b {b.shape}"
        )
    out = x @ w + b
    if not need_grad:
        return out, None

    def adjoint(g):
        gx = g @ w.T
        x2 = x.reshape(-1, x.shape[-1])
        g2 = g.reshape(-1, g.shape[-1])
        gw = x2.T @ g2
        gb = g2.sum(axis=0)
        return gx, gw, gb

    return out, adjoint


@_op("concat")
def _concat(datas, attrs, need_grad):
    base = datas[0].shape[:-1]
    for d in datas[1:]:
        if d.shape[:-1] != base:
            raise ShapeError(f"concat: leading dims differ: {[d.shape for d in datas]}")
    out = np.concatenate(datas, axis=-1)
    if not need_grad:
        return out, None
    widths = [d.shape[-1] for d in datas]

    def adjoint(g):
        grads, at = [], 0
        for w in widths:
            grads.append(g[..., at : at + w])
            at += w
        return tuple(grads)

    return out, adjoint


@_op("slice_lastdim")
def _slice_lastdim(datas, attrs, need_grad):
    (x,) = datas
    start, size = int(attrs["start"]), int(attrs["size"])
    if not (0 <= start and start + size <= x.shape[-1]):
        raise ShapeError(f"slice_lastdim: [{start}:{start + size}] out of range for {x.shape}")
    out = np.ascontiguousarray(x[..., start : start + size])
    if not need_grad:
        return out, None

    def adjoint(g):
        gx = np.zeros_like(x)
        gx[..., start : start + size] = g
        return (gx,)

    return out, adjoint


@_op("reshape")
def _reshape(datas, attrs, need_grad):
    (x,) = datas
    shape = tuple(attrs["shape"])
    if int(np.prod(shape)) != x.size:
        raise ShapeError(f"reshape: cannot view {x.shape} as {shape}")
    out = x.reshape(shape)
    if not need_grad:
        return out, None
    return out, lambda g: (g.reshape(x.shape),)


def _pad_time(x, pad):
    """Zero-pad the last (time) axis by `pad` on each side."""
    widths = [(0, 0)] * (x.ndim - 1) + [(pad, pad)]
    return np.pad(x, widths)


@_op("conv1d_temporal")
def _conv1d_temporal(datas, attrs, need_grad):
    x, k, b = datas
    batched = x.ndim == 3
    if not batched and x.ndim != 2:
        raise ShapeError(f"conv1d_temporal: input must be (C_in,T) or (B,C_in,T), got {x.shape}")
    if k.ndim != 3:
        raise ShapeError(f"conv1d_temporal: kernel must be (C_out,C_in,K), got {k.shape}")
    c_out, c_in, ksize = k.shape
    if ksize % 2 != 1:
        raise ShapeError(f"conv1d_temporal: kernel length must be odd, got {ksize}")
    if x.shape[-2] != c_in or b.shape != (c_out,):
        raise ShapeError(
            f"conv1d_temporal: incompatible input {x.shape}, kernel {k.shape}, bias {b.shape}"
        )
    pad = (ksize - 1) // 2
    xp = _pad_time(x, pad)
    # windows: (..., C_in, T, K) view over the padded time axis
    win = np.lib.stride_tricks.sliding_window_view(xp, ksize, axis=-1)
    if batched:
        out = np.einsum("oik,bitk->bot", k, win, optimize=True) + b[None, :, None]
    else:
        out = np.einsum("oik,itk->ot", k, win, optimize=True) + b[:, None]
    if not need_grad:
        return out, None

    def adjoint(g):
        t = x.shape[-1]
        if batched:
            gk = np.einsum("bot,bitk->oik", g, win, optimize=True)
            gb = g.sum(axis=(0, 2))
            scatter = np.einsum("bot,oik->bitk", g, k, optimize=True)
        else:
            gk = np.einsum("ot,itk->oik", g, win, optimize=True)
            gb = g.sum(axis=1)
            scatter = np.einsum("ot,oik->itk", g, k, optimize=True)
        gxp = np.zeros_like(xp)
        for kk in range(ksize):
            gxp[..., kk : kk + t] += scatter[..., kk]
        gx = gxp[..., pad : pad + t] if pad else gxp
        return np.ascontiguousarray(gx), gk, gb

    return out, adjoint


@_op("conv2d_spatiotemporal")
def _conv2d_spatiotemporal(datas, attrs, need_grad):
    """2D conv over (keypoint, time): valid padding spatially, same temporally.

    input (B, C_in, H, T), kernel (C_out, C_in, KH, KT) with KT odd;
    output (B, C_out, H-KH+1, T).
    """
    x, k, b = datas
    if x.ndim != 4 or k.ndim != 4:
        raise ShapeError(f"conv2d_spatiotemporal: need 4D input/kernel, got {x.shape}, {k.shape}")
    bsz, c_in, h, t = x.shape
    c_out, kc_in, kh, kt = k.shape
    if kc_in != c_in or kh > h or kt % 2 != 1 or b.shape != (c_out,):
        raise ShapeError(
            f"conv2d_spatiotemporal: incompatible input {x.shape}, kernel {k.shape}, bias {b.shape}"
        )
    h_out = h - kh + 1
    pad = (kt - 1) // 2
    xp = _pad_time(x, pad)
    # im2col -> one BLAS matmul: cols (B*H_out*T, C_in*KH*KT)
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kt), axis=(2, 3))
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(
        bsz * h_out * t, c_in * kh * kt
    )
    kmat = k.reshape(c_out, c_in * kh * kt)
    out = (cols @ kmat.T).reshape(bsz, h_out, t, c_out).transpose(0, 3, 1, 2)
    out = np.ascontiguousarray(out) + b[None, :, None, None]
    if not need_grad:
        return out, None

    def adjoint(g):
        g2 = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(bsz * h_out * t, c_out)
        gk = (g2.T @ cols).reshape(c_out, c_in, kh, kt)
        gb = g.sum(axis=(0, 2, 3))
        gcols = (g2 @ kmat).reshape(bsz, h_out, t, c_in, kh, kt)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kt):
                gxp[:, :, i : i + h_out, j : j + t] += gcols[:, :, :, :, i, j].transpose(
                    0, 3, 1, 2
                )
        gx = gxp[..., pad : pad + t] if pad else gxp
        return np.ascontiguousarray(gx), gk, gb

    return out, adjoint


class BnStats:
    """Running mean/var for one batch-norm layer; lives outside the tape."""

    def __init__(self, channels: int):
        self.mean = np.zeros(channels)
        self.var = np.ones(channels)

    def copy(self) -> "BnStats":
        out = BnStats(len(self.mean))
        out.mean = self.mean.copy()
        out.var = self.var.copy()
        return out


@_op("batch_norm2d")
def _batch_norm2d(datas, attrs, need_grad):
    """Per-channel normalization of (B, C, H, T).

    attrs: training (bool), stats (BnStats, mutated in train mode), momentum, eps.
    """
    x, gamma, beta = datas
    if x.ndim != 4:
        raise ShapeError(f"batch_norm2d: need 4D input, got {x.shape}")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"batch_norm2d: gamma/beta must be ({c},)")
    training = attrs["training"]
    stats: BnStats = attrs["stats"]
    eps = attrs.get("eps", BATCH_NORM_EPS)
    axes = (0, 2, 3)
    if training:
        mu = x.mean(axis=axes)
        var = x.var(axis=axes)
        n = x.size // c
        momentum = attrs.get("momentum", 0.1)
        stats.mean = (1 - momentum) * stats.mean + momentum * mu
        unbiased = var * (n / max(1, n - 1))
        stats.var = (1 - momentum) * stats.var + momentum * unbiased
    else:
        mu, var = stats.mean, stats.var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu[None, :, None, None]) * inv[None, :, None, None]
    out = xhat * gamma[None, :, None, None] + beta[None, :, None, None]
    if not need_grad:
        return out, None

    def adjoint(g):
        dgamma = (g * xhat).sum(axis=axes)
        dbeta = g.sum(axis=axes)
        gh = g * gamma[None, :, None, None]
        if training:
            n = x.size // c
            m1 = gh.mean(axis=axes)
            m2 = (gh * xhat).mean(axis=axes)
            dx = inv[None, :, None, None] * (
                gh - m1[None, :, None, None] - xhat * m2[None, :, None, None]
            )
            # the means above fold in the 1/n factors of the standard BN backward
            del n
        else:
            dx = gh * inv[None, :, None, None]
        return dx, dgamma, dbeta

    return out, adjoint


@_op("mse")
def _mse(datas, attrs, need_grad):
    pred, target = datas
    if pred.shape != target.shape:
        raise ShapeError(f"mse: shapes differ: {pred.shape} vs {target.shape}")
    diff = pred - target
    out = np.array([(diff * diff).mean()])
    if not need_grad:
        return out, None
    scale = 2.0 / diff.size

    def adjoint(g):
        gp = (g.reshape(-1)[0] * scale) * diff
        return gp, -gp

    return out, adjoint


# ---------------------------------------------------------------------------
# Dispatch, backward sweep, gradient checking
# ---------------------------------------------------------------------------


def apply_op(tape: Tape | None, kind: str, *inputs: Tensor, **attrs) -> Tensor:
    """Run a registered op; record it (with its adjoint) if a tape is given."""
    if kind not in OPS:
        raise KeyError(f"unknown op kind: {kind!r}")
    datas = tuple(t.data for t in inputs)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out_data, adjoint = OPS[kind](datas, attrs, need_grad=tape is not None)
    if not np.all(np.isfinite(out_data)):
        raise FloatingPointError(f"op {kind!r} produced non-finite values")
    out = Tensor(out_data)
    if tape is not None:
        tape.record(kind, inputs, out, adjoint)
    return out


def matmul(tape, a, b):
    return apply_op(tape, "matmul", a, b)


def transpose(tape, x):
    return apply_op(tape, "transpose", x)


def add(tape, a, b):
    return apply_op(tape, "add", a, b)


def mul_scalar(tape, x, c):
    return apply_op(tape, "mul_scalar", x, scalar=c)


def relu(tape, x):
    return apply_op(tape, "relu", x)


def layer_norm(tape, x, gain, bias):
    return apply_op(tape, "layer_norm", x, gain, bias)


def softmax_lastdim(tape, x):
    return apply_op(tape, "softmax_lastdim", x)


def linear(tape, x, w, b):
    return apply_op(tape, "linear", x, w, b)


def concat(tape, *xs):
    return apply_op(tape, "concat", *xs)


def slice_lastdim(tape, x, start, size):
    return apply_op(tape, "slice_lastdim", x, start=start, size=size)


def reshape(tape, x, shape):
    return apply_op(tape, "reshape", x, shape=shape)


def conv1d_temporal(tape, x, kernel, bias):
    return apply_op(tape, "conv1d_temporal", x, kernel, bias)


def conv2d_spatiotemporal(tape, x, kernel, bias):
    return apply_op(tape, "conv2d_spatiotemporal", x, kernel, bias)


def batch_norm2d(tape, x, gamma, beta, stats, training, momentum=0.1):
    return apply_op(
        tape, "batch_norm2d", x, gamma, beta, stats=stats, training=training, momentum=momentum
    )


def mse(tape, pred, target):
    return apply_op(tape, "mse", pred, target)


def backward(tape: Tape, loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Reverse sweep over the tape; returns gradients for all leaf parameters.

    Leaves the tape never reached from `loss` get all-zero gradients. Each
    tensor's .grad is (re)populated; two sweeps over the same tape are
    bit-identical because records are visited in exact reverse order with a
    fixed accumulation order.
    """
    if loss.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    for _, inputs, output, _ in tape.records:
        output.grad = None
        for t in inputs:
            t.grad = None
    loss.grad = np.ones_like(loss.data)
    for kind, inputs, output, adjoint in reversed(tape.records):
        if output.grad is None:
            continue
        grads = adjoint(output.grad)
        for t, g in zip(inputs, grads):
            if g is None:
                continue
            if t.grad is None:
                # copy: adjoints may return views into shared buffers
                t.grad = np.array(g, dtype=np.float64)
            else:
                t.grad += g
    out = {}
    for leaf in tape.leaves:
        if leaf.grad is None:
            leaf.grad = np.zeros_like(leaf.data)
        out[leaf] = leaf.grad
    return out


def grad_check(builder, seed: int, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    `builder(rng)` must return `(params, forward)` where `forward(tape)`
    rebuilds the same graph from the params' current .data and returns the
    scalar loss. Error per element is |analytic - numeric| / max(1e-8, |numeric|).
    """
    rng = np.random.default_rng(seed)
    params, forward = builder(rng)
    tape = Tape()
    loss = forward(tape)
    backward(tape, loss)
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    worst = 0.0
    for p, ana in zip(params, analytic):
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = forward(None).item()
            flat[i] = orig - eps
            lm = forward(None).item()
            flat[i] = orig
            numeric = (lp - lm) / (2.0 * eps)
            err = abs(ana.reshape(-1)[i] - numeric) / max(1e-8, abs(numeric))
            worst = max(worst, err)
    return worst
