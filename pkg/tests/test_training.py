import numpy as np
import pytest

from myograph.data import Exercise, EXERCISES, Window
from myograph.models import (
    TransformerConfig,
    init_transformer,
    predict,
    windows_to_arrays,
)
from myograph.training import (
    AdamState,
    Checkpoint,
    CheckpointError,
    TrainConfig,
    TrainingDiverged,
    adam_step,
    batch_loss_and_grads,
    fine_tune,
    load_checkpoint,
    preset,
    save_checkpoint,
    train_on_windows,
)
from myograph.tensor import Tensor

TINY = TransformerConfig(
    d_model=16, layers=2, heads=4, ffn_hidden=24, conv_channels=16, conv_kernel=3, window=10
)


def tiny_weights(seed=0):
    return init_transformer(TINY, seed=seed)


def make_windows(n, t=10, seed=0, exercise=Exercise.Squats):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        out.append(
            Window(
                clip_id=f"c{i}",
                subject_id="S1",
                exercise=exercise,
                start=0,
                keypoints=rng.uniform(0, 1, size=(t, 25, 2)),
                emg=rng.uniform(0, 60, size=(t, 8)),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


def scalar_param(value):
    w = tiny_weights()
    # strip down to a single named scalar parameter for closed-form checks
    p = Tensor(np.array([value]), requires_grad=True, name="w")
    w.params = {"w": p}
    return w, p


def test_adam_first_step_closed_form():
    cfg = TrainConfig(lr=0.01)
    w, p = scalar_param(0.0)
    state = AdamState(w)
    adam_step(w, {"w": np.array([1.0])}, state, cfg)
    assert p.data[0] == pytest.approx(-cfg.lr / (1.0 + cfg.eps), rel=1e-15)


def test_adam_zero_grads_zero_update():
    cfg = TrainConfig(lr=0.5)
    w, p = scalar_param(3.0)
    state = AdamState(w)
    adam_step(w, {"w": np.array([0.0])}, state, cfg)
    assert p.data[0] == 3.0


def test_adam_matches_scalar_hand_simulation():
    cfg = TrainConfig(lr=0.05, beta1=0.9, beta2=0.999, eps=1e-8)
    w, p = scalar_param(0.7)
    state = AdamState(w)
    # scripted scalar oracle, plain floats
    theta, m, v = 0.7, 0.0, 0.0
    for t in range(1, 21):
        g = np.sin(0.3 * t) + 0.2
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        m_hat = m / (1 - 0.9**t)
        v_hat = v / (1 - 0.999**t)
        theta -= 0.05 * m_hat / (np.sqrt(v_hat) + 1e-8)
        adam_step(w, {"w": np.array([np.sin(0.3 * t) + 0.2])}, state, cfg)
        assert p.data[0] == pytest.approx(theta, abs=1e-12)


def test_lr_zero_leaves_weights_unchanged():
    wins = make_windows(6)
    cfg = TrainConfig(lr=0.0, batch_size=3, max_steps=20, eval_every=100, window=10, seed=1)
    w0 = tiny_weights(seed=1)
    result = train_on_windows(w0, wins, [], cfg)
    for name, p in w0.trainable():
        np.testing.assert_array_equal(result.weights.params[name].data, p.data)


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def test_same_seed_identical_loss_curves():
    wins = make_windows(8)
    cfg = TrainConfig(lr=1e-3, batch_size=4, max_steps=25, eval_every=10, window=10, seed=3)
    a = train_on_windows(tiny_weights(3), wins, wins[:2], cfg)
    b = train_on_windows(tiny_weights(3), wins, wins[:2], cfg)
    assert a.loss_curve == b.loss_curve
    assert a.val_curve == b.val_curve


def test_single_step_decreases_loss_at_small_lr():
    for seed in range(10):
        wins = make_windows(1, seed=seed)
        x, y = windows_to_arrays(wins)
        w = tiny_weights(seed=seed)
        before, grads = batch_loss_and_grads(w, x, y)
        cfg = TrainConfig(lr=1e-6, window=10)
        adam_step(w, grads, AdamState(w), cfg)
        after, _ = batch_loss_and_grads(w, x, y)
        assert after < before, f"seed {seed}: {after} >= {before}"


def test_batch_gradient_equals_mean_of_per_example_gradients():
    wins = make_windows(4, seed=5)
    x, y = windows_to_arrays(wins)
    w = tiny_weights(seed=5)
    _, batch_grads = batch_loss_and_grads(w, x, y)
    per = []
    for i in range(4):
        _, g = batch_loss_and_grads(w, x[i : i + 1], y[i : i + 1])
        per.append(g)
    for name in batch_grads:
        mean = sum(p[name] for p in per) / 4.0
        scale = np.abs(mean).max() + 1e-12
        assert np.abs(batch_grads[name] - mean).max() / scale < 1e-12, name


def test_overfit_four_windows():
    # wide enough to memorize 4 windows of unstructured targets
    cfg_m = TransformerConfig(
        d_model=32, layers=2, heads=4, ffn_hidden=64, conv_channels=32, conv_kernel=3, window=10
    )
    wins = make_windows(4, seed=7)
    cfg = TrainConfig(lr=2e-3, batch_size=4, max_steps=2000, eval_every=10**9, window=10, seed=7)
    result = train_on_windows(init_transformer(cfg_m, 7), wins, [], cfg)
    x, y = windows_to_arrays(wins)
    pred = predict(result.weights, x)
    rmse = float(np.sqrt(np.mean((pred - y) ** 2)))
    assert rmse < 1.0, rmse


def test_validation_best_selection():
    wins = make_windows(10, seed=9)
    cfg = TrainConfig(lr=2e-3, batch_size=5, max_steps=120, eval_every=20, window=10, seed=9)
    result = train_on_windows(tiny_weights(9), wins, wins[:3], cfg)
    assert result.val_curve
    best = min(r for _, r in result.val_curve)
    xv, yv = windows_to_arrays(wins[:3])
    pred = predict(result.weights, xv)
    got = float(np.sqrt(np.mean((pred - yv) ** 2)))
    assert got == pytest.approx(best, abs=1e-12)


def test_divergence_reports_step():
    # Adam is scale-invariant, so divergence needs an lr that overflows f64
    wins = make_windows(4, seed=11)
    cfg = TrainConfig(lr=1e200, batch_size=4, max_steps=10, eval_every=10**9, window=10, seed=11)
    with pytest.raises(TrainingDiverged) as exc:
        train_on_windows(tiny_weights(11), wins, [], cfg)
    assert exc.value.step == 1
    assert "step 1" in str(exc.value)


def test_presets():
    assert preset("desk", "transformer").batch_size == 32
    assert preset("desk", "cnn").batch_size == 8
    assert preset("paper", "transformer").lr == 5e-6
    assert preset("desk-loo", "cnn").max_steps < preset("desk", "cnn").max_steps
    with pytest.raises(ValueError):
        preset("warp", "transformer")


# ---------------------------------------------------------------------------
# Fine-tuning
# ---------------------------------------------------------------------------


def test_fine_tune_k0_returns_checkpoint_weights():
    w = tiny_weights(13)
    wins = make_windows(6, seed=13)
    cfg = TrainConfig(lr=1e-3, batch_size=3, max_steps=10, window=10, seed=13)
    result = fine_tune(w, wins, [], 0, cfg)
    for name, p in w.trainable():
        np.testing.assert_array_equal(result.weights.params[name].data, p.data)


def test_fine_tune_filters_exercises():
    w = tiny_weights(15)
    wins = make_windows(3, seed=15, exercise=EXERCISES[0]) + make_windows(
        3, seed=16, exercise=EXERCISES[5]
    )
    cfg = TrainConfig(lr=1e-3, batch_size=2, max_steps=5, eval_every=10**9, window=10, seed=15)
    r1 = fine_tune(w, wins, [], 1, cfg)  # only EXERCISES[0] windows
    only_first = [x for x in wins if x.exercise == EXERCISES[0]]
    r2 = train_on_windows(w, only_first, [], cfg)
    for name, _ in w.trainable():
        np.testing.assert_array_equal(r1.weights.params[name].data, r2.weights.params[name].data)


def test_fine_tune_k20_equals_train_from_checkpoint():
    w = tiny_weights(17)
    wins = make_windows(4, seed=17, exercise=EXERCISES[2])
    cfg = TrainConfig(lr=1e-3, batch_size=2, max_steps=6, eval_every=10**9, window=10, seed=17)
    r1 = fine_tune(w, wins, [], 20, cfg)
    r2 = train_on_windows(w, wins, [], cfg)
    for name, _ in w.trainable():
        np.testing.assert_array_equal(r1.weights.params[name].data, r2.weights.params[name].data)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def test_checkpoint_roundtrip_forward_bit_identical(tmp_path):
    w = tiny_weights(19)
    path = tmp_path / "m.miac"
    save_checkpoint(path, w)
    loaded = load_checkpoint(path).weights
    x = np.random.default_rng(19).uniform(size=(3, 10, 50))
    a = predict(loaded, x)
    # a second round-trip must be bit-exact at 32-bit
    path2 = tmp_path / "m2.miac"
    save_checkpoint(path2, loaded)
    again = load_checkpoint(path2).weights
    np.testing.assert_array_equal(a, predict(again, x))
    assert path2.read_bytes()[16:] == path.read_bytes()[16:]  # identical payloads


def test_checkpoint_roundtrip_with_adam_and_config(tmp_path):
    w = tiny_weights(21)
    state = AdamState(w)
    state.t = 7
    for name in state.m:
        state.m[name] += 0.125  # f32-exact values survive the round trip
    cfg = TrainConfig(lr=3e-4, window=10, seed=21)
    rng_state = np.random.default_rng(21).bit_generator.state
    path = tmp_path / "m.miac"
    save_checkpoint(path, w, adam=state, train_config=cfg, rng_state=rng_state)
    ck = load_checkpoint(path, for_resume=True)
    assert ck.adam.t == 7
    for name in state.m:
        np.testing.assert_array_equal(ck.adam.m[name], state.m[name])
    assert ck.train_config == cfg
    assert ck.rng_state == rng_state


def test_checkpoint_without_adam_refuses_resume(tmp_path):
    path = tmp_path / "m.miac"
    save_checkpoint(path, tiny_weights(23))
    load_checkpoint(path)  # inference load is fine
    with pytest.raises(CheckpointError, match="resume"):
        load_checkpoint(path, for_resume=True)


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "m.miac"
    save_checkpoint(path, tiny_weights(25))
    blob = bytearray(path.read_bytes())
    blob[:4] = b"NOPE"
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_checkpoint_truncated_payload(tmp_path):
    path = tmp_path / "m.miac"
    save_checkpoint(path, tiny_weights(27))
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) - 64])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)


def test_checkpoint_cnn_running_stats_roundtrip(tmp_path):
    from myograph.models import CnnConfig, init_cnn

    cfg = CnnConfig(channels=(1, 4, 6, 6, 4, 8), spatial_kernels=(11, 11, 11, 11, 10), window=6)
    w = init_cnn(cfg, seed=29)
    w.bn_stats["bn0"].mean += 0.5
    path = tmp_path / "c.miac"
    save_checkpoint(path, w)
    loaded = load_checkpoint(path).weights
    np.testing.assert_allclose(loaded.bn_stats["bn0"].mean, w.bn_stats["bn0"].mean, atol=1e-7)
    x = np.random.default_rng(29).uniform(size=(2, 6, 50))
    np.testing.assert_array_equal(predict(loaded, x), predict(load_checkpoint(path).weights, x))
