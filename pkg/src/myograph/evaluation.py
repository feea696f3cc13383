"""Measurement protocols: per-exercise RMSE, leave-one-exercise-out,
temporal ablation, subject transfer, and retrieval similarity matrices.

Every protocol is a deterministic function of (dataset, config, seed);
sweep retrainings are independent, so they parallelize across processes
without changing any number.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np

from .baselines import (
    RetrievalIndex,
    build_index,
    nn_baseline_batch,
    nn_retrieve,
    random_baseline_batch,
)
from .data import Dataset, EXERCISES, Exercise, Window, split_leave_one_exercise_out, window_clip
from .models import ModelWeights, TRANSFORMER, CNN, predict_windows, transformer_embed, windows_to_arrays
from .tensor import Tensor
from .training import TrainConfig, preset, train, train_on_windows, fine_tune

LEARNING_METHODS = (TRANSFORMER, CNN)
ALL_METHODS = ("random", "nn", CNN, TRANSFORMER)
REPRESENTATIONS = ("pose", "predicted-emg", "embedding")


def rmse(pred: np.ndarray, gt: np.ndarray) -> float:
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"rmse: shapes differ: {pred.shape} vs {gt.shape}")
    return float(np.sqrt(np.mean((pred - gt) ** 2)))


@dataclass
class RmseColumn:
    """Per-exercise RMSE for one (method, protocol); Mean is unweighted."""

    method: str
    protocol: str  # "in-distribution" or "out-of-distribution"
    values: dict[Exercise, float] = field(default_factory=dict)
    flagged: list[Exercise] = field(default_factory=list)  # no windows, omitted

    @property
    def mean(self) -> float:
        return float(np.mean(list(self.values.values())))


def per_exercise_rmse(predict_fn, windows: list[Window], method: str = "", protocol: str = "in-distribution") -> RmseColumn:
    col = RmseColumn(method=method, protocol=protocol)
    by_ex: dict[Exercise, list[Window]] = {}
    for w in windows:
        by_ex.setdefault(w.exercise, []).append(w)
    for ex in EXERCISES:
        group = by_ex.get(ex)
        if not group:
            col.flagged.append(ex)
            continue
        preds = predict_fn(group)
        gts = np.stack([w.emg for w in group])
        col.values[ex] = rmse(preds, gts)
    return col


def make_predictor(method: str, weights: ModelWeights | None = None, index=None, seed: int = 0):
    """Uniform callable(list[Window]) -> (N, T, 8) for all four methods."""
    if method in LEARNING_METHODS:
        if weights is None:
            raise ValueError(f"{method} predictor needs weights")
        return lambda wins: predict_windows(weights, wins)
    if method == "nn":
        if index is None:
            raise ValueError("nn predictor needs an index")
        return lambda wins: nn_baseline_batch(wins, index)
    if method == "random":
        if index is None:
            raise ValueError("random predictor needs an index")
        return lambda wins: random_baseline_batch(wins, index, seed)
    raise ValueError(f"unknown method {method!r}")


def evaluate_split(
    method: str,
    dataset: Dataset,
    config: TrainConfig,
    weights: ModelWeights | None = None,
    split: str = "test",
) -> tuple[RmseColumn, ModelWeights | None]:
    """Train if needed, then produce the per-exercise column on a split."""
    test_windows = dataset.windows(split, config.window)
    if method in LEARNING_METHODS:
        if weights is None:
            weights = train(method, dataset, config).weights
        predictor = make_predictor(method, weights=weights)
    else:
        index = build_index(dataset.windows("train", config.window, config.train_stride))
        predictor = make_predictor(method, index=index, seed=config.seed)
    return per_exercise_rmse(predictor, test_windows, method=method), weights


# ---------------------------------------------------------------------------
# Leave-one-exercise-out
# ---------------------------------------------------------------------------

_WORKER_DATASET: Dataset | None = None


def _set_worker_dataset(dataset: Dataset) -> None:
    global _WORKER_DATASET
    _WORKER_DATASET = dataset


def reduced_dataset(dataset: Dataset, held_out: Exercise) -> tuple[Dataset, list]:
    """The 19-exercise training dataset and the held-out exercise's clips.

    Remaining exercises keep their train/val roles (their test clips fold
    into train); the held-out exercise is later evaluated over all its
    clips at non-overlapping stride, normalized by the reduced train split.
    """
    train_clips, held_clips = split_leave_one_exercise_out(dataset, held_out)
    split = {}
    for c in train_clips:
        role = dataset.split.get(c.clip_id, "train")
        split[c.clip_id] = "train" if role == "test" else role
    sub = Dataset(train_clips, split)
    sub.fit_norm_stats()
    return sub, held_clips


def _loo_single(args):
    method, exercise_idx, config = args
    dataset = _WORKER_DATASET
    exercise = Exercise(exercise_idx)
    sub, held_clips = reduced_dataset(dataset, exercise)
    held_windows = []
    for clip in held_clips:
        held_windows.extend(window_clip(clip, config.window, config.window, sub.norm_stats))
    if method in LEARNING_METHODS:
        result = train(method, sub, config)
        predictor = make_predictor(method, weights=result.weights)
    elif method == "nn":
        index = build_index(sub.windows("train", config.window, config.train_stride))
        predictor = make_predictor("nn", index=index)
    else:
        raise ValueError(
            "random baseline cannot run leave-one-exercise-out: it needs same-exercise windows"
        )
    preds = predictor(held_windows)
    gts = np.stack([w.emg for w in held_windows])
    return exercise_idx, rmse(preds, gts)


def leave_one_out_sweep(
    dataset: Dataset, method: str, config: TrainConfig, jobs: int = 1
) -> RmseColumn:
    tasks = [(method, int(ex), config) for ex in EXERCISES]
    col = RmseColumn(method=method, protocol="out-of-distribution")
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=jobs, initializer=_set_worker_dataset, initargs=(dataset,)
        ) as pool:
            for ex_idx, value in pool.map(_loo_single, tasks):
                col.values[Exercise(ex_idx)] = value
    else:
        _set_worker_dataset(dataset)
        for task in tasks:
            ex_idx, value = _loo_single(task)
            col.values[Exercise(ex_idx)] = value
    col.values = {ex: col.values[ex] for ex in EXERCISES}
    return col


# ---------------------------------------------------------------------------
# Temporal ablation
# ---------------------------------------------------------------------------


@dataclass
class TemporalTable:
    lengths: tuple[int, ...]
    values: dict[str, dict[int, float]]  # method -> length -> mean RMSE

    def label(self, length: int) -> str:
        return f"{length / 10.0:.1f}"


def _temporal_single(args):
    method, length, preset_name, seed = args
    dataset = _WORKER_DATASET
    config = preset(preset_name, method if method in LEARNING_METHODS else TRANSFORMER, seed=seed, window=length)
    col, _ = evaluate_split(method, dataset, config)
    return method, length, col.mean


def temporal_sweep(
    dataset: Dataset,
    methods: tuple[str, ...] = ("nn", CNN, TRANSFORMER),
    lengths: tuple[int, ...] = (1, 5, 10, 15, 20, 25, 30),
    preset_name: str = "desk-loo",
    seed: int = 0,
    jobs: int = 1,
) -> TemporalTable:
    tasks = [(m, length, preset_name, seed) for m in methods for length in lengths]
    table = TemporalTable(lengths=tuple(lengths), values={m: {} for m in methods})
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=jobs, initializer=_set_worker_dataset, initargs=(dataset,)
        ) as pool:
            for method, length, value in pool.map(_temporal_single, tasks):
                table.values[method][length] = value
    else:
        _set_worker_dataset(dataset)
        for task in tasks:
            method, length, value = _temporal_single(task)
            table.values[method][length] = value
    return table


# ---------------------------------------------------------------------------
# Subject transfer
# ---------------------------------------------------------------------------


@dataclass
class TransferCurve:
    k_grid: tuple[int, ...]
    fine_tuned: dict[int, float] = field(default_factory=dict)
    from_scratch: dict[int, float] = field(default_factory=dict)


def transfer_sweep(
    dataset: Dataset,
    subject_a: str,
    subject_b: str,
    k_grid: tuple[int, ...] = (4, 8, 12, 16, 20),
    pretrain_config: TrainConfig | None = None,
    tune_config: TrainConfig | None = None,
    pretrained: ModelWeights | None = None,
) -> tuple[TransferCurve, ModelWeights]:
    """Fine-tune-from-A vs from-scratch on B's first-k-exercise data.

    Both conditions are evaluated on B's full test split (mean of the
    per-exercise RMSEs over all 20 exercises).
    """
    pretrain_config = pretrain_config or preset("desk", TRANSFORMER)
    tune_config = tune_config or preset("desk-transfer", TRANSFORMER)
    ds_a = dataset.filter_subject(subject_a)
    ds_b = dataset.filter_subject(subject_b)
    if pretrained is None:
        pretrained = train(TRANSFORMER, ds_a, pretrain_config).weights
    b_train = ds_b.windows("train", tune_config.window, tune_config.train_stride)
    b_val = ds_b.windows("val", tune_config.window)
    b_test = ds_b.windows("test", tune_config.window)

    curve = TransferCurve(k_grid=tuple(k_grid))
    for k in k_grid:
        allowed = set(EXERCISES[:k])
        ft = fine_tune(pretrained, b_train, b_val, k, tune_config).weights
        curve.fine_tuned[k] = per_exercise_rmse(make_predictor(TRANSFORMER, weights=ft), b_test).mean
        sub_train = [w for w in b_train if w.exercise in allowed]
        sub_val = [w for w in b_val if w.exercise in allowed]
        if sub_train:
            scratch = train_on_windows(TRANSFORMER, sub_train, sub_val, tune_config).weights
            curve.from_scratch[k] = per_exercise_rmse(
                make_predictor(TRANSFORMER, weights=scratch), b_test
            ).mean
        else:
            curve.from_scratch[k] = float("nan")
    return curve, pretrained


# ---------------------------------------------------------------------------
# Similarity matrices and seriation
# ---------------------------------------------------------------------------


@dataclass
class SimilarityMatrix:
    """Row-stochastic 20x20 retrieval-frequency matrix in canonical order."""

    representation: str
    matrix: np.ndarray  # (20, 20)

    def __post_init__(self):
        if self.matrix.shape != (len(EXERCISES), len(EXERCISES)):
            raise ValueError(f"similarity matrix must be 20x20, got {self.matrix.shape}")

    def row_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=1)


def _vectors(representation: str, windows: list[Window], weights: ModelWeights | None):
    if representation == "pose":
        return np.stack([w.keypoints.reshape(-1) for w in windows])
    if representation == "true-emg":  # diagnostic: retrieval in ground-truth EMG space
        return np.stack([w.emg.reshape(-1) for w in windows])
    if representation == "predicted-emg":
        if weights is None:
            raise ValueError("predicted-emg representation needs trained weights")
        return predict_windows(weights, windows).reshape(len(windows), -1)
    if representation == "embedding":
        if weights is None:
            raise ValueError("embedding representation needs trained weights")
        x, _ = windows_to_arrays(windows)
        outs = []
        for at in range(0, len(windows), 128):
            outs.append(transformer_embed(weights, Tensor(x[at : at + 128])))
        return np.concatenate(outs).reshape(len(windows), -1)
    raise ValueError(f"unknown representation {representation!r}; pick from {REPRESENTATIONS}")


def similarity_matrix(
    representation: str,
    test_windows: list[Window],
    index_windows: list[Window],
    weights: ModelWeights | None = None,
) -> SimilarityMatrix:
    """Retrieval frequencies: cell (r, c) = fraction of exercise-r queries
    whose MSE-nearest index window (same-clip windows excluded) is exercise c."""
    if not test_windows or not index_windows:
        raise ValueError("similarity_matrix: empty windows")
    base = build_index(index_windows)
    # retrieval runs in the chosen representation space; reuse the index
    # machinery with its vectors swapped out
    index = RetrievalIndex(
        keypoints=_vectors(representation, index_windows, weights),
        emg=base.emg,
        exercises=base.exercises,
        clip_ids=base.clip_ids,
        starts=base.starts,
        window=base.window,
    )
    queries = _vectors(representation, test_windows, weights)
    picks = nn_retrieve(queries, index, exclude_clip=[w.clip_id for w in test_windows])
    n = len(EXERCISES)
    counts = np.zeros((n, n))
    for w, j in zip(test_windows, picks):
        counts[int(w.exercise), int(index.exercises[j])] += 1
    rows = counts.sum(axis=1)
    empty = [EXERCISES[i].name for i in np.flatnonzero(rows == 0)]
    if empty:
        raise ValueError(f"similarity_matrix: no queries for {empty}")
    return SimilarityMatrix(representation, counts / rows[:, None])


def seriate_indices(matrix: np.ndarray) -> list[int]:
    """Greedy chaining that concentrates retrieval mass near the diagonal.

    Start from the row with the largest off-diagonal affinity; repeatedly
    append the unplaced row most affine to the last placed one. Ties break
    toward the original order, so an identity matrix returns it exactly.
    """
    n = matrix.shape[0]
    if matrix.shape != (n, n):
        raise ValueError(f"seriate: need a square matrix, got {matrix.shape}")
    affinity = (matrix + matrix.T) / 2.0
    off = affinity.copy()
    np.fill_diagonal(off, 0.0)
    totals = off.sum(axis=1)
    start = int(np.argmax(totals))  # argmax takes the first (canonical) maximum
    order = [start]
    remaining = [i for i in range(n) if i != start]
    while remaining:
        last = order[-1]
        best = max(remaining, key=lambda j: (off[last, j], -j))
        order.append(best)
        remaining.remove(best)
    return order


def seriate(matrix: np.ndarray) -> list[Exercise]:
    if matrix.shape != (len(EXERCISES), len(EXERCISES)):
        raise ValueError(f"seriate: need 20x20, got {matrix.shape}")
    return [EXERCISES[i] for i in seriate_indices(matrix)]


def band_mass(matrix: np.ndarray, order: list[Exercise] | None = None, bandwidth: int = 1) -> float:
    """Sum of reordered-matrix entries within `bandwidth` of the diagonal."""
    idx = [int(e) for e in order] if order is not None else list(range(matrix.shape[0]))
    m = matrix[np.ix_(idx, idx)]
    n = m.shape[0]
    mask = np.abs(np.subtract.outer(np.arange(n), np.arange(n))) <= bandwidth
    return float(m[mask].sum())


def uniform_band_mass(n: int = len(EXERCISES), bandwidth: int = 1) -> float:
    mask = np.abs(np.subtract.outer(np.arange(n), np.arange(n))) <= bandwidth
    return float(mask.sum()) / n
