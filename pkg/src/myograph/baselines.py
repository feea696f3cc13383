"""Non-learned baselines: random same-exercise retrieval and nearest neighbor.

The NN distance is plain mean squared error over the flattened window
keypoints (no centering, no alignment), so it is translation-sensitive by
construction. Ties break deterministically by (clip_id, start), making
results independent of index insertion order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Exercise, Window


@dataclass
class RetrievalIndex:
    """Training windows flattened for retrieval; immutable after build."""

    keypoints: np.ndarray  # (N, T_w*50)
    emg: np.ndarray  # (N, T_w, 8)
    exercises: np.ndarray  # (N,) int
    clip_ids: list[str]
    starts: np.ndarray  # (N,)
    window: int

    def __len__(self) -> int:
        return len(self.clip_ids)


def build_index(windows: list[Window]) -> RetrievalIndex:
    if not windows:
        raise ValueError("build_index: no windows")
    lengths = {w.length for w in windows}
    if len(lengths) != 1:
        raise ValueError(f"build_index: mixed window lengths {sorted(lengths)}")
    (t,) = lengths
    return RetrievalIndex(
        keypoints=np.stack([w.keypoints.reshape(-1) for w in windows]),
        emg=np.stack([w.emg for w in windows]),
        exercises=np.array([int(w.exercise) for w in windows]),
        clip_ids=[w.clip_id for w in windows],
        starts=np.array([w.start for w in windows]),
        window=t,
    )


def random_baseline(window: Window, index: RetrievalIndex, rng: np.random.Generator) -> np.ndarray:
    """EMG of a uniformly random same-exercise training window."""
    candidates = np.flatnonzero(index.exercises == int(window.exercise))
    if candidates.size == 0:
        raise ValueError(f"random_baseline: no training window for exercise {window.exercise.name}")
    choice = candidates[int(rng.integers(candidates.size))]
    return index.emg[choice]


def _sq_distances(queries: np.ndarray, index: RetrievalIndex) -> np.ndarray:
    """(Q, N) squared euclidean distances over flattened keypoints."""
    q2 = (queries * queries).sum(axis=1)[:, None]
    i2 = (index.keypoints * index.keypoints).sum(axis=1)[None, :]
    d = q2 + i2 - 2.0 * (queries @ index.keypoints.T)
    return np.maximum(d, 0.0)


def _tie_break(index: RetrievalIndex, candidates: np.ndarray) -> int:
    best = min(candidates, key=lambda j: (index.clip_ids[j], int(index.starts[j])))
    return int(best)


def nn_retrieve(
    queries: np.ndarray, index: RetrievalIndex, exclude_clip: list[str] | None = None
) -> np.ndarray:
    """Indices of the MSE-nearest index window per query row.

    `queries` is (Q, T_w*50); `exclude_clip[i]`, when given, drops every
    index window from that clip for query i (self-retrieval guard).
    """
    d = _sq_distances(queries, index)
    if exclude_clip is not None:
        ids = np.array(index.clip_ids)
        for i, cid in enumerate(exclude_clip):
            if cid is not None:
                masked = ids == cid
                if masked.all():
                    raise ValueError(f"nn_retrieve: excluding clip {cid!r} empties the index")
                d[i, masked] = np.inf
    out = np.empty(d.shape[0], dtype=np.int64)
    for i in range(d.shape[0]):
        row = d[i]
        m = row.min()
        candidates = np.flatnonzero(row == m)
        out[i] = candidates[0] if candidates.size == 1 else _tie_break(index, candidates)
    return out


def nn_baseline(window: Window, index: RetrievalIndex) -> np.ndarray:
    """EMG of the training window with the lowest keypoint MSE (all exercises)."""
    q = window.keypoints.reshape(1, -1)
    if q.shape[1] != index.keypoints.shape[1]:
        raise ValueError(
            f"nn_baseline: query length {window.length} does not match index window {index.window}"
        )
    j = nn_retrieve(q, index)[0]
    return index.emg[j]


def nn_baseline_batch(windows: list[Window], index: RetrievalIndex) -> np.ndarray:
    queries = np.stack([w.keypoints.reshape(-1) for w in windows])
    picks = nn_retrieve(queries, index)
    return index.emg[picks]


def random_baseline_batch(
    windows: list[Window], index: RetrievalIndex, seed: int
) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(0x8A9D, seed)))
    return np.stack([random_baseline(w, index, rng) for w in windows])
