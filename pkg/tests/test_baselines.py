import numpy as np
import pytest

from myograph.baselines import (
    RetrievalIndex,
    build_index,
    nn_baseline,
    nn_baseline_batch,
    nn_retrieve,
    random_baseline,
)
from myograph.data import Exercise, Window


def make_window(clip_id, exercise, seed, t=6, start=0, keypoints=None):
    rng = np.random.default_rng(seed)
    kp = keypoints if keypoints is not None else rng.uniform(0, 1, size=(t, 25, 2))
    return Window(clip_id, "S1", exercise, start, kp, rng.uniform(0, 50, size=(t, 8)))


def test_random_baseline_forced_choice():
    w = make_window("idx0", Exercise.Squats, 0)
    index = build_index([w])
    q = make_window("q", Exercise.Squats, 1)
    rng = np.random.default_rng(0)
    for _ in range(5):
        np.testing.assert_array_equal(random_baseline(q, index, rng), w.emg)


def test_random_baseline_uniform_over_candidates():
    wins = [make_window(f"c{i}", Exercise.Twist, i) for i in range(4)]
    wins.append(make_window("other", Exercise.Squats, 99))
    index = build_index(wins)
    q = make_window("q", Exercise.Twist, 7)
    rng = np.random.default_rng(123)
    counts = np.zeros(4)
    firsts = np.stack([w.emg[0] for w in wins[:4]])
    for _ in range(10_000):
        emg = random_baseline(q, index, rng)
        counts[np.argmin(np.abs(firsts - emg[0]).sum(axis=1))] += 1
    assert np.all(np.abs(counts - 2500) <= 200), counts


def test_random_baseline_empty_bucket_rejected():
    index = build_index([make_window("a", Exercise.Squats, 0)])
    q = make_window("q", Exercise.Twist, 1)
    with pytest.raises(ValueError, match="Twist"):
        random_baseline(q, index, np.random.default_rng(0))


def test_nn_exact_copy_retrieved():
    wins = [make_window(f"c{i}", Exercise.Squats, i) for i in range(5)]
    index = build_index(wins)
    q = Window("q", "S1", wins[3].exercise, 0, wins[3].keypoints, np.zeros((6, 8)))
    np.testing.assert_array_equal(nn_baseline(q, index), wins[3].emg)


def test_nn_two_element_ordering():
    base = np.full((6, 25, 2), 0.5)
    near = make_window("near", Exercise.Squats, 0, keypoints=np.clip(base + 0.01, 0, 1))
    far = make_window("far", Exercise.Twist, 1, keypoints=np.clip(base + 0.02, 0, 1))
    q = make_window("q", Exercise.Squats, 2, keypoints=base)
    index = build_index([far, near])  # insertion order must not matter
    np.testing.assert_array_equal(nn_baseline(q, index), near.emg)


def test_nn_searches_across_exercises():
    # unlike the random baseline, NN ignores the query's exercise label
    other = make_window("o", Exercise.Twist, 3)
    same = make_window("s", Exercise.Squats, 4)
    q = Window("q", "S1", Exercise.Squats, 0, other.keypoints, np.zeros((6, 8)))
    index = build_index([same, other])
    np.testing.assert_array_equal(nn_baseline(q, index), other.emg)


def test_nn_matches_bruteforce_scan_on_200_windows():
    rng = np.random.default_rng(42)
    wins = [make_window(f"c{i}", Exercise(i % 20), 100 + i) for i in range(200)]
    index = build_index(wins)
    queries = [make_window(f"q{i}", Exercise.Squats, 300 + i) for i in range(25)]
    got = nn_baseline_batch(queries, index)
    for qi, q in enumerate(queries):
        qflat = q.keypoints.reshape(-1)
        dists = [np.mean((qflat - w.keypoints.reshape(-1)) ** 2) for w in wins]
        best = int(np.argmin(dists))
        np.testing.assert_array_equal(got[qi], wins[best].emg)
    del rng


def test_nn_tie_break_is_insertion_order_invariant():
    kp = np.full((6, 25, 2), 0.4)
    twins = [
        make_window("b_clip", Exercise.Squats, 0, keypoints=kp, start=5),
        make_window("a_clip", Exercise.Twist, 1, keypoints=kp, start=9),
        make_window("a_clip", Exercise.Twist, 2, keypoints=kp, start=2),
    ]
    q = make_window("q", Exercise.Squats, 3, keypoints=kp)
    for order in ([0, 1, 2], [2, 1, 0], [1, 2, 0]):
        index = build_index([twins[i] for i in order])
        got = nn_baseline(q, index)
        np.testing.assert_array_equal(got, twins[2].emg)  # a_clip, start 2


def test_nn_translation_sensitivity():
    a = make_window("a", Exercise.Squats, 0, keypoints=np.full((6, 25, 2), 0.30))
    b = make_window("b", Exercise.Twist, 1, keypoints=np.full((6, 25, 2), 0.60))
    index = build_index([a, b])
    q1 = make_window("q", Exercise.Squats, 2, keypoints=np.full((6, 25, 2), 0.40))
    q2 = make_window("q", Exercise.Squats, 3, keypoints=np.full((6, 25, 2), 0.52))
    np.testing.assert_array_equal(nn_baseline(q1, index), a.emg)
    np.testing.assert_array_equal(nn_baseline(q2, index), b.emg)


def test_nn_retrieve_exclusion_guard():
    wins = [make_window("only", Exercise.Squats, 0)]
    index = build_index(wins)
    q = wins[0].keypoints.reshape(1, -1)
    with pytest.raises(ValueError, match="empties the index"):
        nn_retrieve(q, index, exclude_clip=["only"])


def test_build_index_rejects_mixed_lengths():
    with pytest.raises(ValueError, match="mixed"):
        build_index([make_window("a", Exercise.Squats, 0, t=6), make_window("b", Exercise.Squats, 1, t=8)])


def test_index_window_length_guard():
    index = build_index([make_window("a", Exercise.Squats, 0, t=6)])
    q = make_window("q", Exercise.Squats, 1, t=8)
    with pytest.raises(ValueError, match="does not match"):
        nn_baseline(q, index)
