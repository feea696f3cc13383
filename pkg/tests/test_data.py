import numpy as np
import pytest

from myograph.data import (
    Clip,
    Dataset,
    DatasetFormatError,
    Exercise,
    EXERCISES,
    Muscle,
    NormStats,
    fit_normalizer,
    load_dataset,
    load_split,
    normalize_emg,
    save_dataset,
    save_split,
    split_leave_one_exercise_out,
    window_clip,
)


def make_clip(clip_id="c0", subject="S1", exercise=Exercise.Squats, t=40, seed=0):
    rng = np.random.default_rng(seed)
    kp = rng.uniform(0.0, 1.0, size=(t, 25, 2))
    emg = rng.uniform(0.0, 20.0, size=(t, 8))
    return Clip(clip_id, subject, exercise, kp, emg)


def test_fit_normalizer_single_clip():
    clip = make_clip(t=3)
    clip.emg_raw[:, 0] = [0.2, 4.8, 1.0]
    stats = fit_normalizer([clip])
    assert stats.lo[0] == 0.2
    assert stats.hi[0] == 4.8


def test_fit_normalizer_two_clips_elementwise():
    a, b = make_clip("a", seed=1), make_clip("b", seed=2)
    stats = fit_normalizer([a, b])
    both = np.concatenate([a.emg_raw, b.emg_raw])
    np.testing.assert_array_equal(stats.lo, both.min(axis=0))
    np.testing.assert_array_equal(stats.hi, both.max(axis=0))


def test_fit_normalizer_rejects_constant_channel():
    clip = make_clip()
    clip.emg_raw[:, 3] = 7.0
    with pytest.raises(ValueError, match="RightTricep"):
        fit_normalizer([clip])


def test_normalize_endpoints_midpoint_clamp():
    stats = NormStats(lo=np.full(8, 2.0), hi=np.full(8, 6.0))
    raw = np.array([[2.0] * 8, [6.0] * 8, [4.0] * 8, [9.0] * 8])
    out = normalize_emg(raw, stats)
    np.testing.assert_array_equal(out[0], 0.0)
    np.testing.assert_array_equal(out[1], 100.0)
    np.testing.assert_array_equal(out[2], 50.0)
    np.testing.assert_array_equal(out[3], 100.0)  # above max -> clamped


def test_normalize_spans_full_scale_on_fit_split():
    clips = [make_clip(str(i), seed=i) for i in range(3)]
    stats = fit_normalizer(clips)
    normed = np.concatenate([normalize_emg(c.emg_raw, stats) for c in clips])
    np.testing.assert_allclose(normed.min(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(normed.max(axis=0), 100.0, atol=1e-12)


@pytest.mark.parametrize(
    "t,length,stride,expected",
    [(90, 30, 15, 5), (30, 30, 30, 1), (29, 30, 1, 0), (300, 30, 5, 55)],
)
def test_window_counts(t, length, stride, expected):
    clip = make_clip(t=t)
    assert len(window_clip(clip, length, stride)) == expected


def test_windows_stay_in_bounds_and_reconstruct_prefix():
    clip = make_clip(t=47)
    stats = fit_normalizer([clip])
    wins = window_clip(clip, 10, 10, stats)
    assert all(w.start + w.length <= clip.n_frames for w in wins)
    rebuilt = np.concatenate([w.keypoints for w in wins])
    np.testing.assert_array_equal(rebuilt, clip.keypoints[: len(rebuilt)])
    rebuilt_emg = np.concatenate([w.emg for w in wins])
    np.testing.assert_array_equal(
        rebuilt_emg, normalize_emg(clip.emg_raw, stats)[: len(rebuilt_emg)]
    )


def make_dataset():
    clips = []
    for i, ex in enumerate(EXERCISES):
        for rep in range(2):
            clips.append(make_clip(f"{ex.name}_{rep}", "S1", ex, t=35, seed=100 + 2 * i + rep))
    split = {c.clip_id: ("train" if c.clip_id.endswith("0") else "test") for c in clips}
    return Dataset(clips, split)


def test_leave_one_exercise_out_partition():
    ds = make_dataset()
    train, test = split_leave_one_exercise_out(ds, Exercise.JumpingJack)
    assert {c.exercise for c in test} == {Exercise.JumpingJack}
    assert Exercise.JumpingJack not in {c.exercise for c in train}
    assert len({c.exercise for c in train}) == 19
    all_ids = {c.clip_id for c in ds.clips}
    assert {c.clip_id for c in train} | {c.clip_id for c in test} == all_ids
    assert not ({c.clip_id for c in train} & {c.clip_id for c in test})


def test_leave_one_out_sweep_covers_each_clip_once():
    ds = make_dataset()
    seen = []
    for ex in EXERCISES:
        _, test = split_leave_one_exercise_out(ds, ex)
        seen.extend(c.clip_id for c in test)
    assert sorted(seen) == sorted(c.clip_id for c in ds.clips)


def test_leave_one_out_missing_exercise_rejected():
    ds = make_dataset()
    ds.clips = [c for c in ds.clips if c.exercise != Exercise.Twist]
    with pytest.raises(ValueError, match="Twist"):
        split_leave_one_exercise_out(ds, Exercise.Twist)


def test_dataset_roundtrip_lossless(tmp_path):
    ds = make_dataset()
    ds.fit_norm_stats()
    path = tmp_path / "corpus.jsonl"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert len(back.clips) == len(ds.clips)
    for a, b in zip(ds.clips, back.clips):
        assert a.clip_id == b.clip_id
        assert a.subject_id == b.subject_id
        assert a.exercise == b.exercise
        np.testing.assert_array_equal(a.keypoints, b.keypoints)
        np.testing.assert_array_equal(a.emg_raw, b.emg_raw)
    assert back.split == ds.split
    np.testing.assert_array_equal(back.norm_stats.lo, ds.norm_stats.lo)
    np.testing.assert_array_equal(back.norm_stats.hi, ds.norm_stats.hi)


def test_roundtrip_is_byte_stable(tmp_path):
    ds = make_dataset()
    ds.fit_norm_stats()
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_dataset(ds, p1)
    save_dataset(load_dataset(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_rejects_t_mismatch_with_line_number(tmp_path):
    ds = make_dataset()
    path = tmp_path / "corpus.jsonl"
    save_dataset(ds, path)
    lines = path.read_text().splitlines()
    import json

    rec = json.loads(lines[1])
    rec["emg_raw"] = rec["emg_raw"][:-1]
    lines[1] = json.dumps(rec)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError) as exc:
        load_dataset(path)
    assert "line 2" in str(exc.value)
    assert rec["clip_id"] in str(exc.value)


def test_load_rejects_unknown_exercise(tmp_path):
    ds = make_dataset()
    path = tmp_path / "corpus.jsonl"
    save_dataset(ds, path)
    text = path.read_text().replace('"exercise": "JumpingJack"', '"exercise": "Yoga"', 1)
    path.write_text(text)
    with pytest.raises(DatasetFormatError, match="Yoga"):
        load_dataset(path)


def test_load_rejects_version_mismatch(tmp_path):
    ds = make_dataset()
    path = tmp_path / "corpus.jsonl"
    save_dataset(ds, path)
    text = path.read_text().replace('"version": 1', '"version": 2', 1)
    path.write_text(text)
    with pytest.raises(DatasetFormatError, match="version"):
        load_dataset(path)


def test_split_file_roundtrip(tmp_path):
    ds = make_dataset()
    path = tmp_path / "split.json"
    save_split(ds.split, path)
    assert load_split(path) == ds.split


def test_clip_validates_t_mismatch():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="c9"):
        Clip("c9", "S1", Exercise.Twist, rng.uniform(size=(10, 25, 2)), rng.uniform(size=(9, 8)))


def test_muscle_and_exercise_vocabulary():
    assert [m.name for m in Muscle] == [
        "LeftBicep",
        "RightBicep",
        "LeftTricep",
        "RightTricep",
        "LeftQuad",
        "RightQuad",
        "LeftHamstring",
        "RightHamstring",
    ]
    assert len(EXERCISES) == 20
    assert EXERCISES[0].name == "JumpingJack" and EXERCISES[-1].name == "Woodchop"
