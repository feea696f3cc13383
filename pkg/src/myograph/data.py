"""Core domain types, sEMG normalization, windowing, splits, and clip file I/O.

The on-disk clip format is "MIA-JSONL v1": UTF-8 JSON Lines with a header
object on line 1 and one clip object per subsequent line (see
`save_dataset` / `load_dataset`).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

N_MUSCLES = 8
N_KEYPOINTS = 25
KEYPOINT_DIM = 2
FPS = 10
DEFAULT_WINDOW = 30
WINDOW_LENGTHS = (1, 5, 10, 15, 20, 25, 30)
FORMAT_NAME = "mia-jsonl"
FORMAT_VERSION = 1


class Muscle(enum.IntEnum):
    """The 8 recorded muscles, in the canonical channel order."""

    LeftBicep = 0
    RightBicep = 1
    LeftTricep = 2
    RightTricep = 3
    LeftQuad = 4
    RightQuad = 5
    LeftHamstring = 6
    RightHamstring = 7


class Exercise(enum.IntEnum):
    """The 20 exercises, in the canonical row/column order."""

    JumpingJack = 0
    HighKick = 1
    LegBack = 2
    FrontKick = 3
    FrontPunch = 4
    HookPunch = 5
    Pirouette = 6
    Skater = 7
    Twist = 8
    Squats = 9
    FeetCross = 10
    ElbowPunch = 11
    SideShuffle = 12
    Batting = 13
    SideLunge = 14
    Running = 15
    BallThrow = 16
    Bowling = 17
    KneeKick = 18
    Woodchop = 19


MUSCLES = tuple(Muscle)
EXERCISES = tuple(Exercise)


class DatasetFormatError(ValueError):
    """Malformed clip file; message carries the offending line number."""


def _check_keypoints(frames: np.ndarray, where: str) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 3 or frames.shape[1:] != (N_KEYPOINTS, KEYPOINT_DIM):
        raise ValueError(f"{where}: keypoints must be (T, 25, 2), got {frames.shape}")
    if frames.shape[0] < 1:
        raise ValueError(f"{where}: empty keypoint sequence")
    if not np.all(np.isfinite(frames)):
        raise ValueError(f"{where}: non-finite keypoint coordinates")
    if frames.min() < 0.0 or frames.max() > 1.0:
        raise ValueError(f"{where}: keypoints must be image-normalized to [0, 1]")
    return frames


@dataclass
class Clip:
    """One synchronized keypoint + raw sEMG recording at 10 fps."""

    clip_id: str
    subject_id: str
    exercise: Exercise
    keypoints: np.ndarray  # (T, 25, 2) in [0, 1]
    emg_raw: np.ndarray  # (T, 8) non-negative raw sensor values
    fps: int = FPS

    def __post_init__(self):
        self.keypoints = _check_keypoints(self.keypoints, f"clip {self.clip_id!r}")
        self.emg_raw = np.asarray(self.emg_raw, dtype=np.float64)
        if self.emg_raw.ndim != 2 or self.emg_raw.shape[1] != N_MUSCLES:
            raise ValueError(
                f"clip {self.clip_id!r}: emg_raw must be (T, 8), got {self.emg_raw.shape}"
            )
        if self.keypoints.shape[0] != self.emg_raw.shape[0]:
            raise ValueError(
                f"clip {self.clip_id!r}: keypoints T={self.keypoints.shape[0]} "
                f"!= emg T={self.emg_raw.shape[0]}"
            )
        if self.emg_raw.min() < 0:
            raise ValueError(f"clip {self.clip_id!r}: negative raw EMG value")
        if self.fps != FPS:
            raise ValueError(f"clip {self.clip_id!r}: fps must be {FPS}")

    @property
    def n_frames(self) -> int:
        return self.keypoints.shape[0]


@dataclass(frozen=True)
class NormStats:
    """Per-muscle (min, max) raw values fitted on a training split."""

    lo: np.ndarray  # (8,)
    hi: np.ndarray  # (8,)

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=np.float64))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=np.float64))
        if self.lo.shape != (N_MUSCLES,) or self.hi.shape != (N_MUSCLES,):
            raise ValueError("NormStats must hold 8 per-muscle (min, max) pairs")
        if not np.all(self.hi > self.lo):
            bad = [Muscle(i).name for i in np.flatnonzero(self.hi <= self.lo)]
            raise ValueError(f"NormStats: max must exceed min for every muscle; bad: {bad}")


def fit_normalizer(train_clips) -> NormStats:
    """Per-muscle raw min/max over all frames of all training clips."""
    clips = list(train_clips)
    if not clips:
        raise ValueError("fit_normalizer: need at least one clip")
    stacked = np.concatenate([c.emg_raw for c in clips], axis=0)
    lo = stacked.min(axis=0)
    hi = stacked.max(axis=0)
    flat = np.flatnonzero(hi <= lo)
    if flat.size:
        names = [Muscle(i).name for i in flat]
        raise ValueError(f"fit_normalizer: constant raw signal for {names}")
    return NormStats(lo, hi)


def normalize_emg(raw: np.ndarray, stats: NormStats) -> np.ndarray:
    """Map raw values to the [0, 100] scale, clamping out-of-range values."""
    raw = np.asarray(raw, dtype=np.float64)
    scaled = 100.0 * (raw - stats.lo) / (stats.hi - stats.lo)
    return np.clip(scaled, 0.0, 100.0)


@dataclass(frozen=True)
class Window:
    """A contiguous fixed-length slice of a clip; emg is on the normalized scale."""

    clip_id: str
    subject_id: str
    exercise: Exercise
    start: int
    keypoints: np.ndarray  # (T_w, 25, 2)
    emg: np.ndarray  # (T_w, 8)

    @property
    def length(self) -> int:
        return self.keypoints.shape[0]


def window_clip(clip: Clip, length: int, stride: int, stats: NormStats | None = None):
    """Slice a clip into windows starting at 0, stride, 2*stride, ...

    Returns floor((T - length)/stride) + 1 windows; an empty list if the clip
    is shorter than `length`. EMG is normalized when `stats` is given, raw
    otherwise.
    """
    if stride < 1:
        raise ValueError(f"window_clip: stride must be >= 1, got {stride}")
    if length < 1:
        raise ValueError(f"window_clip: length must be >= 1, got {length}")
    t = clip.n_frames
    if length > t:
        return []
    emg = normalize_emg(clip.emg_raw, stats) if stats is not None else clip.emg_raw
    out = []
    for start in range(0, t - length + 1, stride):
        out.append(
            Window(
                clip_id=clip.clip_id,
                subject_id=clip.subject_id,
                exercise=clip.exercise,
                start=start,
                keypoints=clip.keypoints[start : start + length],
                emg=emg[start : start + length],
            )
        )
    return out


@dataclass
class Dataset:
    """Clips plus their split assignment and the train-split normalizer."""

    clips: list[Clip]
    split: dict[str, str] = field(default_factory=dict)  # clip_id -> train|val|test
    norm_stats: NormStats | None = None

    def __post_init__(self):
        ids = [c.clip_id for c in self.clips]
        if len(set(ids)) != len(ids):
            raise ValueError("Dataset: duplicate clip_id")
        for cid, role in self.split.items():
            if role not in ("train", "val", "test"):
                raise ValueError(f"Dataset: unknown split role {role!r} for {cid!r}")

    def clips_in(self, role: str) -> list[Clip]:
        return [c for c in self.clips if self.split.get(c.clip_id) == role]

    def fit_norm_stats(self) -> NormStats:
        """Fit (and remember) the normalizer on the train split."""
        self.norm_stats = fit_normalizer(self.clips_in("train"))
        return self.norm_stats

    def windows(self, role: str, length: int = DEFAULT_WINDOW, stride: int | None = None):
        """Normalized windows for a split. Default stride: 5 for train, = length otherwise."""
        if self.norm_stats is None:
            self.fit_norm_stats()
        if stride is None:
            stride = 5 if role == "train" else length
        out = []
        for clip in self.clips_in(role):
            out.extend(window_clip(clip, length, stride, self.norm_stats))
        return out

    def subjects(self) -> list[str]:
        seen = dict.fromkeys(c.subject_id for c in self.clips)
        return list(seen)

    def filter_subject(self, subject_id: str) -> "Dataset":
        clips = [c for c in self.clips if c.subject_id == subject_id]
        split = {c.clip_id: self.split[c.clip_id] for c in clips if c.clip_id in self.split}
        out = Dataset(clips, split)
        out.fit_norm_stats()
        return out


def split_leave_one_exercise_out(dataset: Dataset, held_out: Exercise):
    """Partition all clips into (everything else, only the held-out exercise)."""
    test = [c for c in dataset.clips if c.exercise == held_out]
    if not test:
        raise ValueError(f"dataset has no clips for exercise {held_out.name}")
    train = [c for c in dataset.clips if c.exercise != held_out]
    return train, test


# ---------------------------------------------------------------------------
# MIA-JSONL v1
# ---------------------------------------------------------------------------


def save_dataset(dataset: Dataset, path) -> None:
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "fps": FPS,
        "muscles": [m.name for m in MUSCLES],
        "exercises": [e.name for e in EXERCISES],
    }
    if dataset.norm_stats is not None:
        header["norm_stats"] = {
            Muscle(i).name: [dataset.norm_stats.lo[i], dataset.norm_stats.hi[i]]
            for i in range(N_MUSCLES)
        }
    if dataset.split:
        header["split"] = {
            role: [c.clip_id for c in dataset.clips_in(role)]
            for role in ("train", "val", "test")
        }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for clip in dataset.clips:
            rec = {
                "clip_id": clip.clip_id,
                "subject_id": clip.subject_id,
                "exercise": clip.exercise.name,
                "keypoints": clip.keypoints.tolist(),
                "emg_raw": clip.emg_raw.tolist(),
            }
            fh.write(json.dumps(rec) + "\n")


def _fail(lineno: int, msg: str):
    raise DatasetFormatError(f"line {lineno}: {msg}")


def load_dataset(path) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError("line 1: empty file, missing header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        _fail(1, f"header is not valid JSON: {exc}")
    if header.get("format") != FORMAT_NAME:
        _fail(1, f"not a {FORMAT_NAME} file (format={header.get('format')!r})")
    if header.get("version") != FORMAT_VERSION:
        _fail(1, f"unsupported version {header.get('version')!r}, expected {FORMAT_VERSION}")
    if header.get("muscles") != [m.name for m in MUSCLES]:
        _fail(1, "muscle list does not match the canonical 8-muscle order")
    if header.get("exercises") != [e.name for e in EXERCISES]:
        _fail(1, "exercise list does not match the canonical 20-exercise order")

    names = {e.name: e for e in EXERCISES}
    clips = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            _fail(lineno, f"invalid JSON: {exc}")
        for key in ("clip_id", "subject_id", "exercise", "keypoints", "emg_raw"):
            if key not in rec:
                _fail(lineno, f"missing field {key!r}")
        if rec["exercise"] not in names:
            _fail(lineno, f"unknown exercise {rec['exercise']!r}")
        try:
            clip = Clip(
                clip_id=rec["clip_id"],
                subject_id=rec["subject_id"],
                exercise=names[rec["exercise"]],
                keypoints=np.asarray(rec["keypoints"], dtype=np.float64),
                emg_raw=np.asarray(rec["emg_raw"], dtype=np.float64),
            )
        except ValueError as exc:
            _fail(lineno, str(exc))
        clips.append(clip)

    split = {}
    for role, ids in header.get("split", {}).items():
        for cid in ids:
            split[cid] = role
    ds = Dataset(clips, split)
    if "norm_stats" in header:
        lo = np.array([header["norm_stats"][m.name][0] for m in MUSCLES])
        hi = np.array([header["norm_stats"][m.name][1] for m in MUSCLES])
        ds.norm_stats = NormStats(lo, hi)
    return ds


def save_split(split: dict[str, str], path) -> None:
    doc = {role: sorted(cid for cid, r in split.items() if r == role) for role in ("train", "val", "test")}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)


def load_split(path) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    out = {}
    for role in ("train", "val", "test"):
        for cid in doc.get(role, []):
            out[cid] = role
    return out
