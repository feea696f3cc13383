"""Pose-keypoint to surface-EMG regression at desk scale.

A synthetic motion-to-muscle corpus generator, a from-scratch autodiff
core, a temporal-conv + transformer regressor and a CNN baseline,
retrieval baselines, training, and the evaluation protocols (per-exercise
RMSE, leave-one-exercise-out, temporal ablation, subject transfer,
similarity matrices).
"""

__version__ = "0.1.0"

from .data import (  # noqa: F401
    Muscle,
    Exercise,
    MUSCLES,
    EXERCISES,
    Clip,
    NormStats,
    Window,
    Dataset,
    fit_normalizer,
    normalize_emg,
    window_clip,
    split_leave_one_exercise_out,
    load_dataset,
    save_dataset,
)
