"""Preprocessing, synthetic cohort generation, and container IO."""

from .data import Cohort, RawTrial, Subject, Trial
from .preprocess import (
    BAND_HI,
    BAND_LO,
    TARGET_FS,
    bandpass_filter,
    car_and_baseline,
    preprocess_cohort,
    preprocess_trial,
    resample,
)
from .synth import CohortSpec, synthesize_cohort
from .container import load_cohort, read_tensor, save_cohort, write_tensor

__all__ = [
    "BAND_HI",
    "BAND_LO",
    "Cohort",
    "CohortSpec",
    "RawTrial",
    "Subject",
    "TARGET_FS",
    "Trial",
    "bandpass_filter",
    "car_and_baseline",
    "load_cohort",
    "preprocess_cohort",
    "preprocess_trial",
    "read_tensor",
    "resample",
    "save_cohort",
    "synthesize_cohort",
    "write_tensor",
]
