"""Preprocessing pipeline: zero-phase bandpass, polyphase resample, CAR+baseline.

The filter and resampler are scipy-backed infrastructure; the contracts
(4th-order Butterworth run forward-backward with reflect padding,
anti-alias cutoff at 0.45 x the output rate, output length
round(T0 * fs_out / fs)) are pinned by the tests.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy import signal as sps

from .data import Cohort, RawTrial, Subject, Trial

BAND_LO = 8.0
BAND_HI = 30.0
TARGET_FS = 250.0


def bandpass_filter(x: np.ndarray, fs: float, lo: float = BAND_LO,
                    hi: float = BAND_HI, order: int = 4) -> np.ndarray:
    """Zero-phase Butterworth bandpass along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    if not 0.0 < lo < hi < fs / 2.0:
        raise ValueError(f"band ({lo}, {hi}) Hz invalid for fs {fs}")
    if x.shape[-1] <= 3 * order:
        raise ValueError(
            f"trial length {x.shape[-1]} too short for order-{order} filtering")
    sos = sps.butter(order, [lo, hi], btype="bandpass", fs=fs, output="sos")
    return sps.sosfiltfilt(sos, x, axis=-1, padtype="even")


def resample(x: np.ndarray, fs_in: float, fs_out: float) -> np.ndarray:
    """Polyphase rational resampling along the last axis.

    Anti-alias FIR cutoff sits at 0.45 * fs_out; output length is
    round(T0 * fs_out / fs_in).
    """
    x = np.asarray(x, dtype=np.float64)
    if fs_out <= 0:
        raise ValueError(f"fs_out must be positive, got {fs_out}")
    if fs_out > fs_in:
        raise ValueError(f"upsampling ({fs_in} -> {fs_out}) not supported")
    if fs_out == fs_in:
        return x.copy()
    ratio = Fraction(fs_out) / Fraction(fs_in)
    frac = ratio.limit_denominator(1000)
    if abs(float(frac) - fs_out / fs_in) > 1e-9:
        raise ValueError(
            f"rate ratio {fs_out}/{fs_in} has no small rational form")
    up, down = frac.numerator, frac.denominator
    fs_up = fs_in * up
    ntaps = 2 * 10 * max(up, down) + 1
    # user-supplied coefficients bypass resample_poly's internal *up gain fix
    h = sps.firwin(ntaps, 0.45 * fs_out, fs=fs_up) * up
    out = sps.resample_poly(x, up, down, axis=-1, window=h)
    t_out = int(round(x.shape[-1] * fs_out / fs_in))
    if out.shape[-1] < t_out:
        raise ValueError(
            f"resampler produced {out.shape[-1]} samples, expected {t_out}")
    return out[..., :t_out]


def car_and_baseline(x: np.ndarray) -> np.ndarray:
    """Common-average re-reference, then per-channel mean removal.

    Operates on (..., C, T).  The trials stored here are cue-aligned with
    no pre-cue interval, so the baseline is the whole-trial mean.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-2] < 2:
        raise ValueError("CAR needs at least 2 channels")
    x = x - x.mean(axis=-2, keepdims=True)
    return x - x.mean(axis=-1, keepdims=True)


def preprocess_trial(raw: RawTrial, lo: float = BAND_LO, hi: float = BAND_HI,
                     fs_out: float = TARGET_FS) -> Trial:
    raw.validate()
    y = bandpass_filter(raw.samples, raw.fs, lo, hi)
    y = resample(y, raw.fs, fs_out)
    y = car_and_baseline(y)
    return Trial(samples=y, fs=fs_out, subject_id=raw.subject_id, label=raw.label)


def preprocess_cohort(raws: list[RawTrial], channels: list[str],
                      groups: dict[str, list[int]],
                      lo: float = BAND_LO, hi: float = BAND_HI,
                      fs_out: float = TARGET_FS) -> Cohort:
    """Run the full pipeline and assemble subjects in first-seen order.

    Trials of one subject are stacked and filtered as one batch; the
    per-channel operators make this identical to per-trial processing.
    """
    if not raws:
        raise ValueError("no trials to preprocess")
    by_subject: dict[str, list[RawTrial]] = {}
    for r in raws:
        r.validate()
        by_subject.setdefault(r.subject_id, []).append(r)
    subjects = []
    for sid, trials in by_subject.items():
        fs = trials[0].fs
        if any(t.fs != fs for t in trials):
            raise ValueError(f"subject {sid}: mixed sampling rates")
        stack = np.stack([t.samples for t in trials])
        y = bandpass_filter(stack, fs, lo, hi)
        y = resample(y, fs, fs_out)
        y = car_and_baseline(y)
        labels = np.array([t.label for t in trials], dtype=np.int64)
        subjects.append(Subject(subject_id=sid, trials=y, labels=labels))
    cohort = Cohort(fs=fs_out, channels=list(channels),
                    groups={k: list(v) for k, v in groups.items()},
                    subjects=subjects)
    cohort.validate()
    return cohort
