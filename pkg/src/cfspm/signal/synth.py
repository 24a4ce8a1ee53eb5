"""Synthetic stroke-MI cohort generator.

Each trial is 1/f^chi aperiodic background plus mu and beta oscillations
on two sensorimotor channel groups; the group contralateral to the
imagined hand is attenuated by a per-trial ERD factor.  Label 1 means
left hand (right group attenuated), label 2 right hand (left group
attenuated).  Everything derives from integer-seeded generators, so a
spec plus seed reproduces the cohort bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..numeric.fourier import irfft_array, n_rfft_bins, rfft_array
from .data import RawTrial

_DEFAULT_CHANNELS_6 = ["C3", "CP3", "C4", "CP4", "FZ", "PZ"]

# amplitudes relative to unit-RMS background
_MU_AMP = 1.5
_BETA_AMP = 0.75


@dataclass
class CohortSpec:
    subjects: int = 8
    trials_per_subject: int = 40
    channels: int = 6
    duration_s: float = 4.0
    fs: float = 500.0
    erd_range: tuple[float, float] = (0.4, 0.8)
    aperiodic_range: tuple[float, float] = (0.8, 1.6)
    mu_hz: float = 10.0
    beta_hz: float = 20.0
    noise_level: float = 0.5
    groups: dict[str, list[int]] = field(
        default_factory=lambda: {"left": [0, 1], "right": [2, 3]})
    seed: int = 0

    def validate(self) -> None:
        if self.subjects < 1 or self.trials_per_subject < 2:
            raise ValueError("need at least 1 subject and 2 trials per subject")
        if self.trials_per_subject % 2 != 0:
            raise ValueError("trials_per_subject must be even for balanced classes")
        if self.channels < 2:
            raise ValueError("need at least 2 channels")
        if not (0.0 < self.erd_range[0] <= self.erd_range[1] < 1.0):
            raise ValueError(f"erd_range {self.erd_range} must sit inside (0, 1)")
        if self.fs <= 4 * self.beta_hz:
            raise ValueError("fs too low for the beta rhythm")
        if set(self.groups.keys()) != {"left", "right"}:
            raise ValueError("groups must name exactly 'left' and 'right'")
        flat = self.groups["left"] + self.groups["right"]
        if len(set(flat)) != len(flat):
            raise ValueError("left/right groups overlap")
        if flat and (max(flat) >= self.channels or min(flat) < 0):
            raise ValueError("group index outside channel range")
        if not self.groups["left"] or not self.groups["right"]:
            raise ValueError("both channel groups must be non-empty")

    def channel_names(self) -> list[str]:
        if self.channels == 6:
            return list(_DEFAULT_CHANNELS_6)
        return [f"CH{i + 1}" for i in range(self.channels)]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CohortSpec":
        raw = json.loads(text)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown cohort spec fields: {sorted(unknown)}")
        if "erd_range" in raw:
            raw["erd_range"] = tuple(raw["erd_range"])
        if "aperiodic_range" in raw:
            raw["aperiodic_range"] = tuple(raw["aperiodic_range"])
        spec = cls(**raw)
        spec.validate()
        return spec


def _aperiodic_background(rng: np.random.Generator, channels: int,
                          n_samples: int, fs: float, chi: float) -> np.ndarray:
    """Spectrally shaped white noise with a 1/f^chi magnitude profile."""
    n_fft = 1 << (n_samples - 1).bit_length()  # power of two keeps this fast
    white = rng.standard_normal((channels, n_fft))
    freqs = np.arange(n_rfft_bins(n_fft)) * fs / n_fft
    shaping = (1.0 / np.maximum(freqs, 1.0)) ** (chi / 2.0)
    shaping[0] = 0.0
    bg = irfft_array(rfft_array(white) * shaping, n_fft)[:, :n_samples]
    return bg / bg.std(axis=-1, keepdims=True)


def synthesize_cohort(spec: CohortSpec) -> list[RawTrial]:
    spec.validate()
    n_samples = int(round(spec.duration_s * spec.fs))
    t = np.arange(n_samples) / spec.fs
    names = spec.channel_names()
    group_of_label = {1: "right", 2: "left"}  # contralateral attenuation
    trials: list[RawTrial] = []

    for s in range(spec.subjects):
        rng_subject = np.random.default_rng([spec.seed, 101, s])
        chi = rng_subject.uniform(*spec.aperiodic_range)
        gain = rng_subject.uniform(0.7, 1.3)
        # individual rhythm frequencies vary widely between people; this is
        # the main cross-subject shift the decoder has to absorb
        f_mu = spec.mu_hz + rng_subject.uniform(-2.5, 2.5)
        f_beta = spec.beta_hz + rng_subject.uniform(-4.0, 4.0)
        half = spec.trials_per_subject // 2
        labels = rng_subject.permutation(
            np.array([1] * half + [2] * half, dtype=np.int64))
        subject_id = f"s{s + 1:02d}"

        for j, label in enumerate(labels):
            rng_trial = np.random.default_rng([spec.seed, 202, s, j])
            x = _aperiodic_background(rng_trial, spec.channels, n_samples,
                                      spec.fs, chi)
            erd = rng_trial.uniform(*spec.erd_range)
            mu_amp = _MU_AMP * rng_trial.uniform(0.9, 1.1)
            beta_amp = _BETA_AMP * rng_trial.uniform(0.9, 1.1)
            attenuated = group_of_label[int(label)]
            for gname in ("left", "right"):
                factor = erd if gname == attenuated else 1.0
                for c in spec.groups[gname]:
                    ph_mu = rng_trial.uniform(0.0, 2.0 * np.pi)
                    ph_beta = rng_trial.uniform(0.0, 2.0 * np.pi)
                    x[c] += factor * mu_amp * np.sin(2 * np.pi * f_mu * t + ph_mu)
                    x[c] += factor * beta_amp * np.sin(2 * np.pi * f_beta * t + ph_beta)
            x += spec.noise_level * rng_trial.standard_normal(x.shape)
            trials.append(RawTrial(samples=gain * x, fs=spec.fs,
                                   subject_id=subject_id, label=int(label),
                                   channel_names=names))
    return trials
