"""Trial and cohort data model shared by preprocessing, synthesis, and IO."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RawTrial:
    """One unprocessed trial: microvolt samples at the acquisition rate."""

    samples: np.ndarray        # (C, T0) float64
    fs: float
    subject_id: str
    label: int                 # 1..K
    channel_names: list[str] = field(default_factory=list)

    def validate(self) -> None:
        if self.samples.ndim != 2:
            raise ValueError(f"trial samples must be (C, T), got {self.samples.shape}")
        if self.samples.shape[0] < 2:
            raise ValueError("need at least 2 channels")
        if self.fs <= 60.0:
            raise ValueError(f"fs {self.fs} too low for an 8-30 Hz band")
        if self.label < 1:
            raise ValueError(f"labels are 1-based, got {self.label}")


@dataclass
class Trial:
    """One preprocessed trial at the model rate (250 Hz)."""

    samples: np.ndarray        # (C, T) float64
    fs: float
    subject_id: str
    label: int


@dataclass
class Subject:
    subject_id: str
    trials: np.ndarray         # (n_trials, C, T) float64
    labels: np.ndarray         # (n_trials,) int64, values 1..K


@dataclass
class Cohort:
    """The LOSO universe: preprocessed subjects plus montage metadata."""

    fs: float
    channels: list[str]
    groups: dict[str, list[int]]
    subjects: list[Subject]

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def n_samples(self) -> int:
        return self.subjects[0].trials.shape[-1]

    @property
    def n_classes(self) -> int:
        return int(max(int(s.labels.max()) for s in self.subjects))

    def subject_ids(self) -> list[str]:
        return [s.subject_id for s in self.subjects]

    def validate(self) -> None:
        if not self.subjects:
            raise ValueError("cohort has no subjects")
        c = self.n_channels
        t = self.n_samples
        seen = set()
        for s in self.subjects:
            if s.subject_id in seen:
                raise ValueError(f"duplicate subject id {s.subject_id!r}")
            seen.add(s.subject_id)
            if s.trials.ndim != 3:
                raise ValueError(
                    f"subject {s.subject_id}: trials must be 3-axis, got {s.trials.shape}")
            if s.trials.shape[1] != c:
                raise ValueError(
                    f"subject {s.subject_id}: {s.trials.shape[1]} channels in array, "
                    f"manifest declares {c}")
            if s.trials.shape[2] != t:
                raise ValueError(
                    f"subject {s.subject_id}: sample count {s.trials.shape[2]} != {t}")
            if s.labels.shape != (s.trials.shape[0],):
                raise ValueError(
                    f"subject {s.subject_id}: {len(s.labels)} labels for "
                    f"{s.trials.shape[0]} trials")
            if s.labels.size and int(s.labels.min()) < 1:
                raise ValueError(f"subject {s.subject_id}: labels must be 1-based")
        flat = [i for idx in self.groups.values() for i in idx]
        if len(set(flat)) != len(flat):
            raise ValueError("channel groups overlap")
        for name, idx in self.groups.items():
            if not idx:
                raise ValueError(f"channel group {name!r} is empty")
            if max(idx) >= c or min(idx) < 0:
                raise ValueError(f"channel group {name!r} indexes outside 0..{c - 1}")
