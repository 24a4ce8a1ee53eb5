"""Named hyperparameter bundles for reproducible runs.

``xw`` and ``s2019`` mirror the published clinical-dataset settings;
``synth`` is a lighter bundle sized for the synthetic desk-scale cohort and
is the default everywhere.  A profile carries everything except the data
geometry — channel count and trial length always come from the cohort being
processed.
"""
from __future__ import annotations

from dataclasses import dataclass

from .frsm import ModelConfig
from .tokenizer import TokenizerConfig
from .trainer import TrainConfig


@dataclass(frozen=True)
class RunProfile:
    """Model-shape defaults plus a full training configuration."""

    name: str
    embed_dim: int
    temporal_filters: int
    depth: int
    n_state: int
    expand: int
    r_spec: float
    tau_f: float
    dropout: float
    kernel_sizes: tuple[int, ...]
    pool_window: int
    pool_stride: int
    train: TrainConfig

    def model_config(self, channels: int, samples: int,
                     n_classes: int = 2) -> ModelConfig:
        """Bind the profile to a concrete cohort geometry."""
        tok = TokenizerConfig(
            channels=channels, samples=samples, embed_dim=self.embed_dim,
            temporal_filters=self.temporal_filters,
            kernel_sizes=self.kernel_sizes, pool_window=self.pool_window,
            pool_stride=self.pool_stride)
        cfg = ModelConfig(
            tokenizer=tok, depth=self.depth, n_state=self.n_state,
            expand=self.expand, r_spec=self.r_spec, tau_f=self.tau_f,
            dropout=self.dropout, n_classes=n_classes)
        cfg.validate()
        return cfg


PROFILES: dict[str, RunProfile] = {
    # sized for the bundled synthetic cohort; default profile
    "synth": RunProfile(
        name="synth", embed_dim=12, temporal_filters=4, depth=2, n_state=8,
        expand=2, r_spec=0.45, tau_f=0.01, dropout=0.1,
        kernel_sizes=(63, 15), pool_window=25, pool_stride=15,
        train=TrainConfig(alpha=0.4, tau_p=0.60, delta_min=0.5,
                          stage1_epochs=40, epochs=52, batch_size=16,
                          learning_rate=3e-5, weight_decay=1e-3, seed=0)),
    "xw": RunProfile(
        name="xw", embed_dim=30, temporal_filters=8, depth=2, n_state=16,
        expand=2, r_spec=0.45, tau_f=0.01, dropout=0.1,
        kernel_sizes=(63, 15), pool_window=25, pool_stride=15,
        train=TrainConfig(alpha=0.98, tau_p=0.60, delta_min=0.5,
                          stage1_epochs=25, epochs=200, batch_size=16,
                          learning_rate=1e-3, weight_decay=1e-3, seed=0)),
    "s2019": RunProfile(
        name="s2019", embed_dim=38, temporal_filters=8, depth=2, n_state=16,
        expand=2, r_spec=0.50, tau_f=0.01, dropout=0.1,
        kernel_sizes=(63, 15), pool_window=25, pool_stride=15,
        train=TrainConfig(alpha=0.95, tau_p=0.60, delta_min=0.5,
                          stage1_epochs=10, epochs=200, batch_size=16,
                          learning_rate=1e-3, weight_decay=1e-3, seed=0)),
}

DEFAULT_PROFILE = "synth"


def get_profile(name: str) -> RunProfile:
    if name not in PROFILES:
        raise ValueError(
            f"unknown profile {name!r}; available: {sorted(PROFILES)}")
    profile = PROFILES[name]
    profile.train.validate()
    return profile
