"""Shared-private prototype matching for calibrated pseudo-labeling.

Every trial gets a tiny *private signature*: band powers averaged over two
fixed sensorimotor channel groups plus their absolute difference, normalized
to unit length.  Source-domain signatures build one prototype per class
(unit-norm centroid plus a tolerance derived from the member similarity
spread).  During adaptation, a target trial's pseudo-label is accepted only
when the model is confident (max probability above a threshold) *and* the
trial's signature is consistent with the predicted class's prototype
(cosine similarity above that class's tolerance).

Signatures are model-independent, so they are computed once and cached;
prototypes are built from source data once and never rebuilt from target
data.  Each refresh can be audited as one JSON line per trial.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .numeric import Tensor
from .frsm import ModelConfig, model_forward

SIGNATURE_GROUPS = 2  # left / right sensorimotor


class DegenerateSignalWarning(RuntimeWarning):
    """A trial carried (numerically) no power; its signature is uninformative."""


def _check_groups(groups, n_channels: int) -> list[list[int]]:
    if isinstance(groups, dict):
        ordered = [groups[k] for k in groups]
    else:
        ordered = [list(g) for g in groups]
    if len(ordered) != SIGNATURE_GROUPS:
        raise ValueError(
            f"expected {SIGNATURE_GROUPS} channel groups, got {len(ordered)}")
    seen: set[int] = set()
    for g in ordered:
        if len(g) == 0:
            raise ValueError("channel group is empty")
        for c in g:
            if not 0 <= int(c) < n_channels:
                raise ValueError(
                    f"channel index {c} out of range for {n_channels} channels")
            if int(c) in seen:
                raise ValueError(f"channel index {c} appears in two groups")
            seen.add(int(c))
    return [[int(c) for c in g] for g in ordered]


def extract_signature(x: np.ndarray, groups) -> np.ndarray:
    """Unit-norm private signature ``[a_1, a_2, |a_1 - a_2|] / norm``.

    ``a_q`` is the mean over the group's channels of the time-mean squared
    sample value (band power of the already band-filtered trial).  A trial
    whose raw summary has norm below 1e-12 falls back to the uniform unit
    vector and raises :class:`DegenerateSignalWarning`.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a (channels, samples) trial, got {x.shape}")
    ordered = _check_groups(groups, x.shape[0])
    powers = np.mean(x ** 2, axis=1)
    a = np.array([powers[g].mean() for g in ordered])
    raw = np.concatenate([a, [abs(a[0] - a[1])]])
    norm = float(np.linalg.norm(raw))
    if norm < 1e-12:
        warnings.warn("degenerate signal: trial has no measurable band power",
                      DegenerateSignalWarning)
        return np.full(raw.size, 1.0 / np.sqrt(raw.size))
    return raw / norm


def extract_signatures(trials: np.ndarray, groups) -> np.ndarray:
    """Stack :func:`extract_signature` over a (n, C, T) trial array."""
    trials = np.asarray(trials, dtype=np.float64)
    if trials.ndim != 3:
        raise ValueError(f"expected (n, channels, samples), got {trials.shape}")
    return np.stack([extract_signature(t, groups) for t in trials])


@dataclass(frozen=True)
class PrototypeMemory:
    """Per-class unit centroids with acceptance tolerances."""

    centroids: np.ndarray   # (K, Q+1), unit rows
    deltas: np.ndarray      # (K,)
    mus: np.ndarray         # (K,)
    sigmas: np.ndarray      # (K,)
    delta_min: float

    @property
    def n_classes(self) -> int:
        return self.centroids.shape[0]

    def validate(self) -> None:
        norms = np.linalg.norm(self.centroids, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ValueError("prototype centroids must be unit norm")
        if np.any(self.deltas < self.delta_min - 1e-12) or np.any(
                self.deltas > 1.0 + 1e-12):
            raise ValueError("tolerances must lie in [delta_min, 1]")


def build_prototypes(signatures: np.ndarray, labels: np.ndarray,
                     delta_min: float = 0.5) -> PrototypeMemory:
    """Class centroids and tolerances from labeled source signatures.

    ``c_k`` is the L2-normalized class mean; ``mu_k``/``sigma_k`` are the mean
    and population standard deviation of member cosine similarities to
    ``c_k``; ``delta_k = max(delta_min, mu_k - sigma_k)``.
    """
    signatures = np.asarray(signatures, dtype=np.float64)
    labels = np.asarray(labels)
    if signatures.ndim != 2 or labels.shape != (signatures.shape[0],):
        raise ValueError("signatures must be (n, Q+1) with one label each")
    if not 0.0 <= delta_min <= 1.0:
        raise ValueError(f"delta_min must be in [0,1], got {delta_min}")
    n_classes = int(labels.max()) if labels.size else 0
    if n_classes < 1 or labels.min() < 1:
        raise ValueError("labels must be 1-based positive class indices")
    centroids, mus, sigmas, deltas = [], [], [], []
    for k in range(1, n_classes + 1):
        members = signatures[labels == k]
        if members.shape[0] == 0:
            raise ValueError(f"class {k} has no source signatures")
        mean = members.mean(axis=0)
        norm = float(np.linalg.norm(mean))
        if norm < 1e-12:
            raise ValueError(f"class {k} centroid has zero norm")
        c = mean / norm
        sims = (members @ c) / np.linalg.norm(members, axis=1)
        mu = float(sims.mean())
        sigma = float(sims.std())
        centroids.append(c)
        mus.append(mu)
        sigmas.append(sigma)
        deltas.append(min(1.0, max(delta_min, mu - sigma)))
    memory = PrototypeMemory(np.stack(centroids), np.array(deltas),
                             np.array(mus), np.array(sigmas), delta_min)
    memory.validate()
    return memory


@dataclass(frozen=True)
class PseudoLabelState:
    """Gate outcome for a batch of target trials."""

    probs: np.ndarray        # (n, K)
    y_hat: np.ndarray        # (n,), 1-based predicted class
    confidence: np.ndarray   # (n,), r = max probability
    consistency: np.ndarray  # (n,), u = cos(signature, predicted centroid)
    deltas_used: np.ndarray  # (n,), tolerance of the predicted class
    mask: np.ndarray         # (n,), 1 where the pseudo-label is accepted
    accepted: np.ndarray     # sorted indices with mask == 1

    @property
    def n_trials(self) -> int:
        return self.probs.shape[0]

    def pseudo_targets(self) -> np.ndarray:
        """One-hot pseudo-labels; rejected trials get an all-zero row."""
        out = np.zeros_like(self.probs)
        idx = np.flatnonzero(self.mask)
        out[idx, self.y_hat[idx] - 1] = 1.0
        return out


def gate_pseudo_labels(probs: np.ndarray, signatures: np.ndarray,
                       memory: PrototypeMemory, tau_p: float,
                       use_consistency: bool = True) -> PseudoLabelState:
    """Two-indicator gate: confidence AND prototype consistency.

    With ``use_consistency=False`` (the matching-free ablation) only the
    confidence indicator is applied; consistency values are still reported.
    Argmax ties resolve to the lowest class index.
    """
    probs = np.asarray(probs, dtype=np.float64)
    signatures = np.asarray(signatures, dtype=np.float64)
    if probs.ndim != 2 or signatures.ndim != 2:
        raise ValueError("probs and signatures must be 2-d")
    if probs.shape[0] != signatures.shape[0]:
        raise ValueError("probs and signatures disagree on trial count")
    if probs.shape[1] != memory.n_classes:
        raise ValueError(
            f"probs have {probs.shape[1]} classes, memory has "
            f"{memory.n_classes}")
    if not 0.0 < tau_p < 1.0:
        raise ValueError(f"tau_p must be in (0,1), got {tau_p}")
    row_sums = probs.sum(axis=1)
    if np.max(np.abs(row_sums - 1.0)) > 1e-6:
        raise ValueError("probability rows must sum to 1 within 1e-6")
    sig_norms = np.linalg.norm(signatures, axis=1)
    if np.max(np.abs(sig_norms - 1.0)) > 1e-6:
        raise ValueError("signatures must be unit norm")
    y_hat = np.argmax(probs, axis=1) + 1          # np.argmax takes first max
    confidence = probs[np.arange(probs.shape[0]), y_hat - 1]
    centroids = memory.centroids[y_hat - 1]
    consistency = np.sum(signatures * centroids, axis=1) / sig_norms
    deltas_used = memory.deltas[y_hat - 1]
    mask = (confidence >= tau_p).astype(np.int64)
    if use_consistency:
        mask &= (consistency >= deltas_used).astype(np.int64)
    return PseudoLabelState(
        probs=probs, y_hat=y_hat.astype(np.int64), confidence=confidence,
        consistency=consistency, deltas_used=deltas_used, mask=mask,
        accepted=np.flatnonzero(mask))


def refresh_pseudo_state(cfg: ModelConfig, params: dict[str, Tensor],
                         target_trials: np.ndarray, signatures: np.ndarray,
                         memory: PrototypeMemory, tau_p: float,
                         use_consistency: bool = True,
                         batch_size: int = 64) -> PseudoLabelState:
    """Recompute probabilities in eval mode and re-gate the target set.

    Signatures are model-independent and passed in from a one-time cache;
    prototypes stay fixed (they are source-derived).
    """
    target_trials = np.asarray(target_trials, dtype=np.float64)
    if target_trials.ndim != 3:
        raise ValueError(
            f"expected (n, channels, samples) trials, got {target_trials.shape}")
    if target_trials.shape[0] != signatures.shape[0]:
        raise ValueError("trial count and signature count disagree")
    chunks = []
    for start in range(0, target_trials.shape[0], batch_size):
        batch = Tensor(target_trials[start:start + batch_size])
        chunks.append(model_forward(batch, cfg, params, train=False).data)
    probs = (np.concatenate(chunks) if chunks
             else np.zeros((0, cfg.n_classes)))
    if probs.shape[0] == 0:
        return PseudoLabelState(
            probs=probs, y_hat=np.zeros(0, dtype=np.int64),
            confidence=np.zeros(0), consistency=np.zeros(0),
            deltas_used=np.zeros(0), mask=np.zeros(0, dtype=np.int64),
            accepted=np.zeros(0, dtype=np.int64))
    return gate_pseudo_labels(probs, signatures, memory, tau_p,
                              use_consistency=use_consistency)


def audit_records(state: PseudoLabelState, epoch: int) -> list[dict]:
    """One JSON-ready dict per trial for the adaptation audit log."""
    records = []
    for j in range(state.n_trials):
        records.append({
            "epoch": int(epoch),
            "trial": int(j),
            "y_hat": int(state.y_hat[j]),
            "r": float(state.confidence[j]),
            "u": float(state.consistency[j]),
            "delta_used": float(state.deltas_used[j]),
            "accepted": bool(state.mask[j]),
        })
    return records


def append_audit_log(path: str, records: list[dict]) -> None:
    with open(path, "a") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_audit_log(path: str) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
