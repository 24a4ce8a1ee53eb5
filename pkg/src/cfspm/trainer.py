"""Two-stage training and the leave-one-subject-out experiment driver.

Stage I trains the encoder and classifier with cross-entropy on labeled
source subjects, then freezes a prototype memory built from all source
signatures.  Stage II adapts toward the unlabeled target subject: each
epoch refreshes the pseudo-label gate (model probabilities in eval mode),
then steps on ``alpha * L_src + (1 - alpha) * L_tgt`` over paired source /
target minibatches, where the target loss counts only gate-accepted trials
but is normalized by the full batch size.

The LOSO driver re-initializes from a fold-specific seed per held-out
subject, and a label store with access tracking asserts that target labels
are never read before training finishes.  Run directories carry a config
echo, per-fold checkpoints, metrics, the pseudo-label audit log, and a
summary CSV.
"""
from __future__ import annotations

import csv
import json
import multiprocessing
import os
from dataclasses import asdict, dataclass, replace

import numpy as np

from .frsm import (ModelConfig, init_model_params, model_forward, model_logits,
                   save_checkpoint)
from .metrics import METRIC_NAMES, MetricsReport, compute_metrics
from .numeric import AdamState, Tape, Tensor, adam_step, backward, cross_entropy
from .signal import Cohort
from .sppm import (PrototypeMemory, PseudoLabelState, append_audit_log,
                   audit_records, build_prototypes, extract_signatures,
                   refresh_pseudo_state)
from .tokenizer import drop_branch

EPOCH_CAP = 200
EVAL_BATCH = 64


@dataclass(frozen=True)
class TrainConfig:
    """Optimization schedule, gate thresholds, and ablation switches."""

    alpha: float = 0.98
    tau_p: float = 0.60
    delta_min: float = 0.5
    stage1_epochs: int = 25
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    seed: int = 0
    no_sppm: bool = False
    no_dynamic_refresh: bool = False
    no_context: bool = False
    drop_high_branch: bool = False
    drop_low_branch: bool = False
    tgt_mean_accepted: bool = False

    def validate(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0,1], got {self.alpha}")
        if not 0.0 < self.tau_p < 1.0:
            raise ValueError(f"tau_p must be in (0,1), got {self.tau_p}")
        if not 0.0 <= self.delta_min <= 1.0:
            raise ValueError(f"delta_min must be in [0,1], got {self.delta_min}")
        if not 1 <= self.epochs <= EPOCH_CAP:
            raise ValueError(
                f"epochs must be in 1..{EPOCH_CAP}, got {self.epochs}")
        if not 0 <= self.stage1_epochs <= self.epochs:
            raise ValueError(
                f"stage1_epochs must be in 0..epochs ({self.epochs}), got "
                f"{self.stage1_epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0.0:
            raise ValueError(
                f"learning_rate must be > 0, got {self.learning_rate}")
        if self.weight_decay < 0.0:
            raise ValueError(
                f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.drop_high_branch and self.drop_low_branch:
            raise ValueError(
                "drop_high_branch and drop_low_branch cannot both be set")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown train config fields: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg


def apply_ablations(model_cfg: ModelConfig, tcfg: TrainConfig) -> ModelConfig:
    """Fold the structural ablation switches into the model config."""
    cfg = model_cfg
    if tcfg.no_context:
        cfg = replace(cfg, no_context=True)
    tok = cfg.tokenizer
    if tcfg.drop_high_branch:
        tok = drop_branch(tok, "high")
    if tcfg.drop_low_branch:
        tok = drop_branch(tok, "low")
    if tok is not cfg.tokenizer:
        cfg = replace(cfg, tokenizer=tok)
    cfg.validate()
    return cfg


class LeakageError(AssertionError):
    """Target-subject labels were read during training."""


class LabelStore:
    """Label access with per-subject read tracking for the leakage guard."""

    def __init__(self, labels_by_subject: dict[str, np.ndarray]):
        self._labels = {sid: np.asarray(lab).copy()
                        for sid, lab in labels_by_subject.items()}
        self._reads: set[str] = set()

    @classmethod
    def from_cohort(cls, cohort: Cohort) -> "LabelStore":
        return cls({s.subject_id: s.labels for s in cohort.subjects})

    def labels(self, subject_id: str) -> np.ndarray:
        if subject_id not in self._labels:
            raise KeyError(f"unknown subject {subject_id!r}")
        self._reads.add(subject_id)
        return self._labels[subject_id].copy()

    @property
    def reads(self) -> frozenset:
        return frozenset(self._reads)


def assert_no_target_label_reads(store: LabelStore, target_id: str,
                                 source_ids: list[str]) -> None:
    """The leakage guard: training must only have read source labels."""
    allowed = set(source_ids)
    leaked = store.reads - allowed
    if leaked:
        raise LeakageError(
            f"labels of non-source subjects {sorted(leaked)} were read during "
            f"training for target {target_id!r}")


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels - 1] = 1.0
    return out


def _epoch_batches(n: int, batch_size: int, seed_key: list) -> list[np.ndarray]:
    order = np.random.default_rng(seed_key).permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def _grads_by_name(params: dict[str, Tensor],
                   grads: dict[Tensor, np.ndarray]) -> dict[str, np.ndarray]:
    # parameters untouched by the loss (e.g. spectral maps under the
    # no-context switch) get an explicit zero gradient
    out = {}
    for name, p in params.items():
        g = grads.get(p)
        out[name] = np.zeros_like(p.data) if g is None else g
    return out


def predict_probabilities(cfg: ModelConfig, params: dict[str, Tensor],
                          trials: np.ndarray,
                          batch_size: int = EVAL_BATCH) -> np.ndarray:
    """Eval-mode class probabilities for an (n, C, T) trial array."""
    chunks = []
    for start in range(0, trials.shape[0], batch_size):
        xb = Tensor(np.asarray(trials[start:start + batch_size],
                               dtype=np.float64))
        chunks.append(model_forward(xb, cfg, params, train=False).data)
    return (np.concatenate(chunks) if chunks
            else np.zeros((0, cfg.n_classes)))


def stage1_train(src_trials: np.ndarray, src_labels: np.ndarray, groups,
                 model_cfg: ModelConfig, tcfg: TrainConfig,
                 params: dict[str, Tensor],
                 opt: AdamState) -> tuple[list[float], PrototypeMemory]:
    """Supervised source training, then the frozen prototype memory."""
    src_trials = np.asarray(src_trials, dtype=np.float64)
    src_labels = np.asarray(src_labels)
    n = src_trials.shape[0]
    if n == 0:
        raise ValueError("stage I needs a non-empty source set")
    for k in range(1, model_cfg.n_classes + 1):
        if not np.any(src_labels == k):
            raise ValueError(f"class {k} absent from the source set")
    losses: list[float] = []
    for epoch in range(tcfg.stage1_epochs):
        batch_losses = []
        batches = _epoch_batches(n, tcfg.batch_size, [tcfg.seed, 404, epoch])
        for step, idx in enumerate(batches):
            xb = Tensor(src_trials[idx])
            yb = Tensor(one_hot(src_labels[idx], model_cfg.n_classes))
            with Tape():
                logits = model_logits(xb, model_cfg, params, train=True,
                                      seed=(tcfg.seed, 505, epoch, step))
                loss = cross_entropy(logits, yb)
                grads = backward(loss)
            adam_step(params, _grads_by_name(params, grads), opt)
            batch_losses.append(float(loss.data))
        losses.append(float(np.mean(batch_losses)))
    memory = build_prototypes(extract_signatures(src_trials, groups),
                              src_labels, tcfg.delta_min)
    return losses, memory


def stage2_adapt(src_trials: np.ndarray, src_labels: np.ndarray,
                 tgt_trials: np.ndarray, groups, memory: PrototypeMemory,
                 model_cfg: ModelConfig, tcfg: TrainConfig,
                 params: dict[str, Tensor], opt: AdamState
                 ) -> tuple[list[float], list[dict], PseudoLabelState]:
    """Calibrated adaptation epochs; returns losses, audit, entry gate state."""
    src_trials = np.asarray(src_trials, dtype=np.float64)
    src_labels = np.asarray(src_labels)
    tgt_trials = np.asarray(tgt_trials, dtype=np.float64)
    n_src, n_tgt = src_trials.shape[0], tgt_trials.shape[0]
    k = model_cfg.n_classes
    use_consistency = not tcfg.no_sppm
    tgt_sigs = (extract_signatures(tgt_trials, groups) if n_tgt
                else np.zeros((0, 3)))
    n_stage2 = tcfg.epochs - tcfg.stage1_epochs
    losses: list[float] = []
    audit: list[dict] = []
    state: PseudoLabelState | None = None
    entry_state: PseudoLabelState | None = None
    skip_target = tcfg.alpha == 1.0 or n_tgt == 0

    def refresh() -> PseudoLabelState:
        return refresh_pseudo_state(model_cfg, params, tgt_trials, tgt_sigs,
                                    memory, tcfg.tau_p,
                                    use_consistency=use_consistency,
                                    batch_size=EVAL_BATCH)

    for e2 in range(n_stage2):
        epoch = tcfg.stage1_epochs + e2
        if state is None or not tcfg.no_dynamic_refresh:
            state = refresh()
        if entry_state is None:
            entry_state = state
        audit.extend(audit_records(state, epoch))
        pseudo = state.pseudo_targets()
        src_batches = _epoch_batches(n_src, tcfg.batch_size,
                                     [tcfg.seed, 404, epoch])
        tgt_batches = (_epoch_batches(n_tgt, tcfg.batch_size,
                                      [tcfg.seed, 414, epoch])
                       if not skip_target else [])
        batch_losses = []
        for step, sidx in enumerate(src_batches):
            xb = Tensor(src_trials[sidx])
            yb = Tensor(one_hot(src_labels[sidx], k))
            with Tape():
                src_logits = model_logits(xb, model_cfg, params, train=True,
                                          seed=(tcfg.seed, 505, epoch, step))
                l_src = cross_entropy(src_logits, yb)
                if skip_target:
                    loss = l_src
                else:
                    tidx = tgt_batches[step % len(tgt_batches)]
                    tb = Tensor(tgt_trials[tidx])
                    pb = Tensor(pseudo[tidx])
                    tgt_logits = model_logits(
                        tb, model_cfg, params, train=True,
                        seed=(tcfg.seed, 506, epoch, step))
                    l_tgt = cross_entropy(tgt_logits, pb)
                    if tcfg.tgt_mean_accepted:
                        accepted = float(pseudo[tidx].sum())
                        if accepted > 0.0:
                            l_tgt = l_tgt * Tensor(len(tidx) / accepted)
                    loss = (Tensor(tcfg.alpha) * l_src
                            + Tensor(1.0 - tcfg.alpha) * l_tgt)
                grads = backward(loss)
            adam_step(params, _grads_by_name(params, grads), opt)
            batch_losses.append(float(loss.data))
        losses.append(float(np.mean(batch_losses)) if batch_losses else 0.0)
    if entry_state is None and n_tgt:
        entry_state = refresh()
    return losses, audit, entry_state


@dataclass
class FoldResult:
    """Everything one LOSO fold produces."""

    target_subject: str
    stage1_losses: list[float]
    stage2_losses: list[float]
    predictions: np.ndarray        # (n_target,), 1-based
    probabilities: np.ndarray      # (n_target, K)
    metrics: MetricsReport
    audit: list[dict]
    stage1_gate: dict              # gate state at stage II entry


def _gate_summary(state: PseudoLabelState | None) -> dict:
    if state is None:
        return {"y_hat": [], "accepted": [], "confidence": [],
                "consistency": []}
    return {
        "y_hat": [int(v) for v in state.y_hat],
        "accepted": [int(v) for v in state.accepted],
        "confidence": [float(v) for v in state.confidence],
        "consistency": [float(v) for v in state.consistency],
    }


def run_fold(cohort: Cohort, model_cfg: ModelConfig, tcfg: TrainConfig,
             target_id: str, store: LabelStore | None = None
             ) -> tuple[FoldResult, dict[str, Tensor]]:
    """Train one fold with ``target_id`` held out; returns result + params."""
    subject_ids = cohort.subject_ids()
    if target_id not in subject_ids:
        raise ValueError(f"unknown target subject {target_id!r}")
    if len(subject_ids) < 2:
        raise ValueError("LOSO needs at least 2 subjects")
    if store is None:
        store = LabelStore.from_cohort(cohort)
    fold_seed = tcfg.seed + subject_ids.index(target_id)
    fold_tcfg = replace(tcfg, seed=fold_seed)
    fold_tcfg.validate()
    mcfg = apply_ablations(model_cfg, tcfg)

    by_id = {s.subject_id: s for s in cohort.subjects}
    source_ids = [sid for sid in subject_ids if sid != target_id]
    src_trials = np.concatenate([by_id[sid].trials for sid in source_ids])
    src_labels = np.concatenate([store.labels(sid) for sid in source_ids])
    tgt_trials = by_id[target_id].trials

    params = init_model_params(mcfg, fold_seed)
    opt = AdamState(lr=fold_tcfg.learning_rate,
                    weight_decay=fold_tcfg.weight_decay)
    stage1_losses, memory = stage1_train(
        src_trials, src_labels, cohort.groups, mcfg, fold_tcfg, params, opt)
    stage2_losses, audit, entry_state = stage2_adapt(
        src_trials, src_labels, tgt_trials, cohort.groups, memory, mcfg,
        fold_tcfg, params, opt)

    assert_no_target_label_reads(store, target_id, source_ids)

    probs = predict_probabilities(mcfg, params, tgt_trials)
    preds = np.argmax(probs, axis=1) + 1
    truth = store.labels(target_id)
    report = compute_metrics(truth, preds, mcfg.n_classes)
    result = FoldResult(
        target_subject=target_id, stage1_losses=stage1_losses,
        stage2_losses=stage2_losses, predictions=preds.astype(np.int64),
        probabilities=probs, metrics=report, audit=audit,
        stage1_gate=_gate_summary(entry_state))
    return result, params


def _fold_worker(args) -> tuple[FoldResult, dict[str, Tensor]]:
    cohort, model_cfg, tcfg, target_id = args
    return run_fold(cohort, model_cfg, tcfg, target_id)


def format_mean_std(values) -> str:
    """Percent-scaled ``mean ± std`` with two decimals and leading zeros."""
    values = np.asarray(values, dtype=np.float64)
    return f"{100.0 * values.mean():05.2f} ± {100.0 * values.std():05.2f}"


def summarize(results: list[FoldResult]) -> dict[str, str]:
    summary = {}
    for name in METRIC_NAMES:
        summary[name] = format_mean_std(
            [getattr(r.metrics, name) for r in results])
    return summary


def write_run_dir(out_dir: str, model_cfg: ModelConfig, tcfg: TrainConfig,
                  results: list[FoldResult],
                  fold_params: list[dict[str, Tensor]]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    echo = {"model": model_cfg.to_json(), "train": tcfg.to_json()}
    with open(os.path.join(out_dir, "run_config.json"), "w") as fh:
        json.dump(echo, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for result, params in zip(results, fold_params):
        fold_dir = os.path.join(out_dir, f"fold_{result.target_subject}")
        os.makedirs(fold_dir, exist_ok=True)
        save_checkpoint(os.path.join(fold_dir, "checkpoint"),
                        apply_ablations(model_cfg, tcfg), params)
        payload = {
            "target_subject": result.target_subject,
            "metrics": result.metrics.to_dict(),
            "stage1_losses": result.stage1_losses,
            "stage2_losses": result.stage2_losses,
            "predictions": [int(v) for v in result.predictions],
            "probabilities": [[float(p) for p in row]
                              for row in result.probabilities],
            "stage1_gate": result.stage1_gate,
        }
        with open(os.path.join(fold_dir, "metrics.json"), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        audit_path = os.path.join(fold_dir, "audit.jsonl")
        if os.path.exists(audit_path):
            os.remove(audit_path)
        append_audit_log(audit_path, result.audit)
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject"] + list(METRIC_NAMES))
        for result in results:
            writer.writerow([result.target_subject] + [
                f"{getattr(result.metrics, name):.10f}"
                for name in METRIC_NAMES])
        summary = summarize(results)
        writer.writerow(["mean±std"] + [summary[name]
                                        for name in METRIC_NAMES])


def run_loso(cohort: Cohort, model_cfg: ModelConfig, tcfg: TrainConfig,
             out_dir: str | None = None, workers: int = 1
             ) -> tuple[list[FoldResult], dict[str, str]]:
    """Full leave-one-subject-out protocol over every subject."""
    cohort.validate()
    model_cfg.validate()
    tcfg.validate()
    subject_ids = cohort.subject_ids()
    if len(subject_ids) < 2:
        raise ValueError("LOSO needs at least 2 subjects")
    tasks = [(cohort, model_cfg, tcfg, sid) for sid in subject_ids]
    if workers > 1:
        with multiprocessing.get_context("fork").Pool(workers) as pool:
            outcomes = pool.map(_fold_worker, tasks)
    else:
        outcomes = [_fold_worker(task) for task in tasks]
    results = [res for res, _ in outcomes]
    fold_params = [params for _, params in outcomes]
    summary = summarize(results)
    if out_dir is not None:
        write_run_dir(out_dir, model_cfg, tcfg, results, fold_params)
    return results, summary
