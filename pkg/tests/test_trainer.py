"""Two-stage training, the leakage guard, and the LOSO driver."""
import copy
import json
import os

import numpy as np
import pytest

from cfspm.frsm import ModelConfig, init_model_params, load_checkpoint
from cfspm.numeric import AdamState
from cfspm.signal import Cohort, Subject
from cfspm.tokenizer import TokenizerConfig
from cfspm.trainer import (EPOCH_CAP, FoldResult, LabelStore, LeakageError,
                           TrainConfig, apply_ablations,
                           assert_no_target_label_reads, format_mean_std,
                           one_hot, run_fold, run_loso, stage1_train,
                           stage2_adapt, summarize)

GROUPS = {"left": [0, 1], "right": [2, 3]}


def toy_model_cfg(**kw) -> ModelConfig:
    tok = TokenizerConfig(channels=4, samples=60, embed_dim=4,
                          temporal_filters=1, kernel_sizes=(7, 3),
                          pool_window=10, pool_stride=6)
    base = dict(tokenizer=tok, depth=1, n_state=3)
    base.update(kw)
    return ModelConfig(**base)


def toy_train_cfg(**kw) -> TrainConfig:
    base = dict(alpha=0.9, tau_p=0.55, delta_min=0.0, stage1_epochs=2,
                epochs=4, batch_size=8, learning_rate=2e-3,
                weight_decay=0.0, seed=0)
    base.update(kw)
    return TrainConfig(**base)


def toy_cohort(n_subjects=3, trials_per_subject=8, seed=0) -> Cohort:
    """Tiny separable cohort: the active channel pair depends on the class."""
    rng = np.random.default_rng(seed)
    subjects = []
    for s in range(n_subjects):
        labels = np.array([1, 2] * (trials_per_subject // 2), dtype=np.int64)
        labels = rng.permutation(labels)
        trials = rng.normal(size=(trials_per_subject, 4, 60))
        for j, lab in enumerate(labels):
            boosted = [0, 1] if lab == 1 else [2, 3]
            trials[j, boosted] *= 2.5
        subjects.append(Subject(subject_id=f"S{s:02d}", trials=trials,
                                labels=labels))
    return Cohort(fs=250.0, channels=["C3", "CP3", "C4", "CP4"],
                  groups={"left": [0, 1], "right": [2, 3]}, subjects=subjects)


def source_arrays(cohort, target_id):
    trials, labels = [], []
    for s in cohort.subjects:
        if s.subject_id != target_id:
            trials.append(s.trials)
            labels.append(s.labels)
    return np.concatenate(trials), np.concatenate(labels)


# ---------------------------------------------------------------------------
# config


def test_train_config_validation():
    toy_train_cfg().validate()
    with pytest.raises(ValueError, match="alpha"):
        toy_train_cfg(alpha=1.2).validate()
    with pytest.raises(ValueError, match="tau_p"):
        toy_train_cfg(tau_p=1.0).validate()
    with pytest.raises(ValueError, match="stage1_epochs"):
        toy_train_cfg(stage1_epochs=9, epochs=4).validate()
    with pytest.raises(ValueError, match="epochs"):
        toy_train_cfg(epochs=EPOCH_CAP + 1, stage1_epochs=5).validate()
    with pytest.raises(ValueError, match="cannot both"):
        toy_train_cfg(drop_high_branch=True, drop_low_branch=True).validate()
    with pytest.raises(ValueError, match="unknown train config"):
        TrainConfig.from_json({**toy_train_cfg().to_json(), "oops": 1})
    back = TrainConfig.from_json(toy_train_cfg().to_json())
    assert back == toy_train_cfg()


def test_apply_ablations():
    mcfg = toy_model_cfg()
    assert apply_ablations(mcfg, toy_train_cfg()) == mcfg
    ctx_off = apply_ablations(mcfg, toy_train_cfg(no_context=True))
    assert ctx_off.no_context and not mcfg.no_context
    hi = apply_ablations(mcfg, toy_train_cfg(drop_high_branch=True))
    assert hi.tokenizer.kernel_sizes == (7,)
    lo = apply_ablations(mcfg, toy_train_cfg(drop_low_branch=True))
    assert lo.tokenizer.kernel_sizes == (3,)


# ---------------------------------------------------------------------------
# label store / leakage guard


def test_label_store_tracks_reads():
    cohort = toy_cohort()
    store = LabelStore.from_cohort(cohort)
    assert store.reads == frozenset()
    lab = store.labels("S01")
    assert np.array_equal(lab, cohort.subjects[1].labels)
    assert store.reads == frozenset({"S01"})
    with pytest.raises(KeyError):
        store.labels("S99")
    assert_no_target_label_reads(store, "S00", ["S01", "S02"])
    store.labels("S00")
    with pytest.raises(LeakageError, match="S00"):
        assert_no_target_label_reads(store, "S00", ["S01", "S02"])


def test_tampered_store_trips_guard_in_run_fold():
    cohort = toy_cohort()
    store = LabelStore.from_cohort(cohort)
    store.labels("S00")  # a leaky pipeline would read the target's labels
    with pytest.raises(LeakageError):
        run_fold(cohort, toy_model_cfg(), toy_train_cfg(), "S00", store=store)


# ---------------------------------------------------------------------------
# stage I


def test_stage1_zero_epochs_leaves_params_untouched():
    cohort = toy_cohort()
    src_trials, src_labels = source_arrays(cohort, "S00")
    mcfg, tcfg = toy_model_cfg(), toy_train_cfg(stage1_epochs=0)
    params = init_model_params(mcfg, 0)
    before = {n: p.data.copy() for n, p in params.items()}
    opt = AdamState(lr=tcfg.learning_rate)
    losses, memory = stage1_train(src_trials, src_labels, GROUPS, mcfg, tcfg,
                                  params, opt)
    assert losses == []
    for name in params:
        assert np.array_equal(params[name].data, before[name])
    assert memory.n_classes == 2
    assert np.all(memory.deltas >= 0.0)


def test_stage1_loss_decreases_on_separable_data():
    cohort = toy_cohort()
    src_trials, src_labels = source_arrays(cohort, "S00")
    mcfg, tcfg = toy_model_cfg(), toy_train_cfg(stage1_epochs=6, epochs=6)
    params = init_model_params(mcfg, 0)
    opt = AdamState(lr=tcfg.learning_rate)
    losses, _ = stage1_train(src_trials, src_labels, GROUPS, mcfg, tcfg,
                             params, opt)
    assert len(losses) == 6
    assert losses[-1] < losses[0]


def test_stage1_missing_class_rejected():
    cohort = toy_cohort()
    src_trials, src_labels = source_arrays(cohort, "S00")
    mcfg, tcfg = toy_model_cfg(), toy_train_cfg()
    params = init_model_params(mcfg, 0)
    with pytest.raises(ValueError, match="class 2 absent"):
        stage1_train(src_trials, np.ones_like(src_labels), GROUPS, mcfg, tcfg,
                     params, AdamState())
    with pytest.raises(ValueError, match="non-empty"):
        stage1_train(src_trials[:0], src_labels[:0], GROUPS, mcfg, tcfg,
                     params, AdamState())


# ---------------------------------------------------------------------------
# stage II


def run_two_stage(tcfg, cohort=None, seed=0):
    cohort = cohort or toy_cohort()
    src_trials, src_labels = source_arrays(cohort, "S00")
    tgt_trials = cohort.subjects[0].trials
    mcfg = apply_ablations(toy_model_cfg(), tcfg)
    params = init_model_params(mcfg, seed)
    opt = AdamState(lr=tcfg.learning_rate, weight_decay=tcfg.weight_decay)
    s1_losses, memory = stage1_train(src_trials, src_labels, GROUPS, mcfg,
                                     tcfg, params, opt)
    s2_losses, audit, entry = stage2_adapt(src_trials, src_labels, tgt_trials,
                                           GROUPS, memory, mcfg, tcfg, params,
                                           opt)
    return params, s1_losses, s2_losses, audit, entry


def test_stage2_runs_with_empty_accepted_set():
    tcfg = toy_train_cfg(tau_p=0.999)  # nothing passes the confidence test
    params, _, s2_losses, audit, entry = run_two_stage(tcfg)
    assert len(s2_losses) == 2
    assert all(np.isfinite(v) for v in s2_losses)
    assert entry.accepted.size == 0
    assert all(not rec["accepted"] for rec in audit)


def test_alpha_one_matches_continued_source_training():
    # source-only continued training: stage II with alpha=1 must produce the
    # same parameter trajectory as simply running more stage-I epochs
    tcfg_a = toy_train_cfg(alpha=1.0, stage1_epochs=2, epochs=4,
                           no_sppm=True, no_dynamic_refresh=True)
    params_a, _, _, _, _ = run_two_stage(tcfg_a)
    cohort = toy_cohort()
    src_trials, src_labels = source_arrays(cohort, "S00")
    mcfg = toy_model_cfg()
    tcfg_b = toy_train_cfg(stage1_epochs=4, epochs=4)
    params_b = init_model_params(mcfg, 0)
    opt = AdamState(lr=tcfg_b.learning_rate, weight_decay=tcfg_b.weight_decay)
    stage1_train(src_trials, src_labels, GROUPS, mcfg, tcfg_b, params_b, opt)
    for name in params_a:
        assert np.array_equal(params_a[name].data, params_b[name].data), name


def test_dynamic_refresh_freezes_when_disabled():
    tcfg = toy_train_cfg(no_dynamic_refresh=True, epochs=5, stage1_epochs=2)
    _, _, _, audit, _ = run_two_stage(tcfg)
    # 3 stage-II epochs, 8 target trials each; frozen gate repeats verbatim
    assert len(audit) == 3 * 8
    first = [r for r in audit if r["epoch"] == 2]
    last = [r for r in audit if r["epoch"] == 4]
    strip = lambda r: {k: v for k, v in r.items() if k != "epoch"}
    assert [strip(r) for r in first] == [strip(r) for r in last]


# ---------------------------------------------------------------------------
# folds and LOSO


def test_run_fold_deterministic_and_guarded():
    cohort = toy_cohort()
    res1, params1 = run_fold(cohort, toy_model_cfg(), toy_train_cfg(), "S01")
    res2, params2 = run_fold(cohort, toy_model_cfg(), toy_train_cfg(), "S01")
    assert np.array_equal(res1.predictions, res2.predictions)
    assert np.array_equal(res1.probabilities, res2.probabilities)
    assert res1.metrics == res2.metrics
    assert res1.audit == res2.audit
    for name in params1:
        assert np.array_equal(params1[name].data, params2[name].data)
    assert res1.predictions.shape == (8,)
    assert res1.target_subject == "S01"


def test_run_fold_unknown_target():
    with pytest.raises(ValueError, match="unknown target"):
        run_fold(toy_cohort(), toy_model_cfg(), toy_train_cfg(), "S42")


def test_run_loso_writes_artifacts(tmp_path):
    cohort = toy_cohort()
    out = str(tmp_path / "run")
    results, summary = run_loso(cohort, toy_model_cfg(), toy_train_cfg(),
                                out_dir=out)
    assert [r.target_subject for r in results] == ["S00", "S01", "S02"]
    assert set(summary) == {"accuracy", "kappa", "precision", "recall", "f1"}
    assert os.path.exists(os.path.join(out, "run_config.json"))
    assert os.path.exists(os.path.join(out, "summary.csv"))
    for sid in ("S00", "S01", "S02"):
        fold = os.path.join(out, f"fold_{sid}")
        assert os.path.exists(os.path.join(fold, "metrics.json"))
        assert os.path.exists(os.path.join(fold, "audit.jsonl"))
        cfg_loaded, params_loaded = load_checkpoint(
            os.path.join(fold, "checkpoint"))
        assert cfg_loaded == toy_model_cfg()
        with open(os.path.join(fold, "metrics.json")) as fh:
            payload = json.load(fh)
        assert payload["target_subject"] == sid
        assert len(payload["predictions"]) == 8
    with open(os.path.join(out, "run_config.json")) as fh:
        echo = json.load(fh)
    assert TrainConfig.from_json(echo["train"]) == toy_train_cfg()
    assert ModelConfig.from_json(echo["model"]) == toy_model_cfg()


def test_run_loso_summary_bytes_reproducible(tmp_path):
    cohort = toy_cohort()
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    run_loso(cohort, toy_model_cfg(), toy_train_cfg(), out_dir=out1)
    run_loso(cohort, toy_model_cfg(), toy_train_cfg(), out_dir=out2)
    with open(os.path.join(out1, "summary.csv"), "rb") as fh:
        a = fh.read()
    with open(os.path.join(out2, "summary.csv"), "rb") as fh:
        b = fh.read()
    assert a == b


def test_run_loso_parallel_workers_match_serial(tmp_path):
    cohort = toy_cohort()
    serial, _ = run_loso(cohort, toy_model_cfg(), toy_train_cfg())
    parallel, _ = run_loso(cohort, toy_model_cfg(), toy_train_cfg(), workers=2)
    for rs, rp in zip(serial, parallel):
        assert rs.target_subject == rp.target_subject
        assert np.array_equal(rs.predictions, rp.predictions)
        assert rs.metrics == rp.metrics


def test_run_loso_rejects_single_subject():
    cohort = toy_cohort(n_subjects=1)
    with pytest.raises(ValueError, match="2 subjects"):
        run_loso(cohort, toy_model_cfg(), toy_train_cfg())


def test_format_mean_std_style():
    assert format_mean_std([0.7, 0.65]) == "67.50 ± 02.50"
    assert format_mean_std([0.6823]) == "68.23 ± 00.00"


def test_one_hot():
    out = one_hot(np.array([1, 2, 1]), 2)
    assert np.array_equal(out, [[1, 0], [0, 1], [1, 0]])
