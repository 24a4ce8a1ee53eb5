"""Command-line entry point.

Subcommands
-----------
``synth``      generate a synthetic stroke-rehabilitation cohort and write it
               to disk in the binary container format.
``train``      train on all-but-one subject and adapt to one held-out target.
``loso``       run the full leave-one-subject-out protocol.
``gradcheck``  finite-difference audit of the analytic gradients.
``report``     aggregate run directories into a metrics table, with a paired
               significance test when exactly two runs are given.

Exit codes: 0 on success, 1 for configuration/validation problems, 2 for
runtime failures.  Configuration precedence is command-line flag over
``--config`` file over ``--profile``, and the ``CFSPM_SEED`` environment
variable overrides every other seed source.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .frsm import ModelConfig, init_model_params, model_logits
from .metrics import METRIC_NAMES, wilcoxon_signed_rank
from .numeric import Tensor, check_gradients, cross_entropy
from .profiles import DEFAULT_PROFILE, PROFILES, get_profile
from .signal import (CohortSpec, load_cohort, preprocess_cohort, save_cohort,
                     synthesize_cohort)
from .tokenizer import TokenizerConfig
from .trainer import (TrainConfig, format_mean_std, run_fold, run_loso,
                      write_run_dir)

_MODEL_KEYS = ("embed_dim", "temporal_filters", "kernel_sizes", "pool_window",
               "pool_stride", "depth", "n_state", "expand", "r_spec", "tau_f",
               "dropout", "n_classes", "mixer_per_bin")
_TRAIN_KEYS = tuple(f.name for f in dataclasses.fields(TrainConfig))


class CliError(ValueError):
    """Configuration problem with a single-line, field-naming message."""


def _read_json(path: str, what: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise CliError(f"{what} file not found: {path}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(f"{what} file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise CliError(f"{what} file {path} must hold a JSON object")
    return raw


def _resolve_configs(args: argparse.Namespace,
                     channels: int, samples: int) -> tuple[ModelConfig,
                                                           TrainConfig]:
    """Merge profile, optional config file, flags, and the env seed."""
    profile = get_profile(args.profile)
    model_kwargs = {
        "embed_dim": profile.embed_dim,
        "temporal_filters": profile.temporal_filters,
        "kernel_sizes": profile.kernel_sizes,
        "pool_window": profile.pool_window,
        "pool_stride": profile.pool_stride,
        "depth": profile.depth,
        "n_state": profile.n_state,
        "expand": profile.expand,
        "r_spec": profile.r_spec,
        "tau_f": profile.tau_f,
        "dropout": profile.dropout,
        "n_classes": 2,
        "mixer_per_bin": False,
    }
    train_kwargs = dataclasses.asdict(profile.train)

    if args.config is not None:
        raw = _read_json(args.config, "config")
        unknown = set(raw) - {"model", "train"}
        if unknown:
            raise CliError(
                f"config file sections must be 'model'/'train', "
                f"got {sorted(unknown)}")
        for key, value in raw.get("model", {}).items():
            if key not in _MODEL_KEYS:
                raise CliError(f"unknown model config field {key!r}")
            if key == "kernel_sizes":
                value = tuple(value)
            model_kwargs[key] = value
        for key, value in raw.get("train", {}).items():
            if key not in _TRAIN_KEYS:
                raise CliError(f"unknown train config field {key!r}")
            train_kwargs[key] = value

    flag_map = {
        "alpha": "alpha", "tau_p": "tau_p", "delta_min": "delta_min",
        "stage1_epochs": "stage1_epochs", "epochs": "epochs",
        "batch_size": "batch_size", "learning_rate": "learning_rate",
        "weight_decay": "weight_decay", "seed": "seed",
    }
    for flag, key in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            train_kwargs[key] = value
    for flag in ("no_sppm", "no_dynamic_refresh", "no_context",
                 "drop_high_branch", "drop_low_branch"):
        if getattr(args, flag, False):
            train_kwargs[flag] = True

    env_seed = os.environ.get("CFSPM_SEED")
    if env_seed is not None:
        try:
            train_kwargs["seed"] = int(env_seed)
        except ValueError as exc:
            raise CliError(f"CFSPM_SEED must be an integer, "
                           f"got {env_seed!r}") from exc

    tok = TokenizerConfig(
        channels=channels, samples=samples,
        embed_dim=model_kwargs["embed_dim"],
        temporal_filters=model_kwargs["temporal_filters"],
        kernel_sizes=tuple(model_kwargs["kernel_sizes"]),
        pool_window=model_kwargs["pool_window"],
        pool_stride=model_kwargs["pool_stride"])
    model_cfg = ModelConfig(
        tokenizer=tok, depth=model_kwargs["depth"],
        n_state=model_kwargs["n_state"], expand=model_kwargs["expand"],
        r_spec=model_kwargs["r_spec"], tau_f=model_kwargs["tau_f"],
        dropout=model_kwargs["dropout"],
        n_classes=model_kwargs["n_classes"],
        mixer_per_bin=model_kwargs["mixer_per_bin"],
        no_context=train_kwargs.get("no_context", False))
    train_cfg = TrainConfig(**train_kwargs)
    model_cfg.validate()
    train_cfg.validate()
    return model_cfg, train_cfg


def _load_data(path: str):
    p = Path(path)
    if not p.exists():
        raise CliError(f"data directory not found: {path}")
    cohort = load_cohort(p)
    samples = cohort.subjects[0].trials.shape[2]
    return cohort, len(cohort.channels), samples


def _add_common_train_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--data", required=True, help="cohort directory")
    sub.add_argument("--out", required=True, help="output run directory")
    sub.add_argument("--profile", default=DEFAULT_PROFILE,
                     choices=sorted(PROFILES))
    sub.add_argument("--config", default=None,
                     help="JSON file with 'model'/'train' overrides")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--alpha", type=float, default=None)
    sub.add_argument("--tau-p", dest="tau_p", type=float, default=None)
    sub.add_argument("--delta-min", dest="delta_min", type=float,
                     default=None)
    sub.add_argument("--stage1-epochs", dest="stage1_epochs", type=int,
                     default=None)
    sub.add_argument("--epochs", type=int, default=None)
    sub.add_argument("--batch-size", dest="batch_size", type=int,
                     default=None)
    sub.add_argument("--learning-rate", dest="learning_rate", type=float,
                     default=None)
    sub.add_argument("--weight-decay", dest="weight_decay", type=float,
                     default=None)
    sub.add_argument("--no-sppm", dest="no_sppm", action="store_true")
    sub.add_argument("--no-dynamic-refresh", dest="no_dynamic_refresh",
                     action="store_true")
    sub.add_argument("--no-context", dest="no_context", action="store_true")
    sub.add_argument("--drop-high-branch", dest="drop_high_branch",
                     action="store_true")
    sub.add_argument("--drop-low-branch", dest="drop_low_branch",
                     action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfspm",
        description="Cross-patient motor-imagery EEG decoding pipeline.")
    subs = parser.add_subparsers(dest="command", required=True)

    synth = subs.add_parser("synth", help="generate a synthetic cohort")
    synth.add_argument("--spec", default=None,
                       help="JSON cohort spec (defaults used when omitted)")
    synth.add_argument("--out", required=True, help="output data directory")

    train = subs.add_parser("train", help="train one cross-patient fold")
    _add_common_train_args(train)
    train.add_argument("--target", required=True,
                       help="held-out target subject id")

    loso = subs.add_parser("loso",
                           help="leave-one-subject-out over the cohort")
    _add_common_train_args(loso)
    loso.add_argument("--workers", type=int, default=1)

    grad = subs.add_parser("gradcheck",
                           help="finite-difference gradient audit")
    grad.add_argument("--seed", type=int, default=0)

    report = subs.add_parser("report", help="aggregate run directories")
    report.add_argument("--runs", nargs="+", required=True,
                        help="run directories produced by train/loso")
    return parser


def _cmd_synth(args: argparse.Namespace) -> int:
    if args.spec is not None:
        p = Path(args.spec)
        if not p.exists():
            raise CliError(f"spec file not found: {args.spec}")
        try:
            spec = CohortSpec.from_json(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CliError(
                f"spec file {args.spec} is not valid JSON: {exc}") from exc
    else:
        spec = CohortSpec()
    env_seed = os.environ.get("CFSPM_SEED")
    if env_seed is not None:
        try:
            spec = dataclasses.replace(spec, seed=int(env_seed))
        except ValueError as exc:
            raise CliError(f"CFSPM_SEED must be an integer, "
                           f"got {env_seed!r}") from exc
    spec.validate()
    raws = synthesize_cohort(spec)
    cohort = preprocess_cohort(raws, spec.channel_names(), spec.groups)
    out = save_cohort(args.out, cohort)
    n_trials = sum(s.trials.shape[0] for s in cohort.subjects)
    print(f"wrote cohort: {len(cohort.subjects)} subjects, "
          f"{n_trials} trials, fs={cohort.fs:g} Hz -> {out}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    cohort, channels, samples = _load_data(args.data)
    model_cfg, train_cfg = _resolve_configs(args, channels, samples)
    if args.target not in cohort.subject_ids():
        raise CliError(f"unknown target subject {args.target!r}; "
                       f"cohort has {cohort.subject_ids()}")
    start = time.time()
    result, params = run_fold(cohort, model_cfg, train_cfg, args.target)
    write_run_dir(args.out, model_cfg, train_cfg, [result], [params])
    acc = result.metrics.accuracy
    print(f"fold {args.target}: accuracy={100 * acc:.2f}% "
          f"kappa={result.metrics.kappa:.4f} "
          f"({time.time() - start:.1f}s) -> {args.out}")
    return 0


def _cmd_loso(args: argparse.Namespace) -> int:
    cohort, channels, samples = _load_data(args.data)
    model_cfg, train_cfg = _resolve_configs(args, channels, samples)
    if args.workers < 1:
        raise CliError("workers must be a positive integer")
    start = time.time()
    results, summary = run_loso(cohort, model_cfg, train_cfg,
                                out_dir=args.out, workers=args.workers)
    print(f"loso over {len(results)} subjects: "
          f"accuracy {summary['accuracy']} "
          f"({time.time() - start:.1f}s) -> {args.out}")
    return 0


def gradient_suite(seed: int = 0, eps: float = 1e-5):
    """Finite-difference audit of the full model loss on a tiny geometry."""
    tok = TokenizerConfig(channels=4, samples=120, embed_dim=8,
                          temporal_filters=2)
    cfg = ModelConfig(tokenizer=tok, depth=1, n_state=4, dropout=0.0)
    cfg.validate()
    params = init_model_params(cfg, seed=seed)
    rng = np.random.default_rng([seed, 909])
    x = Tensor(rng.standard_normal((2, 4, 120)))
    onehot = np.zeros((2, cfg.n_classes))
    onehot[0, 0] = 1.0
    onehot[1, 1] = 1.0

    def loss_fn():
        logits = model_logits(x, cfg, params, train=False)
        return cross_entropy(logits, Tensor(onehot))

    return check_gradients(loss_fn, params, eps=eps, samples_per_param=None,
                           seed=seed)


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    start = time.time()
    report = gradient_suite(seed=args.seed)
    print(f"gradcheck: {report.n_checked} coordinates, "
          f"max rel err {report.max_rel_err:.3e} "
          f"(worst: {report.worst_param}), {time.time() - start:.1f}s")
    return 0 if report.ok else 2


def _read_run_metrics(run_dir: Path) -> dict[str, dict[str, float]]:
    """Per-subject metric dicts from one run directory."""
    if not run_dir.exists():
        raise CliError(f"run directory not found: {run_dir}")
    per_subject: dict[str, dict[str, float]] = {}
    for fold in sorted(run_dir.glob("fold_*")):
        metrics_path = fold / "metrics.json"
        if not metrics_path.exists():
            continue
        data = json.loads(metrics_path.read_text(encoding="utf-8"))
        per_subject[fold.name[len("fold_"):]] = {
            k: float(data["metrics"][k]) for k in METRIC_NAMES}
    if not per_subject:
        raise CliError(f"no fold_*/metrics.json under {run_dir}")
    return per_subject


def _cmd_report(args: argparse.Namespace) -> int:
    runs = [(Path(r), _read_run_metrics(Path(r))) for r in args.runs]
    name_width = max(len(str(p)) for p, _ in runs)
    header = f"{'run':<{name_width}}  " + "  ".join(
        f"{m:>13}" for m in METRIC_NAMES)
    print(header)
    for path, table in runs:
        cells = []
        for metric in METRIC_NAMES:
            values = [table[s][metric] for s in sorted(table)]
            cells.append(f"{format_mean_std(values):>13}")
        print(f"{str(path):<{name_width}}  " + "  ".join(cells))

    if len(runs) == 2:
        (path_a, table_a), (path_b, table_b) = runs
        shared = sorted(set(table_a) & set(table_b))
        if not shared:
            raise CliError(f"runs {path_a} and {path_b} share no subjects")
        a = [table_a[s]["accuracy"] for s in shared]
        b = [table_b[s]["accuracy"] for s in shared]
        try:
            stat, p_value = wilcoxon_signed_rank(a, b)
            print(f"wilcoxon accuracy ({len(shared)} paired subjects): "
                  f"W={stat:g} p={p_value:.6f}")
        except ValueError as exc:
            print(f"wilcoxon accuracy: not defined ({exc})")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed its own diagnostic
        return 0 if exc.code in (0, None) else 1
    handlers = {
        "synth": _cmd_synth,
        "train": _cmd_train,
        "loso": _cmd_loso,
        "gradcheck": _cmd_gradcheck,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except (CliError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - boundary of the process
        print(f"runtime failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
