"""Command-line surface for the clustering pipeline.

Subcommands: gen-blobs, cluster, estimate-k, assign, eval, pseudo, loss,
bench, report. All JSON artifacts embed the resolved configuration and are
byte-identical across repeated runs with the same flags and seeds. Errors
print machine-readable JSON to stderr; exit codes are 0 (success),
2 (usage), 3 (data error), 4 (constraint error).
"""

from __future__ import annotations

import argparse
import csv
import json
import resource
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from .baselines import finch, kmeans, semi_kmeans
from .data import (
    GcdDataset,
    l2_normalize,
    load_features,
    load_labels,
    save_features,
    save_labels,
)
from .errors import ConstraintError, DataFormatError, SnclustError
from .estimate import EstimateConfig, assign_labels, estimate_k
from .losses import Batch, LossConfig, build_positive_sets, skipped_counts, sup_con_loss, total_loss, unified_loss
from .metrics import clustering_accuracy, purity
from .snc import ChainConfig, OverclusterWarning, pseudo_labels, run_snc
from .synth import gen_blobs

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CONSTRAINT = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error(EXIT_USAGE, "usage", message)
        raise SystemExit(EXIT_USAGE)


def _emit_error(code: int, kind: str, message) -> None:
    json.dump({"error": {"code": code, "kind": kind, "message": str(message)}}, sys.stderr)
    sys.stderr.write("\n")


def _config_of(args: argparse.Namespace) -> dict:
    # threads is excluded: outputs are thread-count-invariant by contract,
    # so artifacts stay byte-identical across --threads values
    skip = {"func", "threads"}
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in skip:
            continue
        out[key] = str(value) if isinstance(value, Path) else value
    return out


def _write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_assignment_csv(path, assignment: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "cluster"])
        for i, c in enumerate(assignment):
            writer.writerow([i, int(c)])


def _read_id_csv(path, value_column: str) -> dict[int, int]:
    """Read an `index,<value>` CSV into a dict without remapping ids."""
    out: dict[int, int] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataFormatError(f"{path}: empty file")
        if [tok.strip().lower() for tok in header] != ["index", value_column]:
            raise DataFormatError(f"{path}, line 1: expected header 'index,{value_column}'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataFormatError(f"{path}, line {lineno}: expected 2 columns")
            try:
                idx, val = int(row[0]), int(row[1])
            except ValueError:
                raise DataFormatError(f"{path}, line {lineno}: non-integer value")
            if idx in out:
                raise DataFormatError(f"{path}, line {lineno}: duplicate index {idx}")
            out[idx] = val
    return out


def _load_dataset(args) -> GcdDataset:
    features = l2_normalize(load_features(args.features, args.format))
    labels = load_labels(args.labels, features.n) if args.labels else None
    return GcdDataset(features, labels)


def _chain_config(args) -> ChainConfig:
    return ChainConfig(
        rule=args.rule,
        fixed_len=args.fixed_len,
        max_levels=args.max_levels,
    )


def _add_dataset_args(sub, labels_required=False):
    sub.add_argument("--features", required=True, type=Path, help="feature file")
    sub.add_argument(
        "--format", choices=["binary", "csv"], default="binary", help="feature file format"
    )
    sub.add_argument(
        "--labels",
        type=Path,
        required=labels_required,
        help="label CSV (index,label); omit for fully unlabelled data",
    )


def _add_chain_args(sub):
    sub.add_argument(
        "--rule", choices=["sqrt", "cbrt", "half", "fixed"], default="sqrt",
        help="chain-length rule for labelled clusters",
    )
    sub.add_argument("--fixed-len", type=int, default=None, help="chain length for --rule fixed")
    sub.add_argument("--max-levels", type=int, default=None, help="cap on hierarchy depth")


def _add_threads_arg(sub):
    sub.add_argument(
        "--threads", type=int, default=1,
        help="worker count (recorded for provenance; results never depend on it)",
    )


def _check_threads(args) -> None:
    if getattr(args, "threads", 1) < 1:
        raise ConstraintError("--threads must be >= 1")


# ---------------------------------------------------------------- commands


def cmd_gen_blobs(args) -> int:
    blobs = gen_blobs(
        classes=args.classes,
        seen=args.seen,
        per_class=args.per_class,
        dim=args.dim,
        sigma=args.sigma,
        seed=args.seed,
        labelled_per_seen=args.labelled_per_seen,
    )
    prefix = args.out
    prefix.parent.mkdir(parents=True, exist_ok=True)
    save_features(blobs.features, f"{prefix}.features.bin", fmt="binary")
    save_labels(blobs.labels, f"{prefix}.labels.csv")
    with open(f"{prefix}.truth.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "label"])
        for i, lab in enumerate(blobs.truth):
            writer.writerow([i, int(lab)])
    _write_json(
        f"{prefix}.meta.json",
        {
            "command": "gen-blobs",
            "config": _config_of(args),
            "n": blobs.features.n,
            "dim": blobs.features.d,
            "seen_classes": blobs.seen_classes,
        },
    )
    return 0


def cmd_cluster(args) -> int:
    _check_threads(args)
    ds = _load_dataset(args)
    cfg = _chain_config(args)
    if args.algo == "finch":
        hierarchy = finch(ds.features, max_levels=args.max_levels)
    else:
        hierarchy = run_snc(ds, cfg)
    payload = {
        "command": "cluster",
        "config": _config_of(args),
        "hierarchy": hierarchy.to_json_dict(),
    }
    if args.truth:
        truth_map = _read_id_csv(args.truth, "label")
        missing = [i for i in range(ds.n) if i not in truth_map]
        if missing:
            raise DataFormatError(f"{args.truth}: no label for index {missing[0]}")
        truth = np.array([truth_map[i] for i in range(ds.n)], dtype=np.int64)
        payload["purity_per_level"] = [
            purity(p.assignment, truth) for p in hierarchy.levels
        ]
    _write_json(args.out, payload)
    return 0


def cmd_estimate_k(args) -> int:
    _check_threads(args)
    ds = _load_dataset(args)
    estimate = estimate_k(
        ds,
        EstimateConfig(
            ratio=args.ratio,
            seed=args.seed,
            silhouette_cap=args.sil_cap,
            band_multiplier=args.band_mult,
        ),
        _chain_config(args),
    )
    _write_json(
        args.out,
        {
            "command": "estimate-k",
            "config": _config_of(args),
            "estimate": estimate.to_json_dict(),
        },
    )
    return 0


def cmd_assign(args) -> int:
    _check_threads(args)
    ds = _load_dataset(args)
    if args.algo == "snc":
        assignment = assign_labels(ds, args.k, _chain_config(args))
    elif args.algo == "kmeans":
        assignment = kmeans(ds.features, args.k, seed=args.seed, iters=args.iters)
    else:
        assignment = semi_kmeans(ds, args.k, seed=args.seed, iters=args.iters)
    _write_assignment_csv(args.out, assignment)
    return 0


def cmd_eval(args) -> int:
    pred_map = _read_id_csv(args.pred, "cluster")
    truth_map = _read_id_csv(args.truth, "label")
    eval_idx = sorted(pred_map)
    missing = [i for i in eval_idx if i not in truth_map]
    if missing:
        raise DataFormatError(f"truth file lacks index {missing[0]} present in predictions")
    pred = np.array([pred_map[i] for i in eval_idx], dtype=np.int64)
    truth = np.array([truth_map[i] for i in eval_idx], dtype=np.int64)
    seen = [int(tok) for tok in args.seen.split(",") if tok.strip() != ""] if args.seen else None
    report = clustering_accuracy(pred, truth, seen_classes=seen)
    _write_json(
        f"{args.out}.json",
        {"command": "eval", "config": _config_of(args), "report": report.to_json_dict()},
    )
    with open(f"{args.out}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerows(report.to_csv_rows())
    return 0


def cmd_pseudo(args) -> int:
    _check_threads(args)
    ds = _load_dataset(args)
    hierarchy = run_snc(ds, _chain_config(args))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", OverclusterWarning)
        assignment = pseudo_labels(hierarchy, args.level)
    _write_assignment_csv(args.out, assignment)
    for w in caught:
        if issubclass(w.category, OverclusterWarning):
            sys.stderr.write(f"warning: {w.message}\n")
    return 0


def cmd_loss(args) -> int:
    ds = _load_dataset(args)
    with open(args.batch) as fh:
        spec = json.load(fh)
    if "indices" not in spec or "pseudo" not in spec:
        raise DataFormatError(f"{args.batch}: batch spec needs 'indices' and 'pseudo' arrays")
    if len(spec["indices"]) != len(spec["pseudo"]):
        raise DataFormatError(f"{args.batch}: 'indices' and 'pseudo' lengths differ")
    batch = Batch.from_dataset(ds, np.asarray(spec["indices"]), np.asarray(spec["pseudo"]))
    cfg = LossConfig(tau_s=args.tau_s, tau_a=args.tau_a, tau_u=args.tau_u)
    sets = build_positive_sets(batch)
    loss_all, loss_sup, combined = total_loss(batch, sets, cfg)
    payload = {
        "command": "loss",
        "config": _config_of(args),
        "loss": {
            "all_term_sum": loss_all,
            "labelled_term_sum": loss_sup,
            "total": combined,
            "all_term_mean": sup_con_loss(batch, sets.pseudo_sets, "all", cfg.tau_a),
            "labelled_term_mean": sup_con_loss(batch, sets.true_sets, "labelled_only", cfg.tau_s),
            "unified_mean": unified_loss(batch, sets, cfg),
            "skipped": skipped_counts(batch, sets),
            "batch_size": batch.size,
        },
    }
    _write_json(args.out, payload)
    return 0


def _rss_mb() -> float:
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def cmd_bench(args) -> int:
    _check_threads(args)
    if args.features:
        ds = _load_dataset(args)
    else:
        blobs = gen_blobs(
            classes=args.classes,
            seen=args.seen,
            per_class=args.per_class,
            dim=args.dim,
            sigma=args.sigma,
            seed=args.seed,
            labelled_per_seen=args.labelled_per_seen,
        )
        ds = GcdDataset(blobs.features, blobs.labels)
    k = args.k if args.k is not None else max(ds.n_labelled_classes, 2)

    t0 = time.perf_counter()
    snc_assignment = assign_labels(ds, k, _chain_config(args))
    snc_seconds = time.perf_counter() - t0
    snc_rss = _rss_mb()

    t0 = time.perf_counter()
    semi_assignment = semi_kmeans(ds, k, seed=args.seed, iters=args.iters)
    semi_seconds = time.perf_counter() - t0
    semi_rss = _rss_mb()

    payload = {
        "command": "bench",
        "config": _config_of(args),
        "dataset": {"n": ds.n, "d": ds.d, "labelled_classes": ds.n_labelled_classes},
        "k": k,
        "snc": {
            "seconds": snc_seconds,
            "max_rss_mb": snc_rss,
            "clusters": int(np.unique(snc_assignment).size),
        },
        "semi_kmeans": {
            "seconds": semi_seconds,
            "max_rss_mb": semi_rss,
            "clusters": int(np.unique(semi_assignment).size),
        },
        "speed_ratio": semi_seconds / snc_seconds,
    }
    _write_json(args.out, payload)
    return 0


def cmd_report(args) -> int:
    from . import report as report_mod  # matplotlib import deferred to this path

    out_dir = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    produced: list[Path] = []
    if args.estimate:
        with open(args.estimate) as fh:
            payload = json.load(fh)
        produced += report_mod.render_estimate_scan(payload["estimate"], out_dir)
    if args.hierarchy:
        with open(args.hierarchy) as fh:
            payload = json.load(fh)
        produced += report_mod.render_hierarchy(
            payload["hierarchy"], out_dir, purity_per_level=payload.get("purity_per_level")
        )
    if args.eval:
        with open(args.eval) as fh:
            payload = json.load(fh)
        produced += report_mod.render_eval(payload["report"], out_dir)
    if args.bench:
        with open(args.bench) as fh:
            payload = json.load(fh)
        produced += report_mod.render_bench(payload, out_dir)
    if not produced:
        raise ConstraintError("report: pass at least one of --estimate/--hierarchy/--eval/--bench")
    for path in produced:
        sys.stdout.write(f"{path}\n")
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="snclust", description="semi-supervised hierarchical clustering toolkit")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("gen-blobs", help="generate synthetic sphere blobs with ground truth")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--seen", type=int, required=True, help="number of classes with labels")
    p.add_argument("--per-class", type=int, required=True, help="unlabelled instances per class")
    p.add_argument(
        "--labelled-per-seen", type=int, default=None,
        help="labelled instances per seen class (default: per-class // 2)",
    )
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--sigma", type=float, required=True, help="pre-normalization noise scale")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="output path prefix")
    p.set_defaults(func=cmd_gen_blobs)

    p = sub.add_parser("cluster", help="build the full hierarchy")
    _add_dataset_args(p)
    _add_chain_args(p)
    _add_threads_arg(p)
    p.add_argument("--algo", choices=["snc", "finch"], default="snc")
    p.add_argument("--truth", type=Path, default=None, help="truth CSV for per-level purity")
    p.add_argument("--out", type=Path, required=True, help="hierarchy JSON path")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("estimate-k", help="estimate the class number")
    _add_dataset_args(p, labels_required=True)
    _add_chain_args(p)
    _add_threads_arg(p)
    p.add_argument("--ratio", type=float, default=0.8, help="labelled train fraction")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sil-cap", type=int, default=5000, help="silhouette subsample cap")
    p.add_argument("--band-mult", type=float, default=None, help="merge-band cap multiplier")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_estimate_k)

    p = sub.add_parser("assign", help="produce a k-cluster assignment")
    _add_dataset_args(p)
    _add_chain_args(p)
    _add_threads_arg(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--algo", choices=["snc", "kmeans", "semi-kmeans"], default="snc")
    p.add_argument("--seed", type=int, default=0, help="seed for the k-means baselines")
    p.add_argument("--iters", type=int, default=300, help="iteration cap for the baselines")
    p.add_argument("--out", type=Path, required=True, help="assignment CSV path")
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("eval", help="clustering accuracy against ground truth")
    p.add_argument("--pred", type=Path, required=True, help="assignment CSV (index,cluster)")
    p.add_argument("--truth", type=Path, required=True, help="truth CSV (index,label)")
    p.add_argument("--seen", type=str, default=None, help="comma-separated seen class ids")
    p.add_argument("--out", type=Path, required=True, help="report path prefix (.json/.csv)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pseudo", help="pseudo-label assignment from one hierarchy level")
    _add_dataset_args(p)
    _add_chain_args(p)
    _add_threads_arg(p)
    p.add_argument("--level", type=int, default=3, help="hierarchy level (clamped to the top)")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_pseudo)

    p = sub.add_parser("loss", help="evaluate contrastive losses on a batch spec")
    _add_dataset_args(p)
    p.add_argument("--batch", type=Path, required=True, help="batch spec JSON (indices, pseudo)")
    p.add_argument("--tau-s", type=float, default=0.07)
    p.add_argument("--tau-a", type=float, default=0.1)
    p.add_argument("--tau-u", type=float, default=0.1)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("bench", help="runtime comparison: hierarchical assign vs semi-kmeans")
    p.add_argument("--features", type=Path, default=None)
    p.add_argument("--format", choices=["binary", "csv"], default="binary")
    p.add_argument("--labels", type=Path, default=None)
    p.add_argument("--classes", type=int, default=100)
    p.add_argument("--seen", type=int, default=50)
    p.add_argument("--per-class", type=int, default=250)
    p.add_argument("--labelled-per-seen", type=int, default=100)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--sigma", type=float, default=0.6, help="noise scale; default gives realistic class overlap")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=None, help="target clusters (default: labelled classes)")
    p.add_argument("--iters", type=int, default=300)
    _add_chain_args(p)
    _add_threads_arg(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="render figures and CSVs from pipeline artifacts")
    p.add_argument("--estimate", type=Path, default=None, help="estimate-k JSON")
    p.add_argument("--hierarchy", type=Path, default=None, help="cluster JSON")
    p.add_argument("--eval", type=Path, default=None, help="eval JSON")
    p.add_argument("--bench", type=Path, default=None, help="bench JSON")
    p.add_argument("--out-dir", type=Path, required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except DataFormatError as exc:
        _emit_error(EXIT_DATA, "data", exc)
        return EXIT_DATA
    except ConstraintError as exc:
        _emit_error(EXIT_CONSTRAINT, "constraint", exc)
        return EXIT_CONSTRAINT
    except SnclustError as exc:
        _emit_error(EXIT_DATA, "error", exc)
        return EXIT_DATA
    except (OSError, json.JSONDecodeError) as exc:
        _emit_error(EXIT_DATA, "io", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
