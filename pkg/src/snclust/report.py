"""Figure rendering for pipeline artifacts.

Each renderer writes a PNG and a CSV with the plotted numbers next to it,
so downstream tooling can consume either. Matplotlib runs on the Agg
backend; outputs are deterministic for identical inputs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import DataFormatError


def _finish(fig, out_png: Path) -> None:
    fig.tight_layout()
    fig.savefig(out_png, dpi=120, metadata={"Software": "snclust"})
    plt.close(fig)


def render_estimate_scan(estimate: dict, out_dir: Path) -> list[Path]:
    """Merge-scan curves: held-out accuracy, silhouette, and the joint score."""
    scan = estimate.get("scan", [])
    if not scan:
        raise DataFormatError("estimate report has no scan trace")
    counts = [row["count"] for row in scan]
    acc = [row["acc_val"] for row in scan]
    sil = [row["sil_u"] for row in scan]
    joint = [row["s_scaled"] for row in scan]

    out_png = out_dir / "estimate_scan.png"
    out_csv = out_dir / "estimate_scan.csv"
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(counts, acc, label="labelled accuracy (held-out)", color="tab:blue")
    ax.plot(counts, sil, label="unlabelled silhouette", color="tab:orange")
    ax.plot(counts, joint, label="joint score (scaled)", color="tab:green", lw=2)
    ax.axvline(estimate["k"], color="tab:red", ls="--", label=f"estimate k={estimate['k']}")
    ax.invert_xaxis()  # merging proceeds right to left
    ax.set_xlabel("cluster count")
    ax.set_ylabel("score")
    ax.legend(fontsize=8)
    _finish(fig, out_png)

    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["count", "acc_val", "sil_u", "s_scaled"])
        for row in scan:
            writer.writerow([row["count"], repr(row["acc_val"]), repr(row["sil_u"]), repr(row["s_scaled"])])
    return [out_png, out_csv]


def render_hierarchy(hierarchy: dict, out_dir: Path, purity_per_level=None) -> list[Path]:
    """Cluster counts per level, with per-level purity when available."""
    counts = hierarchy.get("counts")
    if not counts:
        raise DataFormatError("hierarchy report has no level counts")
    levels = list(range(len(counts)))

    out_png = out_dir / "hierarchy_levels.png"
    out_csv = out_dir / "hierarchy_levels.csv"
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    ax.plot(levels, counts, marker="o", color="tab:blue", label="cluster count")
    ax.set_yscale("log")
    ax.set_xlabel("level")
    ax.set_ylabel("clusters")
    if purity_per_level is not None:
        ax2 = ax.twinx()
        ax2.plot(levels, purity_per_level, marker="s", color="tab:orange", label="purity")
        ax2.set_ylabel("purity")
        ax2.set_ylim(0.0, 1.05)
    ax.legend(loc="upper right", fontsize=8)
    _finish(fig, out_png)

    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["level", "count"] + (["purity"] if purity_per_level is not None else [])
        writer.writerow(header)
        for lvl in levels:
            row = [lvl, counts[lvl]]
            if purity_per_level is not None:
                row.append(repr(purity_per_level[lvl]))
            writer.writerow(row)
    return [out_png, out_csv]


def render_eval(report: dict, out_dir: Path) -> list[Path]:
    """Bar chart of the accuracy breakdown."""
    names = ["acc_all", "acc_seen", "acc_unseen"]
    values = [report.get(name) for name in names]
    pairs = [(n, v) for n, v in zip(names, values) if v is not None]

    out_png = out_dir / "eval_accuracy.png"
    out_csv = out_dir / "eval_accuracy.csv"
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.bar([n for n, _ in pairs], [v for _, v in pairs], color="tab:blue")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    _finish(fig, out_png)

    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for name, value in pairs:
            writer.writerow([name, repr(value)])
    return [out_png, out_csv]


def render_bench(bench: dict, out_dir: Path) -> list[Path]:
    """Runtime comparison bars."""
    entries = [
        ("hierarchical assign", bench["snc"]["seconds"]),
        ("semi-supervised k-means", bench["semi_kmeans"]["seconds"]),
    ]
    out_png = out_dir / "bench_runtimes.png"
    out_csv = out_dir / "bench_runtimes.csv"
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar([n for n, _ in entries], [v for _, v in entries], color=["tab:green", "tab:gray"])
    ax.set_ylabel("seconds")
    ax.set_title(f"speed ratio {bench['speed_ratio']:.2f}x")
    _finish(fig, out_png)

    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "seconds"])
        for name, value in entries:
            writer.writerow([name, repr(value)])
    return [out_png, out_csv]
