"""Figures for the ``report`` subcommand, rendered off-screen next to the CSV tables."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# no timestamps or version strings in the files
PNG_META = {"Software": None}


def read_table(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def plot_error_positions(rows: list[dict], out_path) -> Path:
    """One line per video, a marker wherever C1 (upper) or C2 (lower) is flagged."""
    videos = list(dict.fromkeys(r["video_id"] for r in rows))
    fig, ax = plt.subplots(figsize=(8, 0.35 * max(len(videos), 4) + 1))
    for y, vid in enumerate(videos):
        mine = [r for r in rows if r["video_id"] == vid]
        c1 = [int(r["frame_index"]) for r in mine if r["c1_flag"] == "1"]
        c2 = [int(r["frame_index"]) for r in mine if r["c2_flag"] == "1"]
        n = max((int(r["frame_index"]) for r in mine), default=0)
        ax.hlines(y, 0, n, color="0.85", lw=0.8)
        ax.plot(c1, [y - 0.15] * len(c1), "v", color="tab:red", ms=4, label="C1" if y == 0 else None)
        ax.plot(c2, [y + 0.15] * len(c2), "^", color="tab:blue", ms=4, label="C2" if y == 0 else None)
    ax.set_yticks(range(len(videos)))
    ax.set_yticklabels(videos, fontsize=7)
    ax.set_xlabel("frame")
    ax.invert_yaxis()
    if videos:
        ax.legend(loc="upper left", bbox_to_anchor=(1.0, 1.0), fontsize=7, frameon=False)
    ax.set_title("Detected error positions")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=100, metadata=PNG_META)
    plt.close(fig)
    return out_path


def plot_metrics(rows: list[dict], out_path) -> Path:
    """Pre vs post mean (with std bars) for every metric that has values."""
    rows = [r for r in rows if r["pre_mean"] not in ("", "nan")]
    names = [r["metric"] for r in rows]
    pre = [float(r["pre_mean"]) for r in rows]
    post = [float(r["post_mean"]) for r in rows]
    pre_sd = [float(r["pre_std"]) for r in rows]
    post_sd = [float(r["post_std"]) for r in rows]
    fig, ax = plt.subplots(figsize=(max(4, 0.7 * len(names) + 2), 3.5))
    x = range(len(names))
    ax.bar([i - 0.2 for i in x], pre, 0.4, yerr=pre_sd, label="pre", color="0.6", capsize=2)
    ax.bar([i + 0.2 for i in x], post, 0.4, yerr=post_sd, label="post", color="tab:green", capsize=2)
    for i, r in enumerate(rows):
        imp = float(r["improvement_pct"]) if r["improvement_pct"] not in ("",) else math.nan
        if math.isfinite(imp):
            ax.annotate(f"{imp:.0f}%", (i, max(pre[i], post[i])), ha="center", va="bottom", fontsize=7)
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("pixels")
    ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=100, metadata=PNG_META)
    plt.close(fig)
    return out_path
