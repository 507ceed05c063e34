"""Report figures and delimited output for the stage comparison."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

CSV_FIELDS = ("name", "mean_delta_e", "median_delta_e", "bk_accuracy", "n")


def stage_rows_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{r[k]:.6f}" if isinstance(r[k], float) else r[k]) for k in CSV_FIELDS})
    return buf.getvalue()


def write_stage_csv(rows: list[dict], path) -> None:
    Path(path).write_text(stage_rows_csv(rows), encoding="utf-8")


def stage_figure(rows: list[dict], path, title: str | None = None) -> None:
    """Two panels: mean/median CIEDE2000 per row, and family accuracy per row."""
    names = [r["name"].replace("_", "\n") for r in rows]
    x = range(len(rows))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax1.bar([i - 0.2 for i in x], [r["mean_delta_e"] for r in rows], width=0.4, label="mean")
    ax1.bar([i + 0.2 for i in x], [r["median_delta_e"] for r in rows], width=0.4, label="median")
    ax1.set_ylabel("CIEDE2000")
    ax1.legend(frameon=False)
    ax2.bar(list(x), [100 * r["bk_accuracy"] for r in rows], color="0.4")
    ax2.set_ylabel("family accuracy (%)")
    ax2.set_ylim(0, 100)
    for ax in (ax1, ax2):
        ax.set_xticks(list(x))
        ax.set_xticklabels(names, fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    # Fixed metadata keeps the PNG bytes stable across runs.
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
