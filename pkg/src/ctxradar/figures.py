"""Figure rendering for the sweep report.

Curves of anchor count and overlap against the threshold, one line per
decay-factor pair, written as PNG files next to the delimited output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_sweep_figures(rows: list[dict], out_dir: str | Path) -> list[Path]:
    """Render one figure per sweep metric; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series: dict[tuple[float, float], list[dict]] = {}
    for row in rows:
        series.setdefault((row["lambda_s"], row["lambda_t"]), []).append(row)
    for group in series.values():
        group.sort(key=lambda r: r["theta"])

    written: list[Path] = []
    for metric, ylabel, filename in (
        ("anchors", "anchor count", "sweep_anchor_counts.png"),
        ("jaccard_vs_default", "overlap with default selection", "sweep_overlap.png"),
    ):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for (lam_s, lam_t), group in sorted(series.items()):
            ax.plot(
                [r["theta"] for r in group],
                [r[metric] for r in group],
                marker="o",
                label=f"$\\lambda_s$={lam_s:g}, $\\lambda_t$={lam_t:g}",
            )
        ax.set_xlabel("threshold")
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out / filename
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
