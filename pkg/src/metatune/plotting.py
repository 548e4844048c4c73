"""Figures for comparison reports."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

LABELS = {
    "correct": "Correct",
    "correct_unconfirmed": "Correct-Unconfirmed",
    "incorrect": "Incorrect",
    "unknown": "Unknown",
    "timeout": "Timeout",
}


def plot_report(report, path, buckets=("correct", "correct_unconfirmed", "incorrect"),
                tool_labels=None):
    """Grouped bar chart of bucket counts per tool, written to ``path``."""
    tool_labels = tool_labels or {"default": "backend (default flags)",
                                  "predicted": "predicted flags"}
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / len(report.tools)
    xs = range(len(buckets))
    for k, tool in enumerate(report.tools):
        heights = [report.counts[tool][b] for b in buckets]
        offset = (k - (len(report.tools) - 1) / 2) * width
        bars = ax.bar([x + offset for x in xs], heights, width, label=tool_labels.get(tool, tool))
        ax.bar_label(bars, padding=2, fontsize=8)
    n = len(report.pairs)
    ax.axhline(n, color="black", linestyle="--", linewidth=1, label="benchmarks")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([LABELS[b] for b in buckets])
    ax.set_ylabel("Number of benchmarks")
    ax.set_ylim(0, max(1, n) * 1.15)
    ax.yaxis.grid(True, alpha=0.4)
    ax.set_axisbelow(True)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
