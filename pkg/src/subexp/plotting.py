"""Optional figure of a series run: terms and partial sums against n, one line per eps."""

from __future__ import annotations

import csv
from pathlib import Path

from .experiments import SeriesDiagnostics, _fmt


def emit_plotdata(diag: SeriesDiagnostics, path) -> None:
    """Write ``eps,n,term,partial_sum`` rows, the data behind :func:`render_series`."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("eps", "n", "term", "partial_sum"))
        for row in diag.rows:
            writer.writerow((_fmt(row.eps), row.n, _fmt(row.term), _fmt(row.partial_sum)))


def render_series(diag: SeriesDiagnostics, path) -> Path:
    """Render a two-panel PNG; log axes, zero terms are dropped from the left panel."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_t, ax_s) = plt.subplots(1, 2, figsize=(9, 3.6))
    for summary in diag.summaries:
        rows = diag.per_eps(summary.eps)
        label = f"eps={summary.eps:g} ({summary.verdict})"
        pts = [(r.n, r.term) for r in rows if r.term > 0]
        if pts:
            ax_t.plot(*zip(*pts), marker="o", label=label)
        ax_s.plot([r.n for r in rows], [r.partial_sum for r in rows], marker="o", label=label)
    ax_t.set(xscale="log", yscale="log", xlabel="n", ylabel="term", title="terms")
    ax_s.set(xscale="log", xlabel="n", ylabel="partial sum", title="block partial sums")
    ax_s.legend(fontsize="small")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
