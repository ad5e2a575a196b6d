"""Static SVG charts for bound reports and epsilon sweeps."""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# keep SVG output reproducible across runs
plt.rcParams["svg.hashsalt"] = "marginbound"

_INTERVAL_KW = dict(color="tab:blue", linewidth=2.2, solid_capstyle="butt")


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _limits(rows) -> tuple[float, float]:
    """Unit interval, stretched when values (e.g. ATEs) fall outside it."""
    values = [0.0, 1.0]
    for r in rows:
        values.extend(v for v in (r.get("lower"), r.get("upper"), r.get("true_value")) if v is not None)
    return min(values) - 0.05, max(values) + 0.05


def save_bounds_chart(rows: Sequence[Mapping], path, title: str = "") -> None:
    """Interval chart: one vertical segment per query, stars at true values.

    Each row needs ``label``, ``lower``, ``upper``, ``status`` and may
    carry ``true_value``.  Infeasible or errored rows are marked with a
    red cross.
    """
    fig, ax = plt.subplots(figsize=(max(6.0, 0.45 * len(rows) + 2.0), 4.0))
    for k, row in enumerate(rows):
        if row.get("lower") is not None and row.get("upper") is not None:
            ax.plot([k, k], [row["lower"], row["upper"]], **_INTERVAL_KW)
            ax.plot([k], [row["lower"]], marker="_", color="tab:blue", markersize=9)
            ax.plot([k], [row["upper"]], marker="_", color="tab:blue", markersize=9)
        else:
            ax.plot([k], [0.5], marker="x", color="tab:red", markersize=8)
        tv = row.get("true_value")
        if tv is not None:
            ax.plot([k], [tv], marker="*", color="tab:orange", markersize=9, linestyle="none")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels([r["label"] for r in rows], rotation=90, fontsize=7)
    ax.set_ylim(*_limits(rows))
    ax.set_ylabel("bound value")
    if title:
        ax.set_title(title)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def save_sweep_chart(
    per_query: Mapping[str, Sequence[Mapping]], path, x_label: str = "epsilon", title: str = ""
) -> None:
    """Bounds against a shrinking epsilon, one panel per query.

    ``per_query`` maps a query label to rows with ``x`` (the epsilon grid
    coordinate), ``lower``/``upper`` (None when infeasible) and optional
    ``true_value``.
    """
    n = max(1, len(per_query))
    fig, axes = plt.subplots(n, 1, figsize=(6.5, 2.6 * n), squeeze=False)
    for ax, (label, rows) in zip(axes[:, 0], sorted(per_query.items())):
        xs = [r["x"] for r in rows]
        feas = [r for r in rows if r.get("lower") is not None]
        infeas = [r for r in rows if r.get("lower") is None]
        if feas:
            fx = [r["x"] for r in feas]
            ax.fill_between(fx, [r["lower"] for r in feas], [r["upper"] for r in feas],
                            alpha=0.25, color="tab:blue")
            ax.plot(fx, [r["lower"] for r in feas], color="tab:blue", linewidth=1.4)
            ax.plot(fx, [r["upper"] for r in feas], color="tab:blue", linewidth=1.4)
        if infeas:
            ax.scatter([r["x"] for r in infeas], [0.0] * len(infeas),
                       marker="x", color="tab:red", zorder=3, label="infeasible")
        tv = next((r.get("true_value") for r in rows if r.get("true_value") is not None), None)
        if tv is not None:
            ax.axhline(tv, color="tab:orange", linestyle=":", linewidth=1.2)
        ax.set_ylim(*_limits(rows))
        ax.set_title(label, fontsize=9)
        ax.set_xlabel(x_label, fontsize=8)
        ax.grid(alpha=0.3)
        if xs and xs[0] > xs[-1]:
            ax.invert_xaxis()
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    _save(fig, path)
