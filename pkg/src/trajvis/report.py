"""Static figure rendering for offline review bundles.

Renders the four panels (indicator trends, trajectory map, indicator
glyph timeline, analysis view) to PNG files next to the exported JSON.
Colors follow the fixed trajectory hue convention (healthy green, late
blue, fast orange); PNG metadata is stripped so re-exports are
byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from trajvis.cdm.types import Cohort
from trajvis.enrichment import EnrichmentReport
from trajvis.model import TrajectoryModel
from trajvis.views import analysis_bundle, indicator_glyphs, patient_series, trajectory_map

TRAJECTORY_COLORS = {
    "healthy": "#2ca02c",
    "late_progression": "#1f77b4",
    "fast_progression": "#ff7f0e",
}
_UNDETERMINED_COLOR = "#b0b0b0"
_BAND_COLORS = {"below": "#d62728", "above": "#9467bd", "normal": "#555555"}

_SAVE_KW = dict(dpi=110, metadata={"Software": None})


def _plot_profile(ax, cohort: Cohort, patient_id: str, codes: list[str]) -> None:
    series = patient_series(cohort, patient_id, codes)
    axes = [ax, ax.twinx()] if len(series) == 2 else [ax]
    for s, axis, color in zip(series, axes, ("tab:blue", "tab:red")):
        if not s.points:
            continue
        ages = [p[0] for p in s.points]
        values = [p[1] for p in s.points]
        axis.plot(ages, values, color=color, lw=1.2, label=s.feature_code)
        abnormal = [(a, v) for a, v, band in s.points if band != "normal"]
        if abnormal:
            axis.scatter(*zip(*abnormal), color=_BAND_COLORS["below"], s=18, zorder=3)
        axis.set_ylabel(s.feature_code, color=color)
    ax.set_xlabel("age (years)")
    ax.set_title(f"indicators: {', '.join(codes)}")


def _plot_map(ax, model: TrajectoryModel, cohort: Cohort, patient_id: str | None) -> None:
    payload = trajectory_map(model, cohort, "age", highlight_patient=patient_id)
    xs = [v["x"] for v in payload["visits"]]
    ys = [v["y"] for v in payload["visits"]]
    ages = [v["value"] for v in payload["visits"]]
    sc = ax.scatter(xs, ys, c=ages, cmap="viridis", s=4, alpha=0.5, linewidths=0)
    plt.colorbar(sc, ax=ax, label="age")
    for b in payload["branches"]:
        if not b["polyline"]:
            continue
        color = TRAJECTORY_COLORS.get(b["label"], _UNDETERMINED_COLOR)
        poly = np.array(b["polyline"])
        ax.plot(poly[:, 0], poly[:, 1], color=color, lw=2.2, label=b["label"] or None)
    if payload["highlight"]:
        hx = [h["x"] for h in payload["highlight"]]
        hy = [h["y"] for h in payload["highlight"]]
        ax.scatter(hx, hy, facecolors="none", edgecolors="black", s=48, lw=1.2)
    ax.legend(loc="best", fontsize=7)
    ax.set_title("trajectory map")


def _plot_glyphs(ax, cohort: Cohort, patient_id: str, enrichment: EnrichmentReport | None) -> None:
    rows, order = indicator_glyphs(cohort, patient_id)
    for r, code in enumerate(order):
        for g in rows[code]:
            x = (g.age_start + g.age_end) / 2
            total = g.n_below + g.n_normal + g.n_above
            ax.scatter([x], [r], s=8 + 6 * total, color="#777777", alpha=0.6, linewidths=0)
            if g.n_below:
                ax.scatter([x], [r - 0.22], s=8 + 40 * g.dev_below, color=_BAND_COLORS["below"], linewidths=0)
            if g.n_above:
                ax.scatter([x], [r + 0.22], s=8 + 40 * g.dev_above, color=_BAND_COLORS["above"], linewidths=0)
    labels = []
    for code in order:
        tag = ""
        if enrichment is not None:
            tags = enrichment.tags_for_feature(code)
            if tags:
                tag = " [" + ",".join(f"{t[:4]}:{r[:4]}" for t, r in tags) + "]"
        labels.append(code + tag)
    ax.set_yticks(range(len(order)), labels=labels, fontsize=7)
    ax.set_xlabel("age (years)")
    ax.set_title("indicator timeline (below red / above purple)")


def _plot_analysis(ax, model: TrajectoryModel, cohort: Cohort, patient_id: str) -> None:
    bundle = analysis_bundle(model, cohort, patient_id)
    for label, curve in bundle.trajectories.items():
        if not curve:
            continue
        mids = [(c.age_start + c.age_end) / 2 for c in curve]
        ax.plot(mids, [c.central for c in curve], color=TRAJECTORY_COLORS[label], lw=1.5, label=label)
        ax.fill_between(
            mids,
            [c.lower for c in curve],
            [c.upper for c in curve],
            color=TRAJECTORY_COLORS[label],
            alpha=0.2,
            linewidth=0,
        )
    prob = bundle.probability
    bottom = np.zeros(len(prob.ages))
    scale = 25.0  # probability band drawn under the curves
    for label in sorted(prob.per_label):
        vals = np.array(prob.per_label[label]) * scale
        ax.fill_between(prob.ages, bottom, bottom + vals, step="post",
                        color=TRAJECTORY_COLORS[label], alpha=0.55, linewidth=0)
        bottom += vals
    ax.fill_between(prob.ages, bottom, np.full_like(bottom, scale), step="post",
                    color=_UNDETERMINED_COLOR, alpha=0.4, linewidth=0)
    ax.set_xlabel("age (years)")
    ax.set_ylabel("eGFR")
    ax.legend(loc="best", fontsize=7)
    ax.set_title(f"trajectory bands + membership probability ({patient_id})")


def render_patient_figure(
    model: TrajectoryModel,
    cohort: Cohort,
    patient_id: str,
    out_path: str | Path,
    indicators: list[str] | None = None,
    enrichment: EnrichmentReport | None = None,
) -> Path:
    """Four-panel PNG for one patient."""
    codes = indicators or ["egfr", "hemoglobin"]
    codes = [c for c in codes if c in cohort.catalog][:2] or ["egfr"]
    fig, axes = plt.subplots(2, 2, figsize=(13, 9))
    _plot_profile(axes[0, 0], cohort, patient_id, codes)
    _plot_map(axes[0, 1], model, cohort, patient_id)
    _plot_glyphs(axes[1, 0], cohort, patient_id, enrichment)
    _plot_analysis(axes[1, 1], model, cohort, patient_id)
    fig.suptitle(f"patient {patient_id}", fontsize=12)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return out_path


def render_overview_figure(model: TrajectoryModel, cohort: Cohort, out_path: str | Path) -> Path:
    """Cohort-level map: visit cloud, tree edges, labeled smoothed curves."""
    fig, ax = plt.subplots(figsize=(8, 6))
    coords = model.coords2d
    ax.scatter(coords[:, 0], coords[:, 1], s=4, c="#cccccc", linewidths=0)
    lm = model.tree.landmarks
    for i, j in model.tree.edges:
        ax.plot([lm[i, 0], lm[j, 0]], [lm[i, 1], lm[j, 1]], color="#888888", lw=0.8)
    ax.scatter(lm[:, 0], lm[:, 1], s=12, c="#333333", zorder=3, linewidths=0)
    for b in model.branches:
        curve = model.smoothed_curves.get(b.branch_id)
        label = model.label_of_branch(b.branch_id)
        if curve is None or label is None:
            continue
        ax.plot(curve[:, 0], curve[:, 1], color=TRAJECTORY_COLORS[label], lw=2.5, label=label)
    ax.legend(loc="best", fontsize=8)
    ax.set_title("fitted trajectories")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return out_path
