"""Figure rendering for the report path.

Every renderer takes already-computed tables (the same data written to the
delimited outputs) and writes a PNG next to them. Rendering is optional;
the CSV outputs stay figure-ready either way.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def hire_year_histogram(records, path):
    years = [r.hire_year for r in records]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.hist(years, bins=np.arange(min(years), max(years) + 2) - 0.5,
            color="#4878a8", edgecolor="white")
    ax.set_xlabel("hire year")
    ax.set_ylabel("hires")
    ax.set_title("Assistant-professor hires by year")
    return _save(fig, path)


def greedy_error_reduction(stages, baseline_err, path):
    """Percent error reduction relative to the step baseline, per accepted
    feature."""
    labels = [s.feature for s in stages]
    pct = [100.0 * (baseline_err - s.err_after) / baseline_err for s in stages]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    bars = ax.bar(range(len(labels)), pct, color="#4878a8")
    for b, s in zip(bars, stages):
        if s.p_value < 0.05:
            ax.annotate("*", (b.get_x() + b.get_width() / 2, b.get_height()),
                        ha="center", va="bottom", fontsize=14)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("% error reduction vs step")
    ax.set_title("Greedy feature addition")
    return _save(fig, path)


def hire_trajectories(dist, path):
    """Simulated cumulative female-hire trajectories for one institution,
    with the actual trajectory and the final-count distribution."""
    fig, (ax, axh) = plt.subplots(
        1, 2, figsize=(7, 3.5), sharey=True,
        gridspec_kw={"width_ratios": [3, 1]})
    t = np.arange(dist.trajectories.shape[1])
    show = dist.trajectories[: min(200, dist.trajectories.shape[0])]
    ax.plot(t, show.T, color="#6aa84f", alpha=0.08, lw=1)
    ax.plot(t, dist.actual_trajectory, color="black", lw=2, label="actual")
    ax.set_xlabel("year index")
    ax.set_ylabel("cumulative female hires")
    ax.set_title(f"{dist.institution} "
                 f"(percentile {dist.percentile_of_actual:.0f})")
    ax.legend(loc="upper left")
    hi = max(int(dist.final_counts.max()), dist.actual_final) + 1
    axh.hist(dist.final_counts, bins=np.arange(hi + 1) - 0.5,
             orientation="horizontal", color="#6aa84f", alpha=0.7)
    axh.axhline(dist.actual_final, color="black", lw=2)
    axh.set_xlabel("simulations")
    return _save(fig, path)


def rank_band_chart(rows, path):
    """Actual minus expected female hires over the top institutions, with
    the 25th-75th percentile band."""
    x = np.arange(1, len(rows) + 1)
    diff = [r["actual_minus_expected"] for r in rows]
    lo = [r["band_low"] for r in rows]
    hi = [r["band_high"] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.fill_between(x, lo, hi, color="#cccccc", label="25th-75th pct")
    ax.axhline(0, color="gray", lw=0.8)
    ax.plot(x, diff, "o", color="#4878a8", ms=4, label="actual - expected")
    ax.set_xlabel("prestige rank")
    ax.set_ylabel("female hires, actual - expected")
    ax.legend()
    return _save(fig, path)


def placement_error_series(rows, path):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for gender, color in (("M", "#4878a8"), ("F", "#6aa84f")):
        pts = [r for r in rows if r["gender"] == gender]
        if not pts:
            continue
        years = [r["year"] for r in pts]
        mean = np.array([r["mean_delta"] for r in pts])
        half = np.array([r["ci_half_width"] for r in pts])
        ax.plot(years, mean, color=color, label=gender)
        ax.fill_between(years, mean - half, mean + half, color=color, alpha=0.2)
    ax.axhline(0, color="gray", lw=0.8)
    ax.set_xlabel("hire year")
    ax.set_ylabel("mean placement error")
    ax.legend()
    return _save(fig, path)


def parity_projection(fraction_by_year, forecast, path):
    years = np.array(sorted(fraction_by_year), dtype=float)
    frac = np.array([fraction_by_year[int(y)] for y in years])
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(years, frac, "o-", color="#6aa84f", ms=3, label="female share")
    if forecast.crossing_year is not None:
        grid = np.linspace(years[0], forecast.crossing_year + 5, 200)
        ax.plot(grid, forecast.intercept + forecast.slope * grid,
                "--", color="#4878a8", label="OLS trend")
        ax.axvline(forecast.crossing_year, color="gray", lw=0.8)
        if forecast.ci_low is not None and forecast.ci_high is not None:
            ax.axvspan(forecast.ci_low, forecast.ci_high,
                       color="#cccccc", alpha=0.5)
    ax.axhline(0.5, color="gray", lw=0.8)
    ax.set_xlabel("year")
    ax.set_ylabel("fraction of hires")
    ax.legend()
    return _save(fig, path)


def model_check_chart(report, path):
    """Observed vs simulated means with error bars, one panel per
    statistic."""
    stats = list(report["observed"])
    models = [k for k in report if k != "observed"]
    fig, axes = plt.subplots(2, 3, figsize=(10, 5.5))
    for ax, stat in zip(axes.ravel(), stats):
        means = [report[m][stat][0] for m in models]
        ses = [report[m][stat][1] for m in models]
        ax.errorbar(range(len(models)), means, yerr=ses, fmt="o",
                    color="#4878a8", capsize=3)
        ax.axhline(report["observed"][stat], color="black", lw=1,
                   label="observed")
        ax.set_xticks(range(len(models)))
        ax.set_xticklabels(models, fontsize=8)
        ax.set_title(stat, fontsize=9)
    fig.tight_layout()
    return _save(fig, path)
