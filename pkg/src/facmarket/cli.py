"""Command-line front end and pipeline orchestration.

Stages: ingest -> rank -> topics -> fit -> simulate -> check -> analyze.
Every stage materializes its artifacts inside the content-addressed output
directory and is idempotent given fixed seeds.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import analysis, data, figures, fitting, netstats, productivity, ranking
from .config import Config
from .errors import DataError, FacMarketError, NumericalError
from .market import (LOGISTIC, STEP, UNIFORM, FEATURE_NAMES, MatchModel,
                     Weights, build_market, simulate_history)
from .rng import substream_seed
from .synth import SyntheticSpec, generate, full_scale_spec, write_bundle


class StageError(FacMarketError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r}: {cause}")
        self.stage = stage
        self.cause = cause


def _stage(name):
    def deco(fn):
        def wrapped(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc
        wrapped.__name__ = fn.__name__
        wrapped.__doc__ = fn.__doc__
        return wrapped
    return deco


# ---------------------------------------------------------------------------
# Artifact IO

def _r(x):
    return repr(float(x))


def _write_csv(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def _write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


@_stage("ingest")
def load_inputs(cfg):
    institutions = data.load_institutions(cfg.institutions)
    raw = data.load_faculty(cfg.faculty, institutions)
    records = data.filter_cohort(raw, institutions)
    network = data.build_network(records, institutions)
    slices = data.year_slices(network)
    return institutions, raw, records, network, slices


def _ranks_paths(cfg):
    out = cfg.outdir()
    return out / "ranks.csv", out / "rank_summary.json"


@_stage("rank")
def load_ranking(cfg):
    ranks_csv, summary_json = _ranks_paths(cfg)
    if not ranks_csv.exists():
        raise DataError(f"{ranks_csv} not found; run the rank stage first")
    summary = json.loads(summary_json.read_text())
    rank = {}
    with ranks_csv.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rank[row["institution_id"]] = float(row["mean_rank"])
    return ranking.PrestigeRanking(
        rank=rank, min_violations=summary["min_violations"],
        violation_fraction=summary["violation_fraction"],
        n_samples=summary["samples"])


@_stage("topics")
def load_scored(cfg, records):
    path = cfg.outdir() / "productivity.csv"
    if not path.exists():
        raise DataError(f"{path} not found; run the topics stage first")
    by_id = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        theta_cols = [c for c in reader.fieldnames if c.startswith("theta_")]
        for row in reader:
            by_id[row["faculty_id"]] = (
                int(row["pub_count"]), float(row["z"]),
                tuple(float(row[c]) for c in theta_cols))
    scored = []
    for r in records:
        if r.id not in by_id:
            raise DataError(f"faculty {r.id!r} missing from {path}")
        n, z, theta = by_id[r.id]
        scored.append(r.with_productivity(n, theta, z))
    return scored


def _load_fit(cfg):
    path = cfg.outdir() / "fit.json"
    if not path.exists():
        raise DataError(f"{path} not found; run the fit stage first")
    blob = json.loads(path.read_text())
    return Weights(w=tuple(blob["weights"][f] for f in FEATURE_NAMES),
                   active_mask=tuple(blob["active_mask"]))


def _model_from(cfg, variant, weights_file=None):
    if variant == LOGISTIC:
        if weights_file:
            blob = json.loads(Path(weights_file).read_text())
            weights = Weights(w=tuple(blob["weights"][f] for f in FEATURE_NAMES),
                              active_mask=tuple(blob.get(
                                  "active_mask", [True] * len(FEATURE_NAMES))))
        else:
            weights = _load_fit(cfg)
        return MatchModel(LOGISTIC, weights, bias=cfg.model_bias)
    return MatchModel(variant)


def _build_scored_market(cfg):
    institutions, _, records, network, slices = load_inputs(cfg)
    rank = load_ranking(cfg)
    scored = load_scored(cfg, records)
    inst_map = {i.id: i for i in institutions}
    market = build_market(scored, slices, rank, inst_map)
    return institutions, scored, network, market, rank


# ---------------------------------------------------------------------------
# Stage implementations

@_stage("ingest")
def stage_ingest(cfg):
    institutions, raw, records, network, slices = load_inputs(cfg)
    genders = [r.gender for r in records]
    summary = {
        "institutions": len(institutions),
        "raw_records": len(raw),
        "kept_records": len(records),
        "dropped_records": len(raw) - len(records),
        "edges": network.n_edges,
        "years": [s.year for s in slices],
        "female_fraction": (genders.count("F") / len(genders)) if genders else None,
    }
    _write_json(cfg.outdir() / "ingest_summary.json", summary)
    if cfg.figures and records:
        figures.hire_year_histogram(records, cfg.outdir() / "fig_hire_years.png")
    return summary


@_stage("rank")
def stage_rank(cfg):
    _, _, _, network, _ = load_inputs(cfg)
    rank = ranking.compute_ranking(
        network, restarts=cfg.rank_restarts, sweeps=cfg.rank_sweeps,
        samples=cfg.rank_samples, seed=cfg.seed,
        temperature=cfg.rank_temperature)
    ranks_csv, summary_json = _ranks_paths(cfg)
    n = rank.n
    _write_csv(ranks_csv, ["institution_id", "mean_rank", "normalized_rank"],
               [[u, _r(rank.rank[u]), _r(rank.rank[u] / n)]
                for u in sorted(rank.rank, key=rank.rank.get)])
    _write_json(summary_json, {"min_violations": rank.min_violations,
                               "violation_fraction": rank.violation_fraction,
                               "samples": rank.n_samples})
    return rank


@_stage("topics")
def stage_topics(cfg):
    _, _, records, _, _ = load_inputs(cfg)
    pubs = productivity.load_publications(cfg.publications)
    scored, model, stats = productivity.score_faculty(
        records, pubs, K=cfg.lda_topics, alpha=cfg.lda_alpha,
        beta=cfg.lda_beta, iterations=cfg.lda_iterations, seed=cfg.seed)
    out = cfg.outdir()
    rows = []
    for k in range(model.K):
        for rank_i, (word, prob) in enumerate(model.top_words(k, 20), start=1):
            rows.append([k, rank_i, word, _r(prob)])
    _write_csv(out / "topics.csv", ["topic", "word_rank", "word", "probability"], rows)
    theta_cols = [f"theta_{k + 1}" for k in range(model.K)]
    _write_csv(out / "productivity.csv",
               ["faculty_id", "pub_count", "z"] + theta_cols,
               [[r.id, r.pub_count, _r(r.productivity_z)]
                + [_r(t) for t in r.topic_mix] for r in scored])
    _write_json(out / "subfield_stats.json",
                {"mu": stats.mu.tolist(), "sigma": stats.sigma.tolist()})
    return scored, model, stats


@_stage("fit")
def stage_fit(cfg, greedy=False):
    _, scored, _, market, rank = _build_scored_market(cfg)
    mask = [f in cfg.features for f in FEATURE_NAMES]
    if not any(mask):
        raise DataError(f"no known features in {cfg.features}")
    out = cfg.outdir()
    fit = fitting.fit_weights(
        market, mask, lam=cfg.fit_lambda, R=cfg.fit_replicates,
        seed=cfg.seed, max_iter=cfg.fit_max_iter, restarts=cfg.fit_restarts)
    _write_json(out / "fit.json", {
        "weights": dict(zip(FEATURE_NAMES, fit.weights.w)),
        "active_mask": list(fit.weights.active_mask),
        "err": fit.err,
        "evaluations": fit.evaluations,
        "trace": [list(t) for t in fit.trace],
    })
    if greedy:
        stages = fitting.greedy_select(
            market, [f for f in cfg.features if f != "gender_female"],
            lam=cfg.fit_lambda, R=cfg.fit_replicates, seed=cfg.seed,
            max_iter=cfg.fit_max_iter)
        base = stages[0].err_before
        _write_csv(out / "greedy.csv",
                   ["stage", "feature", "err", "pct_reduction_vs_step", "p_value"],
                   [[i + 1, s.feature, _r(s.err_after),
                     _r(100.0 * (base - s.err_after) / base), _r(s.p_value)]
                    for i, s in enumerate(stages)])
        if cfg.figures:
            figures.greedy_error_reduction(stages, base,
                                           out / "fig_greedy.png")
    return fit


@_stage("simulate")
def stage_simulate(cfg, variant=None, weights_file=None, runs=None):
    _, scored, _, market, rank = _build_scored_market(cfg)
    model = _model_from(cfg, variant or cfg.model, weights_file)
    runs = runs if runs is not None else cfg.runs
    out = cfg.outdir()
    recs = market.records_by_id
    for r in range(runs):
        run = simulate_history(market, model, substream_seed(cfg.seed, "simulate", r))
        _write_csv(out / f"placements_{r}.csv",
                   ["faculty_id", "simulated_institution", "year"],
                   [[fid, inst, recs[fid].hire_year]
                    for fid, inst in sorted(run.placements.items())])
    return runs


@_stage("check")
def stage_check(cfg, weights_file=None):
    institutions, scored, network, market, rank = _build_scored_market(cfg)
    models = {UNIFORM: MatchModel(UNIFORM), STEP: MatchModel(STEP),
              LOGISTIC: _model_from(cfg, LOGISTIC, weights_file)}
    report = netstats.check_report(network, market, models,
                                   n_runs=cfg.check_runs, seed=cfg.seed)
    out = cfg.outdir()
    names = list(models)
    rows = []
    for stat in netstats.STAT_NAMES:
        row = [stat, _r(report["observed"][stat])]
        for name in names:
            mean, se = report[name][stat]
            row += [_r(mean), _r(se)]
        rows.append(row)
    header = ["statistic", "observed"]
    for name in names:
        header += [f"{name}_mean", f"{name}_se"]
    _write_csv(out / "model_check.csv", header, rows)
    _write_json(out / "model_check_meta.json", {
        "n_runs": cfg.check_runs,
        "geodesic_and_clustering": "undirected simple projection",
        "reciprocating_institutions":
            "institutions in >=1 mutually reciprocated pair / all institutions",
    })
    if cfg.figures:
        figures.model_check_chart(report, out / "fig_model_check.png")
    return report


def _simulate_runs(cfg, market, model, n_runs):
    return [simulate_history(market, model, substream_seed(cfg.seed, "analyze", r))
            for r in range(n_runs)]


@_stage("analyze")
def stage_analyze(cfg, subtargets, weights_file=None):
    institutions, scored, network, market, rank = _build_scored_market(cfg)
    out = cfg.outdir()
    results = {}
    needs_runs = {"institutions", "candidates"} & set(subtargets)
    runs = None
    if needs_runs:
        model = _model_from(cfg, cfg.model, weights_file)
        runs = _simulate_runs(cfg, market, model, cfg.runs)

    if "institutions" in subtargets:
        dists = analysis.female_hire_distributions(
            runs, scored, institutions=[i.id for i in institutions])
        rows = analysis.rank_band_summary(dists, rank, top_n=50)
        _write_csv(out / "institutions_female_hiring.csv",
                   ["institution", "rank", "actual", "expected",
                    "median_simulated", "actual_minus_expected",
                    "band_low", "band_high", "percentile_of_actual"],
                   [[r["institution"], _r(r["rank"]), r["actual"],
                     _r(r["expected"]), _r(r["median_simulated"]),
                     _r(r["actual_minus_expected"]), _r(r["band_low"]),
                     _r(r["band_high"]), _r(r["percentile_of_actual"])]
                    for r in rows])
        long_rows = []
        for v, d in sorted(dists.items()):
            long_rows.append([v, "percentile_of_actual",
                              _r(d.percentile_of_actual)])
            long_rows.append([v, "actual_final", d.actual_final])
            long_rows.append([v, "expected_final", _r(float(d.final_counts.mean()))])
        _write_csv(out / "institutions_summary.csv",
                   ["institution", "metric", "value"], long_rows)
        _write_json(out / "institutions_summary.json", {
            "runs": len(runs),
            "expected_female_total": analysis.expected_female_total(dists),
            "convention": "expected = mean simulated final count; "
                          "percentiles use the midpoint convention",
        })
        if cfg.figures and rows:
            figures.rank_band_chart(rows, out / "fig_top50_female.png")
            for r in rows[:3]:
                figures.hire_trajectories(
                    dists[r["institution"]],
                    out / f"fig_trajectory_{r['institution']}.png")
        results["institutions"] = rows

    if "candidates" in subtargets:
        outcomes = analysis.candidate_placement_errors(runs, scored, rank)
        _write_csv(out / "candidate_errors.csv",
                   ["faculty_id", "observed_rank", "mean_simulated_rank", "delta"],
                   [[o.faculty_id, _r(o.observed_rank),
                     _r(float(o.simulated_ranks.mean())), _r(o.delta)]
                    for o in outcomes])
        by_year = analysis.placement_error_by_year(outcomes, scored)
        _write_csv(out / "placement_error_by_year.csv",
                   ["year", "gender", "n", "mean_delta", "ci_half_width"],
                   [[r["year"], r["gender"], r["n"], _r(r["mean_delta"]),
                     _r(r["ci_half_width"])] for r in by_year])
        tests = analysis.over_under_performance_tests(outcomes, scored)
        _write_json(out / "candidates_summary.json", {
            "runs": len(runs),
            "tests": {k: vars(t) for k, t in tests.items()},
            "note": "delta-zero candidates excluded from over/under tests",
        })
        if cfg.figures and by_year:
            figures.placement_error_series(by_year,
                                           out / "fig_error_by_year.png")
        results["candidates"] = by_year

    if "parity" in subtargets:
        results["parity"] = stage_forecast(cfg, records=scored)

    if "descriptives" in subtargets:
        rep = analysis.descriptive_report(scored, rank,
                                          {i.id: i for i in institutions})
        blob = {k: (vars(v) if isinstance(v, analysis.TestResult) else v)
                for k, v in rep.items()}
        _write_json(out / "descriptives.json", blob)
        results["descriptives"] = blob
    return results


@_stage("forecast")
def stage_forecast(cfg, records=None):
    if records is None:
        _, _, records, _, _ = load_inputs(cfg)
    frac = analysis.yearly_female_fraction(records)
    fc = analysis.parity_forecast(frac)
    out = cfg.outdir()
    _write_csv(out / "female_fraction_by_year.csv",
               ["year", "female_fraction"],
               [[y, _r(frac[y])] for y in sorted(frac)])
    _write_json(out / "parity.json", {
        "slope_per_year": fc.slope,
        "intercept": fc.intercept,
        "crossing_year": fc.crossing_year,
        "ci_low": fc.ci_low,
        "ci_high": fc.ci_high,
    })
    if cfg.figures:
        figures.parity_projection(frac, fc, out / "fig_parity.png")
    return fc


@_stage("synth")
def stage_synth(cfg, spec, dest=None):
    dest = Path(dest) if dest else cfg.outdir() / "synthetic"
    return write_bundle(generate(spec, seed=cfg.seed), dest)


@_stage("pipeline")
def stage_pipeline(cfg):
    stage_ingest(cfg)
    stage_rank(cfg)
    stage_topics(cfg)
    stage_fit(cfg, greedy=True)
    stage_simulate(cfg)
    stage_check(cfg)
    stage_analyze(cfg, ["institutions", "candidates", "parity", "descriptives"])
    return cfg.outdir()


# ---------------------------------------------------------------------------
# Click wiring

@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON config file.")
@click.option("--seed", type=int, default=None, help="Master seed.")
@click.option("--out", type=click.Path(), default=None,
              help="Base output directory.")
@click.option("--figures/--no-figures", "figures_flag", default=None,
              help="Also render figures next to the delimited outputs.")
@click.pass_context
def cli(ctx, config_path, seed, out, figures_flag):
    """Faculty hiring market modeling toolkit."""
    ctx.obj = Config.load(config_path, overrides={
        "seed": seed, "out": out, "figures": figures_flag})


@cli.command()
@click.pass_obj
def ingest(cfg):
    """Load inputs, filter the cohort, and build the hiring network."""
    summary = stage_ingest(cfg)
    click.echo(json.dumps(summary, indent=2, default=str))


@cli.command()
@click.pass_obj
def rank(cfg):
    """Sample minimum-violation rankings and write ranks.csv."""
    r = stage_rank(cfg)
    click.echo(f"min_violations={r.min_violations} "
               f"violation_fraction={r.violation_fraction:.4f}")


@cli.command()
@click.pass_obj
def topics(cfg):
    """Fit the topic model and write productivity scores."""
    scored, model, _ = stage_topics(cfg)
    click.echo(f"scored {len(scored)} faculty across {model.K} topics")


@cli.command()
@click.option("--features", default=None,
              help="Comma-separated feature list.")
@click.option("--lambda", "lam", type=float, default=None)
@click.option("--replicates", type=int, default=None)
@click.option("--greedy", is_flag=True, default=False,
              help="Run greedy feature addition and write greedy.csv.")
@click.pass_obj
def fit(cfg, features, lam, replicates, greedy):
    """Fit logistic match-function weights."""
    if features is not None:
        cfg.features = [f.strip() for f in features.split(",") if f.strip()]
    if lam is not None:
        cfg.fit_lambda = lam
    if replicates is not None:
        cfg.fit_replicates = replicates
    res = stage_fit(cfg, greedy=greedy)
    click.echo(f"err={res.err:.6f} evaluations={res.evaluations}")


@cli.command()
@click.option("--model", "variant",
              type=click.Choice([UNIFORM, STEP, LOGISTIC]), default=None)
@click.option("--weights", "weights_file", type=click.Path(), default=None)
@click.option("--runs", type=int, default=None)
@click.pass_obj
def simulate(cfg, variant, weights_file, runs):
    """Simulate hiring histories and write placement files."""
    n = stage_simulate(cfg, variant=variant, weights_file=weights_file,
                       runs=runs)
    click.echo(f"wrote {n} placement files to {cfg.outdir()}")


@cli.command()
@click.option("--weights", "weights_file", type=click.Path(), default=None)
@click.pass_obj
def check(cfg, weights_file):
    """Compare observed and simulated network statistics."""
    stage_check(cfg, weights_file=weights_file)
    click.echo(str(cfg.outdir() / "model_check.csv"))


@cli.command()
@click.argument("subtargets", nargs=-1,
                type=click.Choice(["institutions", "candidates", "parity",
                                   "descriptives"]))
@click.option("--weights", "weights_file", type=click.Path(), default=None)
@click.pass_obj
def analyze(cfg, subtargets, weights_file):
    """Run result analyses (default: all subtargets)."""
    subtargets = list(subtargets) or ["institutions", "candidates",
                                      "parity", "descriptives"]
    stage_analyze(cfg, subtargets, weights_file=weights_file)
    click.echo(f"analysis artifacts in {cfg.outdir()}")


@cli.command()
@click.pass_obj
def forecast(cfg):
    """Fit and extrapolate the gender-parity trend."""
    fc = stage_forecast(cfg)
    if fc.crossing_year is None:
        click.echo("crossing undefined (nonpositive trend)")
    else:
        click.echo(f"crossing_year={fc.crossing_year:.1f} "
                   f"ci=[{fc.ci_low:.1f}, {fc.ci_high:.1f}]")


@cli.command()
@click.option("--spec", "spec_path", type=click.Path(), default=None,
              help="JSON file of SyntheticSpec fields.")
@click.option("--full-scale", is_flag=True, default=False,
              help="Use the full-scale preset spec.")
@click.option("--dest", type=click.Path(), default=None,
              help="Bundle directory (default <out>/synthetic).")
@click.pass_obj
def synth(cfg, spec_path, full_scale, dest):
    """Generate a synthetic input bundle with ground truth."""
    if full_scale:
        spec = full_scale_spec()
    elif spec_path:
        spec = SyntheticSpec(**json.loads(Path(spec_path).read_text()))
    else:
        spec = SyntheticSpec()
    paths = stage_synth(cfg, spec, dest=dest)
    click.echo(str(paths["truth"].parent))


@cli.command()
@click.pass_obj
def pipeline(cfg):
    """Run every stage end to end."""
    out = stage_pipeline(cfg)
    click.echo(f"pipeline complete: {out}")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except StageError as exc:
        click.echo(f"error: {exc}", err=True)
        if isinstance(exc.cause, (NumericalError, FloatingPointError,
                                  np.linalg.LinAlgError)):
            return 3
        return 2
    except DataError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except (NumericalError, FloatingPointError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
