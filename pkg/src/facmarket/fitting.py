"""Weight estimation for the matching model.

The objective is the mean squared error between observed and simulated
placement ranks (normalized), averaged over R simulated histories, plus an
L1 penalty on the active weights. Common random numbers: every evaluation
reuses the same R replicate seeds, so the stochastic objective becomes a
deterministic function of the weights and direct search applies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .analysis import mann_whitney_u
from .errors import DataError
from .market import (LOGISTIC, STEP, FEATURE_NAMES, MatchModel, Weights,
                     observed_norm_ranks, simulated_norm_ranks)
from .rng import substream, substream_seed

DEFAULT_LAMBDA = 0.05
DEFAULT_REPLICATES = 25
REPORT_REPLICATES = 200

NM_TOL = 1e-6
NM_RESTARTS = 5
NM_MAX_ITER_PER_DIM = 500
NM_SIMPLEX_STEP = 0.5


@dataclass(frozen=True)
class FitResult:
    weights: Weights
    err: float
    trace: tuple        # (evaluation index, best err so far)
    evaluations: int


@dataclass(frozen=True)
class SelectionStage:
    feature: str
    err_before: float
    err_after: float
    p_value: float
    weights: Weights
    replicate_errors: np.ndarray


def placement_error(run, records, ranking) -> float:
    """Mean squared normalized-rank error of one simulated history."""
    total = 0.0
    m = 0
    for r in records:
        if r.id not in run.placements:
            raise DataError(f"candidate {r.id!r} missing from simulation")
        obs = ranking.normalized(r.hiring_institution)
        sim = ranking.normalized(run.placements[r.id])
        total += (obs - sim) ** 2
        m += 1
    if m != len(run.placements):
        raise DataError("simulation covers candidates outside the record set")
    return total / m


def replicate_errors(market, model, R, seed) -> np.ndarray:
    """Placement MSE of R histories under common random numbers."""
    obs = observed_norm_ranks(market)
    errs = np.empty(R)
    for r in range(R):
        sim = simulated_norm_ranks(market, model, substream_seed(seed, "fit", r))
        errs[r] = np.mean((obs - sim) ** 2)
    return errs


def objective_value(w_active, market, active_mask, lam=DEFAULT_LAMBDA,
                    R=DEFAULT_REPLICATES, seed=0) -> float:
    """Mean placement MSE over R replicates plus the L1 penalty."""
    if R < 1:
        raise DataError("R must be >= 1")
    weights = Weights.from_active(w_active, active_mask)
    model = MatchModel(LOGISTIC, weights)
    mse = replicate_errors(market, model, R, seed).mean()
    return float(mse + lam * np.sum(np.abs(weights.as_array())))


def nelder_mead(objective, w0, tol=NM_TOL, max_iter=None,
                restarts=NM_RESTARTS, seed=0) -> FitResult:
    """Simplex search with standard coefficients (reflection 1, expansion
    2, contraction 0.5, shrink 0.5), restarted from perturbed starting
    points; never returns a point worse than w0.

    The initial simplex spans NM_SIMPLEX_STEP per coordinate. The
    simulation objective is piecewise constant in w (finitely many
    replicate draws), so a simplex far below that scale would see a
    locally flat function and terminate at the starting point.
    """
    w0 = np.atleast_1d(np.asarray(w0, dtype=float))
    dim = w0.shape[0]
    if max_iter is None:
        max_iter = NM_MAX_ITER_PER_DIM * dim
    rng = substream(seed, "fit")

    evals = [0]
    trace = []
    best = {"x": w0.copy(), "f": None}

    def wrapped(x):
        f = objective(x)
        evals[0] += 1
        if best["f"] is None or f < best["f"]:
            best["f"] = f
            best["x"] = np.array(x, dtype=float)
            trace.append((evals[0], float(f)))
        return f

    wrapped(w0)
    starts = [w0] + [w0 + rng.normal(scale=0.25 * (np.abs(w0) + 1.0))
                     for _ in range(max(0, restarts - 1))]
    for x0 in starts:
        simplex = np.vstack([x0] + [x0 + NM_SIMPLEX_STEP * np.eye(dim)[i]
                                    for i in range(dim)])
        optimize.minimize(wrapped, x0, method="Nelder-Mead",
                          options={"xatol": tol, "fatol": tol,
                                   "maxiter": max_iter, "maxfev": max_iter,
                                   "initial_simplex": simplex})
    return FitResult(weights=best["x"], err=float(best["f"]),
                     trace=tuple(trace), evaluations=evals[0])


def fit_weights(market, active_mask, lam=DEFAULT_LAMBDA, R=DEFAULT_REPLICATES,
                seed=0, w0=None, tol=NM_TOL, max_iter=None,
                restarts=NM_RESTARTS) -> FitResult:
    """Fit the logistic model's active weights by Nelder-Mead."""
    dim = sum(bool(m) for m in active_mask)
    if dim == 0:
        raise DataError("no active features")
    if w0 is None:
        w0 = np.zeros(dim)

    def obj(w):
        return objective_value(w, market, active_mask, lam=lam, R=R, seed=seed)

    res = nelder_mead(obj, w0, tol=tol, max_iter=max_iter,
                      restarts=restarts, seed=seed)
    weights = Weights.from_active(res.weights, active_mask)
    return FitResult(weights=weights, err=res.err, trace=res.trace,
                     evaluations=res.evaluations)


def greedy_select(market, candidate_features=None, lam=DEFAULT_LAMBDA,
                  R=DEFAULT_REPLICATES, seed=0, max_iter=None,
                  restarts=2, max_stages=None) -> list:
    """Greedy feature addition relative to the step-function baseline.

    At each stage every remaining feature is added to the accepted model,
    all augmented models are fitted, and the best is accepted. Gender is
    always incorporated last. The p-value is a two-sided Mann-Whitney test
    between per-replicate errors of successive accepted models.
    max_stages truncates the trace (gender still forced last when reached).
    """
    if candidate_features is None:
        candidate_features = [f for f in FEATURE_NAMES if f != "gender_female"]
    candidate_features = list(candidate_features)
    if "gender_female" in candidate_features:
        candidate_features.remove("gender_female")

    baseline_errs = replicate_errors(market, MatchModel(STEP), R, seed)
    prev_errs = baseline_errs
    prev_err = float(baseline_errs.mean())

    accepted = []
    stages = []
    remaining = list(candidate_features)
    stage_order = [None] * len(remaining) + ["gender_female"]
    for forced in stage_order:
        if max_stages is not None and len(stages) >= max_stages:
            break
        if forced is None and not remaining:
            continue
        pool = [forced] if forced else remaining
        best = None
        for feat in pool:
            mask = [f in accepted + [feat] for f in FEATURE_NAMES]
            fit = fit_weights(market, mask, lam=lam, R=R, seed=seed,
                              max_iter=max_iter, restarts=restarts)
            errs = replicate_errors(market, MatchModel(LOGISTIC, fit.weights),
                                    R, seed)
            cand = (float(errs.mean()), feat, fit, errs)
            if best is None or cand[0] < best[0]:
                best = cand
        err_after, feat, fit, errs = best
        p = mann_whitney_u(prev_errs, errs).p_value
        stages.append(SelectionStage(feature=feat, err_before=prev_err,
                                     err_after=err_after, p_value=float(p),
                                     weights=fit.weights,
                                     replicate_errors=errs))
        accepted.append(feat)
        if feat in remaining:
            remaining.remove(feat)
        prev_errs = errs
        prev_err = err_after
    return stages


def cross_validate(market, active_mask, folds=5, holdout_years=5,
                   lam=DEFAULT_LAMBDA, R=DEFAULT_REPLICATES, seed=0,
                   max_iter=None, restarts=2) -> list:
    """Hold out `holdout_years` random years per fold, fit on the rest,
    evaluate on the held-out slice. Returns one dict per fold."""
    years = [ym.year for ym in market.years]
    if len(years) <= holdout_years:
        raise DataError(f"need more than {holdout_years} distinct years")
    rng = substream(seed, "fit")
    out = []
    for fold in range(folds):
        test_years = set(rng.choice(years, size=holdout_years, replace=False).tolist())
        train = market.restrict([y for y in years if y not in test_years])
        test = market.restrict(test_years)
        fit = fit_weights(train, active_mask, lam=lam, R=R,
                          seed=substream_seed(seed, "fit", fold + 1),
                          max_iter=max_iter, restarts=restarts)
        test_errs = replicate_errors(test, MatchModel(LOGISTIC, fit.weights),
                                     R, substream_seed(seed, "fit", 10_000 + fold))
        out.append({"fold": fold,
                    "test_years": sorted(test_years),
                    "weights": fit.weights,
                    "train_err": fit.err,
                    "test_err": float(test_errs.mean())})
    return out


def weight_stability(folds_report):
    """Per-feature mean/std of fitted weights across folds."""
    W = np.array([f["weights"].w for f in folds_report])
    return {name: (float(W[:, i].mean()), float(W[:, i].std()))
            for i, name in enumerate(FEATURE_NAMES)}


def papers_equivalent_to_gender(weights, stats, mean_theta=None) -> float:
    """Extra papers a female candidate needs for x.w to match an otherwise
    identical male candidate: |w_gender / w_productivity| converted from
    z units to papers via the subfield count spread."""
    w = dict(zip(FEATURE_NAMES, weights.w))
    if w["productivity_z"] == 0.0:
        raise DataError("productivity weight is zero; conversion undefined")
    if mean_theta is None:
        mean_theta = np.full(stats.sigma.shape[0], 1.0 / stats.sigma.shape[0])
    mean_sigma = float(np.asarray(mean_theta) @ stats.sigma)
    return abs(w["gender_female"] / w["productivity_z"]) * mean_sigma
