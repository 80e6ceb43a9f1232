"""Stochastic candidate-to-opening matching.

Each year's observed hires are broken into candidate and opening stubs;
the model re-matches them sequentially. An unfilled opening is drawn with
probability proportional to 1/rank(v) (raw mean ranks, with multiplicity),
then a candidate is drawn from the remaining pool with probability
proportional to the match score of the pair.

Match function variants:
  uniform  - score 1 for every pair (the configuration model)
  step     - 1 if the candidate's doctoral rank is strictly better than
             the opening's rank, else 0, with a uniform fallback when no
             candidate scores
  logistic - (1 + exp(-x.w))^{-1} over the six pair features

Note the asymmetry: opening selection uses raw mean ranks in 1/rank(v),
while the feature vector carries ranks normalized by N so the optimizer
sees comparable scales.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import expit

from .errors import DataError
from .ranking import rank_difference
from .rng import substream

FEATURE_NAMES = ("rank_diff", "productivity_z", "hiring_rank",
                 "postdoc", "same_region", "gender_female")
N_FEATURES = len(FEATURE_NAMES)

UNIFORM = "uniform"
STEP = "step"
LOGISTIC = "logistic"
VARIANTS = (UNIFORM, STEP, LOGISTIC)


@dataclass(frozen=True)
class Weights:
    """Weight vector aligned with FEATURE_NAMES; masked-out entries are
    exactly zero."""

    w: tuple
    active_mask: tuple = (True,) * N_FEATURES

    def __post_init__(self):
        if len(self.w) != N_FEATURES or len(self.active_mask) != N_FEATURES:
            raise DataError(f"weights must have {N_FEATURES} slots")
        for wi, m in zip(self.w, self.active_mask):
            if not m and wi != 0.0:
                raise DataError("masked-out weight must be zero")

    @classmethod
    def from_active(cls, values, active_mask):
        w = [0.0] * N_FEATURES
        it = iter(values)
        for i, m in enumerate(active_mask):
            if m:
                w[i] = float(next(it))
        return cls(w=tuple(w), active_mask=tuple(bool(m) for m in active_mask))

    def as_array(self):
        return np.asarray(self.w, dtype=float)

    def active_values(self):
        return [wi for wi, m in zip(self.w, self.active_mask) if m]


@dataclass(frozen=True)
class MatchModel:
    """bias is an optional intercept added to the logistic logit; the
    default model has none. It is a sensitivity knob, never fitted."""

    variant: str
    weights: Weights | None = None
    bias: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DataError(f"unknown variant {self.variant!r}")
        if self.variant == LOGISTIC and self.weights is None:
            raise DataError("logistic variant requires weights")


@dataclass(frozen=True)
class SimulationRun:
    """One synthetic hiring history: per-year bijections between that
    year's candidates and openings."""

    placements: dict    # faculty id -> institution id
    seed: int
    model: MatchModel


def build_features(candidate, opening_inst, ranking, institutions) -> np.ndarray:
    """Six pair features for (candidate, opening institution)."""
    u = candidate.doctoral_institution
    if u not in ranking.rank or opening_inst not in ranking.rank:
        raise DataError(f"unranked institution in pair ({u!r}, {opening_inst!r})")
    same_region = institutions[u].region == institutions[opening_inst].region
    z = candidate.productivity_z if candidate.productivity_z is not None else 0.0
    return np.array([
        rank_difference(ranking, u, opening_inst),
        z,
        ranking.normalized(opening_inst),
        1.0 if candidate.postdoc else 0.0,
        1.0 if same_region else 0.0,
        1.0 if candidate.gender == "F" else 0.0,
    ])


def score(model, x, cand_doc_rank=None, opening_rank=None) -> float:
    """Match score of one pair. Step needs the raw mean ranks of the
    candidate's doctoral institution and of the opening."""
    if model.variant == UNIFORM:
        return 1.0
    if model.variant == STEP:
        if cand_doc_rank is None or opening_rank is None:
            raise DataError("step variant needs raw ranks")
        return 1.0 if cand_doc_rank < opening_rank else 0.0
    return float(expit(np.dot(np.asarray(x, float), model.weights.as_array())
                       + model.bias))


def select_opening(unfilled_openings, ranking, rng):
    """Draw an opening with probability proportional to 1/rank(v), raw
    mean ranks, with multiplicity."""
    if not unfilled_openings:
        raise DataError("no unfilled openings")
    w = np.array([1.0 / ranking.rank[v] for v in unfilled_openings])
    idx = _weighted_draw(w, rng.random())
    return unfilled_openings[idx]


def select_candidate(model, pool, opening_inst, ranking, institutions, rng):
    """Draw a candidate from the pool with probability proportional to its
    match score; uniform fallback when every score is zero."""
    if not pool:
        raise DataError("empty candidate pool")
    scores = np.array([
        score(model, build_features(c, opening_inst, ranking, institutions),
              cand_doc_rank=ranking.rank[c.doctoral_institution],
              opening_rank=ranking.rank[opening_inst])
        for c in pool
    ])
    if scores.sum() <= 0.0:
        scores = np.ones(len(pool))
    idx = _weighted_draw(scores, rng.random())
    return pool[idx]


def _weighted_draw(weights, u):
    """Index i with probability weights[i]/sum; u is uniform on [0,1)."""
    total = weights.sum()
    r = u * total
    acc = 0.0
    for i, wi in enumerate(weights):
        acc += wi
        if acc > r:
            return i
    return int(np.flatnonzero(weights > 0)[-1])


# ---------------------------------------------------------------------------
# Fast path: per-year matrices consumed by a compiled matching core.

@dataclass(frozen=True)
class YearMatrices:
    """Precomputed, weight-independent inputs for one market year.

    Candidates index rows; distinct opening institutions index columns.
    open_col maps each opening stub to its column.
    """

    year: int
    cand_ids: tuple
    col_inst_ids: tuple
    open_col: np.ndarray        # (n,) int64, per opening stub
    X: np.ndarray               # (n, m, 6) pair features
    open_w: np.ndarray          # (n,) 1/raw rank per opening stub
    step_score: np.ndarray      # (n, m) 0/1
    obs_norm_rank: np.ndarray   # (n,) observed normalized rank per candidate
    col_norm_rank: np.ndarray   # (m,)

    @property
    def n(self):
        return len(self.cand_ids)


@dataclass(frozen=True)
class Market:
    """A full market: year matrices plus the shared ranking, ready for
    repeated simulation. Immutable; safe to share across workers."""

    years: tuple                # YearMatrices, chronological
    ranking: object
    records_by_id: dict

    @property
    def n_candidates(self):
        return sum(y.n for y in self.years)

    def restrict(self, years):
        keep = set(years)
        return Market(years=tuple(y for y in self.years if y.year in keep),
                      ranking=self.ranking, records_by_id=self.records_by_id)


def build_market(records, slices, ranking, institutions) -> Market:
    recs = {r.id: r for r in records}
    years = []
    for my in slices:
        cands = [recs[fid] for fid in my.candidates]
        cols = sorted(set(my.openings))
        col_idx = {v: j for j, v in enumerate(cols)}
        n, m = len(cands), len(cols)
        X = np.empty((n, m, N_FEATURES))
        step_mat = np.empty((n, m))
        for i, c in enumerate(cands):
            for j, v in enumerate(cols):
                X[i, j] = build_features(c, v, ranking, institutions)
                step_mat[i, j] = 1.0 if (ranking.rank[c.doctoral_institution]
                                         < ranking.rank[v]) else 0.0
        open_col = np.array([col_idx[v] for v in my.openings], dtype=np.int64)
        years.append(YearMatrices(
            year=my.year,
            cand_ids=tuple(my.candidates),
            col_inst_ids=tuple(cols),
            open_col=open_col,
            X=X,
            open_w=np.array([1.0 / ranking.rank[v] for v in my.openings]),
            step_score=step_mat,
            obs_norm_rank=np.array([ranking.normalized(c.hiring_institution)
                                    for c in cands]),
            col_norm_rank=np.array([ranking.normalized(v) for v in cols]),
        ))
    return Market(years=tuple(years), ranking=ranking, records_by_id=recs)


def score_matrix(ym, model) -> np.ndarray:
    """(n, m) pair scores for one year under a model."""
    if model.variant == UNIFORM:
        return np.ones((ym.n, len(ym.col_inst_ids)))
    if model.variant == STEP:
        return ym.step_score
    return expit(ym.X @ model.weights.as_array() + model.bias)


@njit(cache=True)
def _match_year(score_mat, open_col, open_w, u1, u2, out):
    """Sequential matching for one year. out[i] = opening stub filled by
    candidate i. Consumes exactly one u1 and one u2 per hire."""
    n = open_col.shape[0]
    cand_alive = np.ones(n, dtype=np.bool_)
    open_alive = np.ones(n, dtype=np.bool_)
    for k in range(n):
        total = 0.0
        for j in range(n):
            if open_alive[j]:
                total += open_w[j]
        r = u1[k] * total
        sel = -1
        acc = 0.0
        for j in range(n):
            if open_alive[j]:
                acc += open_w[j]
                if acc > r:
                    sel = j
                    break
        if sel < 0:
            for j in range(n - 1, -1, -1):
                if open_alive[j] and open_w[j] > 0.0:
                    sel = j
                    break
        open_alive[sel] = False
        c = open_col[sel]
        total = 0.0
        for i in range(n):
            if cand_alive[i]:
                total += score_mat[i, c]
        ci = -1
        if total <= 0.0:
            # Uniform fallback over the remaining pool.
            cnt = 0.0
            for i in range(n):
                if cand_alive[i]:
                    cnt += 1.0
            r = u2[k] * cnt
            acc = 0.0
            for i in range(n):
                if cand_alive[i]:
                    acc += 1.0
                    if acc > r:
                        ci = i
                        break
            if ci < 0:
                for i in range(n - 1, -1, -1):
                    if cand_alive[i]:
                        ci = i
                        break
        else:
            r = u2[k] * total
            acc = 0.0
            for i in range(n):
                if cand_alive[i]:
                    acc += score_mat[i, c]
                    if acc > r:
                        ci = i
                        break
            if ci < 0:
                for i in range(n - 1, -1, -1):
                    if cand_alive[i] and score_mat[i, c] > 0.0:
                        ci = i
                        break
        cand_alive[ci] = False
        out[ci] = sel


def simulate_year(ym, model, rng) -> dict:
    """Match one year; returns faculty id -> institution id. Draws the
    same uniforms in the same order as simulate_history."""
    n = ym.n
    out = np.empty(n, dtype=np.int64)
    smat = score_matrix(ym, model)
    u1 = rng.random(n)
    u2 = rng.random(n)
    _match_year(smat, ym.open_col, ym.open_w, u1, u2, out)
    inst_of_col = ym.col_inst_ids
    return {ym.cand_ids[i]: inst_of_col[ym.open_col[out[i]]] for i in range(n)}


def simulate_history(market, model, seed) -> SimulationRun:
    """One complete synthetic hiring history across all years."""
    if not market.years:
        raise DataError("market has no years")
    rng = substream(seed, "simulate")
    placements = {}
    for ym in market.years:
        placements.update(simulate_year(ym, model, rng))
    return SimulationRun(placements=placements, seed=seed, model=model)


def simulated_norm_ranks(market, model, seed) -> np.ndarray:
    """Normalized ranks of simulated placements, candidate-ordered to
    match observed_norm_ranks. Fast path used by the fitting objective."""
    rng = substream(seed, "simulate")
    parts = []
    for ym in market.years:
        n = ym.n
        out = np.empty(n, dtype=np.int64)
        smat = score_matrix(ym, model)
        _match_year(smat, ym.open_col, ym.open_w, rng.random(n), rng.random(n), out)
        parts.append(ym.col_norm_rank[ym.open_col[out]])
    return np.concatenate(parts)


def observed_norm_ranks(market) -> np.ndarray:
    return np.concatenate([ym.obs_norm_rank for ym in market.years])
