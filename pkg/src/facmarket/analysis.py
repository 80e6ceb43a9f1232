"""Result analyses: institution-level female-hire counterfactuals,
candidate-level placement errors, the gender-parity forecast, and the
descriptive hypothesis tests.

Conventions, all declared in output metadata:
  - percentile of an actual count within a simulated distribution uses
    the midpoint convention (fraction strictly below + half of equal);
  - "expected" counts are means of the simulated final counts;
  - the chi-squared test carries no continuity correction;
  - candidates with gender U are excluded from gender-conditioned tables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import DataError, ZeroMarginal
from .ranking import rank_difference


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    test: str    # "MannWhitneyU" | "ChiSquared"


@dataclass(frozen=True)
class InstitutionHireDistribution:
    institution: str
    trajectories: np.ndarray    # (n_runs, n_years) cumulative female hires
    final_counts: np.ndarray    # (n_runs,)
    actual_trajectory: np.ndarray
    actual_final: int
    percentile_of_actual: float


@dataclass(frozen=True)
class CandidateOutcome:
    faculty_id: str
    simulated_ranks: np.ndarray
    observed_rank: float
    delta: float     # observed - mean simulated; negative = outperformed


@dataclass(frozen=True)
class ParityForecast:
    slope: float            # fraction per year
    intercept: float        # at calendar year zero
    crossing_year: float | None
    ci_low: float | None
    ci_high: float | None


def midpoint_percentile(samples, actual) -> float:
    """Percentile in [0, 100] with ties split at the midpoint."""
    samples = np.asarray(samples)
    below = np.count_nonzero(samples < actual)
    equal = np.count_nonzero(samples == actual)
    return 100.0 * (below + 0.5 * equal) / samples.size


def mann_whitney_u(a, b) -> TestResult:
    """U for sample a over b via rank sums; two-sided p from the normal
    approximation with tie and continuity corrections."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise DataError("Mann-Whitney requires two nonempty samples")
    n1, n2 = a.size, b.size
    combined = np.concatenate([a, b])
    ranks = sps.rankdata(combined)           # midranks
    r1 = ranks[:n1].sum()
    u = r1 - n1 * (n1 + 1) / 2.0
    n = n1 + n2
    mu = n1 * n2 / 2.0
    _, tie_counts = np.unique(combined, return_counts=True)
    tie_term = float(((tie_counts ** 3 - tie_counts).sum()) / (n * (n - 1))) \
        if n > 1 else 0.0
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return TestResult(statistic=float(u), p_value=1.0, test="MannWhitneyU")
    num = abs(u - mu) - 0.5
    z = max(num, 0.0) / np.sqrt(var)
    p = min(1.0, 2.0 * sps.norm.sf(z))
    return TestResult(statistic=float(u), p_value=float(p), test="MannWhitneyU")


def chi_squared_2x2(table) -> TestResult:
    """Pearson chi-squared on a 2x2 table, 1 df, no continuity
    correction."""
    t = np.asarray(table, dtype=float)
    if t.shape != (2, 2):
        raise DataError("expected a 2x2 table")
    rows = t.sum(axis=1)
    cols = t.sum(axis=0)
    if np.any(rows == 0) or np.any(cols == 0):
        raise ZeroMarginal("zero marginal in contingency table")
    n = t.sum()
    a, b, c, d = t.ravel()
    stat = n * (a * d - b * c) ** 2 / (rows[0] * rows[1] * cols[0] * cols[1])
    return TestResult(statistic=float(stat),
                      p_value=float(sps.chi2.sf(stat, df=1)),
                      test="ChiSquared")


# ---------------------------------------------------------------------------
# Institution-level counterfactuals

def female_hire_distributions(runs, records, institutions=None) -> dict:
    """Per institution: simulated cumulative female-hire trajectories, the
    final-count distribution, and the percentile of the actual count.

    Returns institution id -> InstitutionHireDistribution. Institutions
    that never hire get flat-zero trajectories and percentile 50.
    """
    recs = {r.id: r for r in records}
    years = sorted({r.hire_year for r in records})
    y_idx = {y: i for i, y in enumerate(years)}
    if institutions is None:
        inst_ids = sorted({r.hiring_institution for r in records})
    else:
        inst_ids = sorted(institutions)
    i_idx = {v: i for i, v in enumerate(inst_ids)}
    n_runs = len(runs)

    counts = np.zeros((n_runs, len(inst_ids), len(years)), dtype=np.int32)
    for k, run in enumerate(runs):
        for fid, inst in run.placements.items():
            r = recs[fid]
            if r.gender == "F":
                counts[k, i_idx[inst], y_idx[r.hire_year]] += 1
    cum = np.cumsum(counts, axis=2)

    actual = np.zeros((len(inst_ids), len(years)), dtype=np.int32)
    for r in records:
        if r.gender == "F":
            actual[i_idx[r.hiring_institution], y_idx[r.hire_year]] += 1
    actual_cum = np.cumsum(actual, axis=1)

    out = {}
    for v, i in i_idx.items():
        finals = cum[:, i, -1]
        a = int(actual_cum[i, -1])
        out[v] = InstitutionHireDistribution(
            institution=v,
            trajectories=cum[:, i, :],
            final_counts=finals,
            actual_trajectory=actual_cum[i],
            actual_final=a,
            percentile_of_actual=midpoint_percentile(finals, a),
        )
    return out


def rank_band_summary(distributions, ranking, top_n=50) -> list:
    """Actual minus expected female hires for the top-ranked institutions,
    with the 25th-75th percentile band of (simulated - expected)."""
    ranked = sorted(distributions, key=lambda v: ranking.rank[v])[:top_n]
    rows = []
    for v in ranked:
        d = distributions[v]
        expected = float(d.final_counts.mean())
        q25, q75 = np.percentile(d.final_counts, [25, 75])
        rows.append({
            "institution": v,
            "rank": ranking.rank[v],
            "actual": d.actual_final,
            "expected": expected,
            "median_simulated": float(np.median(d.final_counts)),
            "actual_minus_expected": d.actual_final - expected,
            "band_low": float(q25 - expected),
            "band_high": float(q75 - expected),
            "percentile_of_actual": d.percentile_of_actual,
        })
    return rows


# ---------------------------------------------------------------------------
# Candidate-level placement errors

def candidate_placement_errors(runs, records, ranking) -> list:
    """Per candidate: delta = observed normalized rank minus mean simulated
    normalized rank. Negative delta = placed better than expected."""
    recs = sorted(records, key=lambda r: r.id)
    sims = {r.id: np.empty(len(runs)) for r in recs}
    for k, run in enumerate(runs):
        for r in recs:
            if r.id not in run.placements:
                raise DataError(f"candidate {r.id!r} missing from run {k}")
            sims[r.id][k] = ranking.normalized(run.placements[r.id])
    out = []
    for r in recs:
        obs = ranking.normalized(r.hiring_institution)
        out.append(CandidateOutcome(
            faculty_id=r.id,
            simulated_ranks=sims[r.id],
            observed_rank=obs,
            delta=float(obs - sims[r.id].mean()),
        ))
    return out


def placement_error_by_year(outcomes, records) -> list:
    """Per-year, per-gender mean deltas with 95% normal confidence bands.
    Gender U is excluded."""
    recs = {r.id: r for r in records}
    groups = {}
    for o in outcomes:
        r = recs[o.faculty_id]
        if r.gender not in ("F", "M"):
            continue
        groups.setdefault((r.hire_year, r.gender), []).append(o.delta)
    rows = []
    for (year, gender), deltas in sorted(groups.items()):
        arr = np.asarray(deltas)
        half = 1.96 * arr.std(ddof=1) / np.sqrt(arr.size) if arr.size > 1 else 0.0
        rows.append({"year": year, "gender": gender, "n": arr.size,
                     "mean_delta": float(arr.mean()), "ci_half_width": float(half)})
    return rows


def over_under_performance_tests(outcomes, records) -> dict:
    """Gender comparison of over- and under-performance magnitudes.
    Candidates with delta exactly 0 are excluded."""
    recs = {r.id: r for r in records}
    over = {"F": [], "M": []}
    under = {"F": [], "M": []}
    for o in outcomes:
        g = recs[o.faculty_id].gender
        if g not in ("F", "M") or o.delta == 0.0:
            continue
        (over if o.delta < 0 else under)[g].append(abs(o.delta))
    out = {}
    if over["F"] and over["M"]:
        out["overperformance"] = mann_whitney_u(over["F"], over["M"])
    if under["F"] and under["M"]:
        out["underperformance"] = mann_whitney_u(under["F"], under["M"])
    return out


# ---------------------------------------------------------------------------
# Parity forecast

def yearly_female_fraction(records) -> dict:
    """year -> fraction of that year's hires who are women (U excluded
    from the denominator)."""
    tot = {}
    fem = {}
    for r in records:
        if r.gender == "U":
            continue
        tot[r.hire_year] = tot.get(r.hire_year, 0) + 1
        fem[r.hire_year] = fem.get(r.hire_year, 0) + (r.gender == "F")
    return {y: fem[y] / tot[y] for y in sorted(tot)}


def parity_forecast(fraction_by_year) -> ParityForecast:
    """OLS of the female share on calendar year, extrapolated to the 50%
    crossing, with a CI from where the 95% confidence band of the mean
    response meets 0.5."""
    years = np.array(sorted(fraction_by_year), dtype=float)
    y = np.array([fraction_by_year[int(t)] for t in years])
    if years.size < 10:
        raise DataError("need at least 10 yearly points")
    slope, intercept = np.polyfit(years, y, 1)
    fitted = intercept + slope * years

    n = years.size
    resid = y - fitted
    s2 = float(resid @ resid) / (n - 2)
    sxx = float(((years - years.mean()) ** 2).sum())
    tcrit = sps.t.ppf(0.975, n - 2)

    def band(x, sign):
        half = tcrit * np.sqrt(s2 * (1.0 / n + (x - years.mean()) ** 2 / sxx))
        return intercept + slope * x + sign * half

    first = years[0]
    if fitted[0] >= 0.5 - 1e-9:    # tolerance: polyfit on a flat series
        return ParityForecast(float(slope), float(intercept),
                              float(first), float(first), float(first))
    if slope <= 0:
        return ParityForecast(float(slope), float(intercept), None, None, None)
    crossing = (0.5 - intercept) / slope

    def solve(f):
        lo, hi = first, crossing + 20 * (crossing - first) + 1.0
        if f(lo) >= 0.5:
            return lo
        if f(hi) < 0.5:
            return None
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(mid) < 0.5:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    ci_low = solve(lambda x: band(x, +1))
    ci_high = solve(lambda x: band(x, -1))
    return ParityForecast(float(slope), float(intercept), float(crossing),
                          None if ci_low is None else float(ci_low),
                          None if ci_high is None else float(ci_high))


# ---------------------------------------------------------------------------
# Descriptive cross-tabulations

def _direction(record, ranking):
    """'up' when the hiring institution outranks the doctoral one."""
    d = rank_difference(ranking, record.doctoral_institution,
                        record.hiring_institution)
    if d == 0:
        return "self" if record.doctoral_institution == record.hiring_institution else "tie"
    return "up" if d < 0 else "down"


def descriptive_report(records, ranking, institutions) -> dict:
    """The descriptive gender cross-tabulations and their tests.

    Scored records required (productivity_z set) for the z tables. Tests
    are skipped (entries absent) when a gender group is empty.
    """
    labeled = [r for r in records if r.gender in ("F", "M")]
    non_self = [r for r in labeled
                if r.doctoral_institution != r.hiring_institution]
    out = {}

    def updown_table(rs):
        table = {"M": {"down": 0, "up": 0}, "F": {"down": 0, "up": 0}}
        for r in rs:
            d = _direction(r, ranking)
            if d in ("up", "down"):
                table[r.gender][d] += 1
        return table

    moves = updown_table(non_self)
    out["moves_by_gender"] = moves
    t = np.array([[moves["M"]["down"], moves["M"]["up"]],
                  [moves["F"]["down"], moves["F"]["up"]]])
    if t.sum(axis=1).all() and t.sum(axis=0).all():
        out["moves_by_gender_test"] = chi_squared_2x2(t)

    # Rank-difference comparison including and excluding self-hires.
    def rd(rs):
        return {g: [rank_difference(ranking, r.doctoral_institution,
                                    r.hiring_institution)
                    for r in rs if r.gender == g] for g in ("F", "M")}
    inc = rd(labeled)
    exc = rd(non_self)
    if inc["F"] and inc["M"]:
        out["rank_diff_test_incl_self"] = mann_whitney_u(inc["F"], inc["M"])
    if exc["F"] and exc["M"]:
        out["rank_diff_test_excl_self"] = mann_whitney_u(exc["F"], exc["M"])

    # Self-hire rates.
    self_rates = {}
    for g in ("F", "M"):
        rs = [r for r in labeled if r.gender == g]
        if rs:
            selfed = sum(1 for r in rs
                         if r.doctoral_institution == r.hiring_institution)
            self_rates[g] = {"n": len(rs), "self": selfed,
                             "rate": selfed / len(rs)}
    out["self_hire_rates"] = self_rates
    if len(self_rates) == 2:
        t = np.array([[self_rates["M"]["self"],
                       self_rates["M"]["n"] - self_rates["M"]["self"]],
                      [self_rates["F"]["self"],
                       self_rates["F"]["n"] - self_rates["F"]["self"]]])
        if t.sum(axis=0).all():
            out["self_hire_test"] = chi_squared_2x2(t)

    # Median productivity z by gender x direction.
    scored = [r for r in labeled if r.productivity_z is not None]
    med = {}
    for g in ("F", "M"):
        row = {}
        for cat in ("down", "up", "all"):
            zs = [r.productivity_z for r in scored if r.gender == g
                  and (cat == "all" or _direction(r, ranking) == cat)]
            if zs:
                row[cat] = float(np.median(zs))
        med[g] = row
    out["median_z"] = med
    for cat in ("down", "up", "all"):
        f = [r.productivity_z for r in scored if r.gender == "F"
             and (cat == "all" or _direction(r, ranking) == cat)]
        m = [r.productivity_z for r in scored if r.gender == "M"
             and (cat == "all" or _direction(r, ranking) == cat)]
        if f and m:
            out[f"z_test_{cat}"] = mann_whitney_u(f, m)

    # Region change x direction x gender (movers only).
    inst = institutions if isinstance(institutions, dict) \
        else {i.id: i for i in institutions}
    movers = [r for r in non_self
              if inst[r.doctoral_institution].region
              != inst[r.hiring_institution].region]
    cross = updown_table(movers)
    out["cross_region_moves"] = cross
    t = np.array([[cross["M"]["down"], cross["M"]["up"]],
                  [cross["F"]["down"], cross["F"]["up"]]])
    if t.sum(axis=1).all() and t.sum(axis=0).all():
        out["cross_region_test"] = chi_squared_2x2(t)

    # Postdoc x direction x gender.
    pd = updown_table([r for r in non_self if r.postdoc])
    out["postdoc_moves"] = pd
    t = np.array([[pd["M"]["down"], pd["M"]["up"]],
                  [pd["F"]["down"], pd["F"]["up"]]])
    if t.sum(axis=1).all() and t.sum(axis=0).all():
        out["postdoc_moves_test"] = chi_squared_2x2(t)

    # Postdoc rates by gender, and the pre/post-2002 split.
    pd_rates = {}
    for g in ("F", "M"):
        rs = [r for r in labeled if r.gender == g]
        if rs:
            k = sum(1 for r in rs if r.postdoc)
            pd_rates[g] = {"n": len(rs), "postdoc": k, "rate": k / len(rs)}
    out["postdoc_rates"] = pd_rates
    pre = [r for r in labeled if r.hire_year < 2002]
    post = [r for r in labeled if r.hire_year >= 2002]
    if pre and post:
        t = np.array([[sum(r.postdoc for r in pre),
                       sum(not r.postdoc for r in pre)],
                      [sum(r.postdoc for r in post),
                       sum(not r.postdoc for r in post)]])
        if t.sum(axis=1).all() and t.sum(axis=0).all():
            out["postdoc_era_test"] = chi_squared_2x2(t)
    post_f = [r.productivity_z for r in post
              if r.gender == "F" and r.productivity_z is not None]
    post_m = [r.productivity_z for r in post
              if r.gender == "M" and r.productivity_z is not None]
    if post_f and post_m:
        out["post2002_z_test"] = mann_whitney_u(post_f, post_m)
    return out


def expected_female_total(distributions) -> float:
    """Sum over institutions of mean simulated final female counts; equals
    the total number of female candidates (conservation)."""
    return float(sum(d.final_counts.mean() for d in distributions.values()))
