"""Independent test oracles.

Everything here is deliberately written against the contract, not the
implementation: exact enumeration of the sequential matching process and
pair-counting statistics, with no shared code paths.
"""

import numpy as np
from scipy import stats as sps


def enumerate_matchings(score_mat, open_col, open_w):
    """Exact outcome distribution of the sequential matching process.

    Returns {assignment: probability} where an assignment is the tuple of
    column indices, one per candidate row. Openings are drawn with
    probability proportional to open_w over the unfilled stubs, then a
    candidate proportional to its score in that column (uniform fallback
    when every remaining score is zero).
    """
    n = len(open_col)

    def rec(cands, opens):
        if not cands:
            return {(): 1.0}
        out = {}
        total_w = sum(open_w[j] for j in opens)
        for j in opens:
            pj = open_w[j] / total_w
            if pj == 0.0:
                continue
            col = open_col[j]
            scores = [score_mat[i, col] for i in cands]
            s = sum(scores)
            probs = [x / s for x in scores] if s > 0 \
                else [1.0 / len(cands)] * len(cands)
            rest_opens = tuple(x for x in opens if x != j)
            for i, pi in zip(cands, probs):
                if pi == 0.0:
                    continue
                rest = rec(tuple(x for x in cands if x != i), rest_opens)
                for sub, p in rest.items():
                    # Reassemble the full assignment in candidate order.
                    full = {}
                    for c, cc in zip([x for x in cands if x != i], sub):
                        full[c] = cc
                    full[i] = col
                    key = tuple(full[c] for c in sorted(full))
                    out[key] = out.get(key, 0.0) + pj * pi * p
        return out

    dist = rec(tuple(range(n)), tuple(range(n)))
    assert abs(sum(dist.values()) - 1.0) < 1e-12
    return dist


def mann_whitney_u_bruteforce(a, b):
    """U by direct pair counting: wins plus half-ties."""
    u = 0.0
    for x in a:
        for y in b:
            if x > y:
                u += 1.0
            elif x == y:
                u += 0.5
    return u


def mann_whitney_p_reference(a, b):
    """Two-sided asymptotic p with tie and continuity corrections, via
    scipy's independent implementation."""
    res = sps.mannwhitneyu(a, b, alternative="two-sided",
                           use_continuity=True, method="asymptotic")
    return float(res.pvalue)


def chi_squared_2x2_hand(table):
    """Pearson statistic from the definition: sum (O-E)^2 / E."""
    t = np.asarray(table, dtype=float)
    n = t.sum()
    stat = 0.0
    for i in range(2):
        for j in range(2):
            e = t[i].sum() * t[:, j].sum() / n
            stat += (t[i, j] - e) ** 2 / e
    return stat, float(sps.chi2.sf(stat, df=1))
