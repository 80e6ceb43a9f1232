"""Minimum-violation prestige ranking.

A violation is a hire "up" the hierarchy: an edge (u, v) where v sits at a
better (smaller) position than u. Prestige rank of an institution is its
mean position across sampled orderings that achieve the minimum violation
count. Self-loops never count as violations.

The sampler is a low-temperature Metropolis walk on permutations:
proposals are adjacent transpositions or random pair swaps (50/50);
downhill and flat moves are always accepted, uphill moves with probability
exp(-delta / T). Orderings are recorded every `sweeps` proposals whenever
the walk sits at the best-known count. The positive temperature lets the
walk hop between plateau components that are not connected by
equal-violation swaps; conditional on the minimal level the stationary
distribution is uniform over minimal orderings, which is what mean-rank
aggregation needs. Multiple random restarts guard against missed minima.
The plateau exploration schedule is one defensible choice among several;
see the docs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DataError
from .rng import substream, substream_seed


@dataclass(frozen=True)
class Ordering:
    """A full ordering of institutions; position 1 is most prestigious."""

    position: dict  # institution id -> 1-based position

    def __post_init__(self):
        n = len(self.position)
        if sorted(self.position.values()) != list(range(1, n + 1)):
            raise DataError("ordering is not a permutation")


@dataclass(frozen=True)
class PrestigeRanking:
    rank: dict                # institution id -> mean position (1-based)
    min_violations: int
    violation_fraction: float
    n_samples: int = 0

    @property
    def n(self) -> int:
        return len(self.rank)

    def normalized(self, inst_id) -> float:
        """Rank scaled into (0, 1]; what downstream features consume."""
        return self.rank[inst_id] / self.n


def _edge_arrays(network):
    """Non-self-loop edges as index arrays with multiplicity weights."""
    nodes = sorted(network.institutions)
    idx = {u: i for i, u in enumerate(nodes)}
    counts = {}
    for e in network.edges:
        if e.u == e.v:
            continue
        key = (idx[e.u], idx[e.v])
        counts[key] = counts.get(key, 0) + 1
    eu = np.array([k[0] for k in sorted(counts)], dtype=np.int64)
    ev = np.array([k[1] for k in sorted(counts)], dtype=np.int64)
    ew = np.array([counts[k] for k in sorted(counts)], dtype=np.float64)
    return nodes, eu, ev, ew


def count_violations(network, ordering) -> int:
    """Non-self-loop edges (u, v), with multiplicity, where v's position is
    better (smaller) than u's."""
    for u in network.institutions:
        if u not in ordering.position:
            raise DataError(f"ordering missing institution {u!r}")
    total = 0
    pos = ordering.position
    for e in network.edges:
        if e.u != e.v and pos[e.v] < pos[e.u]:
            total += 1
    return total


@njit(cache=True)
def _violations(pos, eu, ev, ew):
    total = 0.0
    for k in range(eu.shape[0]):
        if pos[ev[k]] < pos[eu[k]]:
            total += ew[k]
    return total


@njit(cache=True)
def _mvr_walk(n, eu, ev, ew, inc_ptr, inc_edge, sweeps, samples, seed,
              temperature, out_perms, out_viols):
    """One restart of the walk. Takes `samples` recording opportunities,
    one every `sweeps` proposals; a recording is skipped (violation count
    stored as -1) when the walk is above its best-known count. The
    best-seen ordering is always stored in the final slot."""
    np.random.seed(seed)
    order = np.random.permutation(n)          # position -> node
    pos = np.empty(n, dtype=np.int64)         # node -> position
    for p in range(n):
        pos[order[p]] = p
    viol = _violations(pos, eu, ev, ew)
    best = viol
    best_perm = np.empty(n, dtype=np.int64)
    for p in range(n):
        best_perm[order[p]] = p + 1
    for s in range(samples):
        for _ in range(sweeps):
            if np.random.random() < 0.5:
                pa = np.random.randint(0, n - 1)
                pb = pa + 1
            else:
                pa = np.random.randint(0, n)
                pb = np.random.randint(0, n)
                if pa == pb:
                    continue
            a = order[pa]
            b = order[pb]
            # Delta over edges incident to a or b only.
            delta = 0.0
            for node, other in ((a, b), (b, a)):
                for t in range(inc_ptr[node], inc_ptr[node + 1]):
                    k = inc_edge[t]
                    u = eu[k]
                    v = ev[k]
                    if node == b and (u == a or v == a):
                        continue  # a-b edges already handled from a's list
                    old = 1.0 if pos[v] < pos[u] else 0.0
                    pu = pos[u]
                    pv = pos[v]
                    if u == a:
                        pu = pos[b]
                    elif u == b:
                        pu = pos[a]
                    if v == a:
                        pv = pos[b]
                    elif v == b:
                        pv = pos[a]
                    new = 1.0 if pv < pu else 0.0
                    delta += ew[k] * (new - old)
            if delta <= 0.0 or np.random.random() < np.exp(-delta / temperature):
                order[pa] = b
                order[pb] = a
                pos[a] = pb
                pos[b] = pa
                viol += delta
                if viol < best:
                    best = viol
                    for p in range(n):
                        best_perm[order[p]] = p + 1
        if viol <= best:
            for p in range(n):
                out_perms[s, order[p]] = p + 1
            out_viols[s] = viol
        else:
            out_viols[s] = -1.0
    out_perms[samples] = best_perm
    out_viols[samples] = best


def sample_mvr(network, restarts=10, sweeps=None, samples=100, seed=0,
               temperature=0.5):
    """Sample orderings at the minimum violation count found.

    Returns a list of (Ordering, violations) pairs, all at the global
    minimum across restarts. Deterministic given the seed; restarts own
    private streams derived from (seed, restart index).
    """
    if network.n_nodes == 0:
        raise DataError("empty network")
    nodes, eu, ev, ew = _edge_arrays(network)
    n = len(nodes)
    if n == 1:
        return [(Ordering({nodes[0]: 1}), 0)]
    if sweeps is None:
        sweeps = n * n
    # CSR incidence lists over the deduplicated weighted edges.
    inc = [[] for _ in range(n)]
    for k in range(eu.shape[0]):
        inc[eu[k]].append(k)
        if ev[k] != eu[k]:
            inc[ev[k]].append(k)
    inc_ptr = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        inc_ptr[i + 1] = inc_ptr[i] + len(inc[i])
    inc_edge = np.concatenate([np.array(lst, dtype=np.int64) for lst in inc]) \
        if inc_ptr[-1] else np.zeros(0, dtype=np.int64)

    all_perms, all_viols = [], []
    for r in range(restarts):
        out_perms = np.zeros((samples + 1, n), dtype=np.int64)
        out_viols = np.zeros(samples + 1, dtype=np.float64)
        _mvr_walk(n, eu, ev, ew, inc_ptr, inc_edge, sweeps, samples,
                  substream_seed(seed, "ranking", r), temperature,
                  out_perms, out_viols)
        all_perms.append(out_perms)
        all_viols.append(out_viols)
    perms = np.concatenate(all_perms)
    viols = np.concatenate(all_viols)
    keep = viols >= 0
    perms, viols = perms[keep], viols[keep]
    vmin = viols.min()
    out = []
    for row, v in zip(perms[viols == vmin], viols[viols == vmin]):
        out.append((Ordering({nodes[i]: int(row[i]) for i in range(n)}), int(v)))
    return out


def mean_rank(network, samples) -> PrestigeRanking:
    """Aggregate sampled minimal orderings into mean positions."""
    if not samples:
        raise DataError("no ordering samples")
    vmin = min(v for _, v in samples)
    if any(v != vmin for _, v in samples):
        raise DataError("samples do not share the minimal violation count")
    nodes = sorted(network.institutions)
    totals = {u: 0.0 for u in nodes}
    for ordering, _ in samples:
        for u in nodes:
            totals[u] += ordering.position[u]
    k = len(samples)
    non_self = sum(1 for e in network.edges if e.u != e.v)
    return PrestigeRanking(
        rank={u: totals[u] / k for u in nodes},
        min_violations=int(vmin),
        violation_fraction=(vmin / non_self) if non_self else 0.0,
        n_samples=k,
    )


def brute_force_mvr(network, max_n=8) -> PrestigeRanking:
    """Exact mean rank over every minimum-violation ordering, by full
    enumeration. Testing oracle; refuses N > max_n."""
    nodes = sorted(network.institutions)
    n = len(nodes)
    if n > max_n:
        raise DataError(f"brute force limited to N <= {max_n}, got {n}")
    _, eu, ev, ew = _edge_arrays(network)
    best = None
    minimal = []
    pos = np.empty(n, dtype=np.int64)
    for perm in itertools.permutations(range(n)):
        for p, node in enumerate(perm):
            pos[node] = p
        v = _violations(pos, eu, ev, ew)
        if best is None or v < best:
            best = v
            minimal = [perm]
        elif v == best:
            minimal.append(perm)
    totals = np.zeros(n)
    for perm in minimal:
        for p, node in enumerate(perm):
            totals[node] += p + 1
    non_self = sum(1 for e in network.edges if e.u != e.v)
    best = 0.0 if best is None else best
    return PrestigeRanking(
        rank={nodes[i]: totals[i] / len(minimal) for i in range(n)},
        min_violations=int(best),
        violation_fraction=(best / non_self) if non_self else 0.0,
        n_samples=len(minimal),
    )


def rank_difference(ranking, u, v) -> float:
    """(rank(v) - rank(u)) / N. Positive means the candidate moved down
    the hierarchy (hired below their doctorate); negative means up."""
    if u not in ranking.rank or v not in ranking.rank:
        raise DataError(f"unranked institution in pair ({u!r}, {v!r})")
    return (ranking.rank[v] - ranking.rank[u]) / ranking.n


def compute_ranking(network, restarts=10, sweeps=None, samples=100, seed=0,
                    temperature=0.5) -> PrestigeRanking:
    """Sample MVRs and aggregate: the one-call entry point."""
    return mean_rank(network, sample_mvr(network, restarts=restarts,
                                         sweeps=sweeps, samples=samples,
                                         seed=seed, temperature=temperature))
