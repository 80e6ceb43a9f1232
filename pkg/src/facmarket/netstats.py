"""Structural network statistics for model checking.

Geodesic and clustering statistics run on the undirected simple projection
of the hiring multigraph (a reproduction assumption, declared in output
metadata); the hiring-specific percentages run on the directed multigraph
itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .data import Edge, HiringNetwork
from .errors import DataError
from .market import simulate_history
from .rng import substream_seed

STAT_NAMES = ("mean_geodesic", "mean_clustering", "pct_reciprocated_hires",
              "pct_reciprocating_institutions", "pct_self_hires",
              "pct_same_region")


@dataclass(frozen=True)
class NetworkStats:
    mean_geodesic: float
    mean_clustering: float
    pct_reciprocated_hires: float
    pct_reciprocating_institutions: float
    pct_self_hires: float
    pct_same_region: float

    def as_dict(self):
        return {name: getattr(self, name) for name in STAT_NAMES}


def _simple_projection(network) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(network.institutions)
    g.add_edges_from((e.u, e.v) for e in network.edges if e.u != e.v)
    return g


def mean_geodesic(network) -> float:
    """Mean shortest-path length over connected ordered pairs of the
    undirected simple projection."""
    if network.n_nodes == 0:
        raise DataError("empty network")
    g = _simple_projection(network)
    total = 0
    pairs = 0
    for _, dists in nx.all_pairs_shortest_path_length(g):
        for d in dists.values():
            if d > 0:
                total += d
                pairs += 1
    return total / pairs if pairs else 0.0


def mean_clustering(network) -> float:
    """Average local clustering on the simple projection; degree < 2 nodes
    contribute 0."""
    if network.n_nodes == 0:
        raise DataError("empty network")
    g = _simple_projection(network)
    return float(nx.average_clustering(g, count_zeros=True))


def pct_reciprocated_hires(network) -> float:
    """Share of non-self-loop edges (with multiplicity) whose reverse pair
    exists at least once."""
    pairs = set((e.u, e.v) for e in network.edges if e.u != e.v)
    edges = [e for e in network.edges if e.u != e.v]
    if not edges:
        return 0.0
    hits = sum(1 for e in edges if (e.v, e.u) in pairs)
    return 100.0 * hits / len(edges)


def pct_reciprocating_institutions(network) -> float:
    """Share of institutions participating in at least one mutually
    reciprocated pair, over all declared institutions."""
    pairs = set((e.u, e.v) for e in network.edges if e.u != e.v)
    members = set()
    for (u, v) in pairs:
        if (v, u) in pairs:
            members.update((u, v))
    if not network.institutions:
        return 0.0
    return 100.0 * len(members) / len(network.institutions)


def pct_self_hires(network) -> float:
    if not network.edges:
        return 0.0
    loops = sum(1 for e in network.edges if e.u == e.v)
    return 100.0 * loops / len(network.edges)


def pct_same_region(network) -> float:
    """Share of edges inside one region; self-loops count as same-region."""
    if not network.edges:
        return 0.0
    inst = network.institutions
    for e in network.edges:
        if e.u not in inst or e.v not in inst:
            raise DataError(f"edge endpoint without region: {e.u!r}->{e.v!r}")
    hits = sum(1 for e in network.edges
               if inst[e.u].region == inst[e.v].region)
    return 100.0 * hits / len(network.edges)


def network_stats(network) -> NetworkStats:
    return NetworkStats(
        mean_geodesic=mean_geodesic(network),
        mean_clustering=mean_clustering(network),
        pct_reciprocated_hires=pct_reciprocated_hires(network),
        pct_reciprocating_institutions=pct_reciprocating_institutions(network),
        pct_self_hires=pct_self_hires(network),
        pct_same_region=pct_same_region(network),
    )


def run_network(run, market, institutions) -> HiringNetwork:
    """Rebuild a hiring network from one simulated history."""
    recs = market.records_by_id
    edges = tuple(Edge(recs[fid].doctoral_institution, inst,
                       recs[fid].hire_year, fid)
                  for fid, inst in run.placements.items())
    inst_map = {i.id: i for i in institutions} if not isinstance(institutions, dict) \
        else institutions
    return HiringNetwork(institutions=inst_map, edges=edges)


def check_report(observed_network, market, models, n_runs=100, seed=0):
    """Observed value and simulated mean +/- standard error per statistic,
    for each model variant.

    models: mapping column name -> MatchModel. Returns a dict of columns:
    {"observed": {...}, name: {stat: (mean, se)}}.
    """
    if n_runs < 2:
        raise DataError("need at least 2 runs for a standard error")
    report = {"observed": network_stats(observed_network).as_dict()}
    for name, model in models.items():
        values = {stat: [] for stat in STAT_NAMES}
        for r in range(n_runs):
            run = simulate_history(market, model,
                                   substream_seed(seed, "analyze", r))
            stats = network_stats(run_network(run, market,
                                              observed_network.institutions))
            for stat in STAT_NAMES:
                values[stat].append(getattr(stats, stat))
        report[name] = {
            stat: (float(np.mean(v)), float(np.std(v, ddof=1) / np.sqrt(n_runs)))
            for stat, v in values.items()
        }
    return report
