"""Shared fixtures: tiny institution sets, record builders, and small
random multigraphs."""

import numpy as np
import pytest

from facmarket.data import (FacultyRecord, HiringNetwork, Institution,
                            build_network)


def make_institution(iid, region="Northeast", name=None):
    return Institution(iid, name or f"University {iid}", region)


def make_record(fid, doc, hire, year=2000, gender="M", postdoc=False, **kw):
    return FacultyRecord(id=fid, doctoral_institution=doc,
                         hiring_institution=hire, hire_year=year,
                         gender=gender, postdoc=postdoc, **kw)


@pytest.fixture
def abc_institutions():
    return [make_institution("a", "Northeast"),
            make_institution("b", "Midwest"),
            make_institution("c", "Northeast")]


@pytest.fixture
def abc_map(abc_institutions):
    return {i.id: i for i in abc_institutions}


def network_from_pairs(pairs, institutions=None, year=2000):
    """Build a HiringNetwork from (u, v) pairs; institutions default to the
    node set."""
    if institutions is None:
        ids = sorted({x for p in pairs for x in p})
        institutions = [make_institution(i) for i in ids]
    records = [make_record(f"f{k}", u, v, year=year)
               for k, (u, v) in enumerate(pairs)]
    return build_network(records, institutions)


def random_multigraph(rng, max_n=7, max_edges=30):
    """A random directed multigraph with self-loops and parallel edges."""
    n = int(rng.integers(2, max_n + 1))
    m = int(rng.integers(1, max_edges + 1))
    ids = [f"n{i}" for i in range(n)]
    pairs = [(ids[int(rng.integers(n))], ids[int(rng.integers(n))])
             for _ in range(m)]
    return network_from_pairs(pairs)
