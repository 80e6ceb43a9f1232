"""Core data model: institutions, faculty records, the hiring multigraph,
and per-year market slices.

All values are immutable after construction and safe to share across
threads. Loading itself is single-threaded.

Input files (UTF-8 CSV, fixed column order, no quoting of ids):
  institutions.csv: institution_id,name,region
  faculty.csv:      faculty_id,phd_institution,hire_institution,hire_year,gender,postdoc
  publications.csv: faculty_id,title,year   (consumed by the productivity module)
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import DataError, DuplicateId, InvalidRegion, UnknownInstitution

log = logging.getLogger(__name__)

# Four U.S. Census regions plus Canada. The region map is fixed at the
# coarse 4-region Census partition rather than the 9 divisions.
REGIONS = ("Northeast", "Midwest", "South", "West", "Canada")

GENDERS = ("F", "M", "U")

COHORT_START = 1970
COHORT_END = 2011


@dataclass(frozen=True)
class Institution:
    id: str
    name: str
    region: str

    def __post_init__(self):
        if self.region not in REGIONS:
            raise InvalidRegion(f"institution {self.id!r}: bad region {self.region!r}")


@dataclass(frozen=True)
class FacultyRecord:
    """One person in the market.

    ``pub_count``, ``topic_mix`` and ``productivity_z`` are unset at load
    time and filled by the productivity module (returning new records).
    """

    id: str
    doctoral_institution: str
    hiring_institution: str
    hire_year: int
    gender: str          # F | M | U
    postdoc: bool
    pub_count: int = 0
    topic_mix: tuple = ()
    productivity_z: float | None = None

    def with_productivity(self, pub_count, topic_mix, z) -> "FacultyRecord":
        return replace(self, pub_count=int(pub_count),
                       topic_mix=tuple(topic_mix), productivity_z=float(z))


@dataclass(frozen=True)
class Edge:
    """One hire: a graduate of u starting as assistant professor at v."""

    u: str
    v: str
    year: int
    faculty_id: str


@dataclass(frozen=True)
class HiringNetwork:
    """Directed multigraph of institutions; parallel edges and self-loops
    are both meaningful."""

    institutions: dict
    edges: tuple

    @property
    def n_nodes(self) -> int:
        return len(self.institutions)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def node_ids(self):
        return list(self.institutions)

    def edge_multiset(self):
        """Multiset of (u, v) pairs as a dict with counts."""
        counts = {}
        for e in self.edges:
            counts[(e.u, e.v)] = counts.get((e.u, e.v), 0) + 1
        return counts


@dataclass(frozen=True)
class MarketYear:
    """The stub decomposition of one hiring year: an unordered candidate
    multiset and an unordered opening multiset of equal size."""

    year: int
    candidates: tuple   # faculty ids
    openings: tuple     # institution ids, with multiplicity

    def __post_init__(self):
        if len(self.candidates) != len(self.openings):
            raise DataError(f"year {self.year}: {len(self.candidates)} candidates "
                            f"vs {len(self.openings)} openings")


def _read_rows(path, expected_header):
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing input file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected header {expected_header}")
        if [h.strip() for h in header] != expected_header:
            raise DataError(f"{path}: bad header {header!r}, expected {expected_header}")
        for i, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(expected_header):
                raise DataError(f"{path}:{i}: expected {len(expected_header)} fields, got {len(row)}")
            yield [c.strip() for c in row]


def load_institutions(path) -> list:
    """Load institutions.csv. Duplicate ids and unknown regions are errors."""
    out, seen = [], set()
    for inst_id, name, region in _read_rows(path, ["institution_id", "name", "region"]):
        if inst_id in seen:
            raise DuplicateId(f"duplicate institution id {inst_id!r}")
        seen.add(inst_id)
        out.append(Institution(inst_id, name, region))
    return out


def load_faculty(path, institutions) -> list:
    """Load faculty.csv against a declared institution list."""
    known = {inst.id for inst in institutions}
    out, seen = [], set()
    header = ["faculty_id", "phd_institution", "hire_institution",
              "hire_year", "gender", "postdoc"]
    for fid, phd, hire, year, gender, postdoc in _read_rows(path, header):
        if fid in seen:
            raise DuplicateId(f"duplicate faculty id {fid!r}")
        seen.add(fid)
        for inst in (phd, hire):
            if inst not in known:
                raise UnknownInstitution(f"faculty {fid!r}: unknown institution {inst!r}")
        try:
            year_i = int(year)
        except ValueError:
            raise DataError(f"faculty {fid!r}: non-integer hire_year {year!r}")
        if gender not in GENDERS:
            raise DataError(f"faculty {fid!r}: bad gender token {gender!r}")
        if postdoc not in ("0", "1"):
            raise DataError(f"faculty {fid!r}: bad postdoc flag {postdoc!r}")
        out.append(FacultyRecord(fid, phd, hire, year_i, gender, postdoc == "1"))
    return out


def filter_cohort(records, institutions=None) -> list:
    """Keep records inside the 1970-2011 window whose institutions are both
    in sample. Pure filtering (idempotent); counts are logged."""
    known = {inst.id for inst in institutions} if institutions is not None else None
    kept = []
    for r in records:
        if not (COHORT_START <= r.hire_year <= COHORT_END):
            continue
        if known is not None and (r.doctoral_institution not in known
                                  or r.hiring_institution not in known):
            continue
        kept.append(r)
    log.info("cohort filter: kept %d of %d records", len(kept), len(records))
    return kept


def build_network(records, institutions) -> HiringNetwork:
    """One directed edge per filtered record; multiplicities preserved.
    Declared institutions appear as nodes even when isolated."""
    inst_map = {inst.id: inst for inst in institutions}
    edges = tuple(Edge(r.doctoral_institution, r.hiring_institution, r.hire_year, r.id)
                  for r in records)
    return HiringNetwork(institutions=inst_map, edges=edges)


def year_slices(network) -> list:
    """Break the hiring edges into per-year candidate and opening stub sets.

    Candidates and openings within a year are unordered multisets; their
    pairing is what the matching model regenerates.
    """
    by_year = {}
    for e in network.edges:
        by_year.setdefault(e.year, []).append(e)
    out = []
    for year in sorted(by_year):
        es = by_year[year]
        out.append(MarketYear(year=year,
                              candidates=tuple(e.faculty_id for e in es),
                              openings=tuple(e.v for e in es)))
    return out
