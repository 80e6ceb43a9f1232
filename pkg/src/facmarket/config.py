"""Run configuration.

A single JSON file holds everything; every CLI flag overrides its config
key, and precedence is flag > config > default. The effective output
directory is content-addressed: artifacts land in <out>/<config hash> so
runs with different settings can never silently mix.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError


@dataclass
class Config:
    # Input paths
    institutions: str = "institutions.csv"
    faculty: str = "faculty.csv"
    publications: str = "publications.csv"
    out: str = "out"

    # Master seed; all stages derive named substreams from it.
    seed: int = 0

    # Prestige ranking
    rank_restarts: int = 10
    rank_sweeps: int | None = None        # defaults to N^2
    rank_samples: int = 100
    rank_temperature: float = 0.5

    # Topic model
    lda_topics: int = 10
    lda_alpha: float = 5.0
    lda_beta: float = 0.01
    lda_iterations: int = 1000

    # Fitting
    fit_lambda: float = 0.05
    fit_replicates: int = 25
    report_replicates: int = 200
    fit_max_iter: int | None = None
    fit_restarts: int = 5
    features: list = field(default_factory=lambda: [
        "rank_diff", "productivity_z", "hiring_rank",
        "postdoc", "same_region", "gender_female"])

    # Simulation / checking / analysis
    model: str = "logistic"
    model_bias: float = 0.0   # optional logistic intercept, sensitivity only
    runs: int = 1000
    check_runs: int = 100

    # Reference documentation for the region enumeration.
    region_map: str | None = None

    # Report path: also render matplotlib figures next to the CSVs.
    figures: bool = False

    @classmethod
    def load(cls, path=None, overrides=None) -> "Config":
        values = {}
        if path is not None:
            raw = json.loads(Path(path).read_text())
            known = {f.name for f in dataclasses.fields(cls)}
            unknown = set(raw) - known
            if unknown:
                raise DataError(f"unknown config keys: {sorted(unknown)}")
            values.update(raw)
        if overrides:
            values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    # Presentation-only keys that do not affect computed artifact content.
    _NON_CONTENT_KEYS = ("out", "figures", "region_map")

    def hash(self) -> str:
        content = {k: v for k, v in self.to_dict().items()
                   if k not in self._NON_CONTENT_KEYS}
        blob = json.dumps(content, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def outdir(self) -> Path:
        return Path(self.out) / self.hash()
