"""Deterministic random-stream management.

All randomness in the package flows from a single master seed. Stages and
replicates get independent substreams derived from (seed, label) or
(seed, index) so any stage can be rerun in isolation and reproduce its
output bit for bit.
"""

from __future__ import annotations

import zlib

import numpy as np

# Named substreams for the pipeline stages.
STAGE_LABELS = ("ranking", "lda", "fit", "simulate", "synth", "analyze")


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def substream(master_seed: int, label: str, index: int = 0) -> np.random.Generator:
    """Generator for a named substream of the master seed."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(_label_key(label), index))
    return np.random.default_rng(ss)


def substream_seed(master_seed: int, label: str, index: int = 0) -> int:
    """A 32-bit integer seed for consumers that cannot take a Generator."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(_label_key(label), index))
    return int(ss.generate_state(1, dtype=np.uint32)[0])
