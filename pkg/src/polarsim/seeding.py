"""Deterministic random-stream derivation for replica ensembles.

Every stream in a run is a pure function of (master_seed, path): the path is
the SeedSequence spawn key. Conventions used by the runner:

    substream(seed, SIM, i)     event stream of replica i
    substream(seed, STATS, i)   statistics stream of replica i (subsampling,
                                distinct-clan draws, polarity subsampling)
    substream(seed, ORACLE, j)  reference samplers (GEM/PD, lookdown, ...)

Replicas therefore own independent streams regardless of scheduling, and
ensembles reduced in replica-index order are bit-reproducible for any worker
count.
"""

from __future__ import annotations

import numpy as np

__all__ = ["SIM", "STATS", "ORACLE", "substream"]

SIM = 0
STATS = 1
ORACLE = 2


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Independent generator identified by (master_seed, path)."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(path))
    return np.random.default_rng(seq)
