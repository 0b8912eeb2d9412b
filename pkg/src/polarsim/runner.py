"""Replica-ensemble orchestration.

Each replica owns an event stream and a statistics stream derived from
(master seed, replica index); replicas may run on a thread pool (the kernels
release the GIL) and results are always reduced in replica-index order, so
ensemble outputs are bit-reproducible for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import genealogy, kernels, seeding
from .engine import MembraneState
from .errors import ConfigError
from .params import Params

__all__ = ["EnsembleSpec", "ReplicaResult", "snapshot_schedule", "run_replica",
           "run_ensemble", "states_from_trajectory"]


@dataclass(frozen=True)
class EnsembleSpec:
    """Shape of one ensemble run (per replica)."""

    t_end: float
    snapshot_times: tuple
    dt_max: float
    epsilon: float | None = None
    max_pairs: int = 10_000
    hemisphere_mode: str = "auto"
    distinct_sizes: tuple = ()
    keep_states: bool = False


@dataclass
class ReplicaResult:
    index: int
    stats: list
    spread: genealogy.SpreadAccumulator
    largest: np.ndarray
    events: tuple
    distinct: dict = field(default_factory=dict)
    states: list | None = None


def snapshot_schedule(burn_in: float, interval: float, t_end: float) -> np.ndarray:
    """Snapshot times burn_in, burn_in+interval, ... capped at t_end."""
    if interval <= 0.0:
        raise ConfigError("snapshot_interval must be > 0")
    if t_end < burn_in:
        raise ConfigError(f"t_end ({t_end}) must not precede burn_in ({burn_in})")
    count = int((t_end - burn_in) / interval + 1e-9) + 1
    return burn_in + interval * np.arange(count)


def states_from_trajectory(params: Params, dt_max: float,
                           data: kernels.TrajectoryData):
    """Materialized MembraneState copies for each recorded snapshot."""
    out = []
    for s in range(data.times.shape[0]):
        n = int(data.n[s])
        out.append(MembraneState.from_arrays(
            params.n_total, dt_max, params.diffusion, float(data.times[s]),
            data.positions[s, :n].copy(), data.clans[s, :n].copy(),
            np.full(n, float(data.times[s])),
            next_clan_id=int(data.next_clan_ids[s]),
        ))
    return out


def run_replica(params: Params, spec: EnsembleSpec, master_seed: int,
                index: int) -> ReplicaResult:
    """Run one replica and compute its per-snapshot statistics."""
    sim_rng = seeding.substream(master_seed, seeding.SIM, index)
    stats_rng = seeding.substream(master_seed, seeding.STATS, index)
    data = kernels.run_trajectory(params, spec.t_end, spec.snapshot_times,
                                  spec.dt_max, sim_rng)
    states = states_from_trajectory(params, spec.dt_max, data)
    stats = []
    acc = genealogy.SpreadAccumulator()
    distinct: dict[int, list[int]] = {m: [] for m in spec.distinct_sizes}
    for state in states:
        row = genealogy.snapshot_stats(
            state, eps=spec.epsilon, mode=spec.hemisphere_mode,
            max_pairs=spec.max_pairs, rng=stats_rng,
        )
        stats.append(row)
        acc.num += row.spread_num
        acc.den += row.spread_den
        if state.n > 0:
            for m in spec.distinct_sizes:
                distinct[m].append(genealogy.distinct_clans(state, m, stats_rng))
    largest = np.array([s.largest for s in stats])
    return ReplicaResult(
        index=index,
        stats=stats,
        spread=acc,
        largest=largest,
        events=data.events,
        distinct=distinct,
        states=states if spec.keep_states else None,
    )


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def run_ensemble(params: Params, spec: EnsembleSpec, master_seed: int,
                 replicas: int, workers: int | None = None) -> list[ReplicaResult]:
    """Run `replicas` independent replicas; results ordered by replica index."""
    if workers is None:
        workers = default_workers()
    workers = min(workers, replicas)
    if workers <= 1:
        return [run_replica(params, spec, master_seed, i) for i in range(replicas)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(
            lambda i: run_replica(params, spec, master_seed, i), range(replicas)
        ))
