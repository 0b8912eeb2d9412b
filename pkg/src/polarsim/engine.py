"""Exact event-driven simulation of the N-molecule membrane model.

This is the reference implementation: a readable event loop with lazily
materialized diffusion, exercised directly by the unit tests. Heavy ensemble
runs go through the compiled kernels in `kernels`, which implement the same
algorithm and are cross-validated against this engine in distribution.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from . import sphere
from .errors import InvalidParameter, Stuck, Subcritical
from .params import Params

__all__ = [
    "Molecule",
    "MembraneState",
    "Association",
    "Dissociation",
    "Recruitment",
    "Rates",
    "EventCounts",
    "HittingResult",
    "SimulationResult",
    "empty_state",
    "total_rate",
    "draw_event",
    "apply_event",
    "simulate",
    "simulate_counts",
]


@dataclass(frozen=True)
class Molecule:
    """One membrane molecule: position on the sphere, clan id, and the time
    its position was last materialized."""

    position: np.ndarray
    clan: int
    last_update: float


@dataclass(frozen=True)
class Association:
    """A cytosol molecule joins the membrane at a uniform location, founding
    a new clan."""


@dataclass(frozen=True)
class Dissociation:
    """The membrane molecule at `victim` returns to the cytosol."""

    victim: int


@dataclass(frozen=True)
class Recruitment:
    """The membrane molecule at `parent` pulls a cytosol molecule to its own
    location; the offspring copies position and clan."""

    parent: int


Rates = namedtuple("Rates", ["total", "association", "dissociation", "recruitment"])


class MembraneState:
    """Mutable membrane configuration backed by capacity-N arrays.

    The first `n` rows of positions/clans/last_update are the live molecules.
    Clan ids come from a monotone per-run counter and are never reused.
    Removal swaps with the last row; molecule order carries no meaning.
    """

    def __init__(self, n_total: int, dt_max: float, diffusion: float = 0.0,
                 now: float = 0.0):
        self.n_total = n_total
        self.dt_max = dt_max
        self.diffusion = diffusion
        self.now = now
        self.n = 0
        self.next_clan_id = 0
        self._pos = np.zeros((n_total, 3))
        self._clan = np.zeros(n_total, dtype=np.int64)
        self._last = np.zeros(n_total)

    @classmethod
    def from_arrays(cls, n_total, dt_max, diffusion, now, positions, clans,
                    last_update, next_clan_id) -> "MembraneState":
        state = cls(n_total, dt_max, diffusion, now)
        n = len(clans)
        state.n = n
        state._pos[:n] = positions
        state._clan[:n] = clans
        state._last[:n] = last_update
        state.next_clan_id = next_clan_id
        return state

    @property
    def positions(self) -> np.ndarray:
        return self._pos[: self.n]

    @property
    def clans(self) -> np.ndarray:
        return self._clan[: self.n]

    @property
    def last_update(self) -> np.ndarray:
        return self._last[: self.n]

    @property
    def h(self) -> float:
        return self.n / self.n_total

    @property
    def cytosol(self) -> int:
        return self.n_total - self.n

    @property
    def molecules(self) -> list[Molecule]:
        return [
            Molecule(self._pos[i].copy(), int(self._clan[i]), float(self._last[i]))
            for i in range(self.n)
        ]

    def snapshot(self) -> "MembraneState":
        """Deep copy of the live state."""
        return MembraneState.from_arrays(
            self.n_total, self.dt_max, self.diffusion, self.now,
            self.positions.copy(), self.clans.copy(), self.last_update.copy(),
            self.next_clan_id,
        )

    def materialize(self, index: int, rng: np.random.Generator) -> None:
        """Advance molecule `index` to the current time."""
        elapsed = self.now - self._last[index]
        if elapsed > 0.0:
            self._pos[index] = sphere.advance(
                self._pos[index], elapsed, self.dt_max, self.diffusion, rng
            )
            self._last[index] = self.now

    def materialize_all(self, rng: np.random.Generator) -> None:
        """Advance every molecule to the current time.

        Substeps run in round-robin order over the lagging molecules (all
        first substeps, then all second substeps, ...), which fixes the
        stream consumption order.
        """
        if self.n == 0:
            return
        elapsed = self.now - self._last[: self.n]
        if np.any(elapsed > 0.0):
            self._pos[: self.n] = sphere.advance_many(
                self._pos[: self.n], elapsed, self.dt_max, self.diffusion, rng
            )
            self._last[: self.n] = self.now


def empty_state(params: Params, dt_max: float | None = None) -> MembraneState:
    """Empty membrane at time zero."""
    if dt_max is None:
        dt_max = sphere.default_dt_max(params.diffusion, params.radius)
    return MembraneState(params.n_total, dt_max, params.diffusion)


def total_rate(n: int, params: Params) -> Rates:
    """Event rates at membrane count n.

    association  k_on * (N - n)
    dissociation k_off * N * n
    recruitment  k_fb * n * (N - n)
    """
    n_total = params.n_total
    a_on = params.k_on * (n_total - n)
    a_off = params.k_off * n_total * n
    a_fb = params.k_fb * n * (n_total - n)
    return Rates(a_on + a_off + a_fb, a_on, a_off, a_fb)


def _draw_kind(state: MembraneState, rates: Rates, rng: np.random.Generator):
    """Pick the event kind (and victim/parent index) given the rates."""
    u = rng.random() * rates.total
    if u < rates.association:
        return Association()
    n = state.n
    idx = min(int(rng.random() * n), n - 1)
    if u < rates.association + rates.dissociation:
        return Dissociation(idx)
    return Recruitment(idx)


def draw_event(state: MembraneState, params: Params, rng: np.random.Generator):
    """Exponential waiting time and event kind for the current state.

    Kind probabilities are proportional to the three rate components;
    victim/parent is uniform over the n membrane molecules.
    """
    rates = total_rate(state.n, params)
    if rates.total <= 0.0:
        raise Stuck("total event rate is zero; no event can fire")
    wait = rng.standard_exponential() / rates.total
    return wait, _draw_kind(state, rates, rng)


def apply_event(state: MembraneState, kind, params: Params,
                rng: np.random.Generator) -> MembraneState:
    """Apply one event in place at state.now and return the state.

    Association appends a uniformly placed molecule with a fresh clan id.
    Dissociation removes the victim by swap-with-last. Recruitment first
    materializes the parent's position to now, then appends an exact copy.
    """
    n = state.n
    if isinstance(kind, Association):
        state._pos[n] = sphere.sample_uniform(params.radius, rng)
        state._clan[n] = state.next_clan_id
        state._last[n] = state.now
        state.next_clan_id += 1
        state.n += 1
    elif isinstance(kind, Dissociation):
        if not 0 <= kind.victim < n:
            raise IndexError(f"victim index {kind.victim} out of range for n={n}")
        state._pos[kind.victim] = state._pos[n - 1]
        state._clan[kind.victim] = state._clan[n - 1]
        state._last[kind.victim] = state._last[n - 1]
        state.n -= 1
    elif isinstance(kind, Recruitment):
        if not 0 <= kind.parent < n:
            raise IndexError(f"parent index {kind.parent} out of range for n={n}")
        state.materialize(kind.parent, rng)
        state._pos[n] = state._pos[kind.parent]
        state._clan[n] = state._clan[kind.parent]
        state._last[n] = state.now
        state.n += 1
    else:
        raise TypeError(f"unknown event kind {kind!r}")
    return state


@dataclass
class EventCounts:
    association: int = 0
    dissociation: int = 0
    recruitment: int = 0

    @property
    def total(self) -> int:
        return self.association + self.dissociation + self.recruitment


@dataclass
class SimulationResult:
    snapshots: list = field(default_factory=list)
    counts: EventCounts = field(default_factory=EventCounts)
    final: MembraneState | None = None


@dataclass(frozen=True)
class HittingResult:
    """First time the membrane count reaches the target fraction."""

    rho: float
    events: int


def simulate(params: Params, t_end: float, snapshot_times, rng: np.random.Generator,
             dt_max: float | None = None, update: str = "lazy",
             initial: MembraneState | None = None) -> SimulationResult:
    """Run the event loop from an empty membrane (or `initial`) to t_end.

    Positions are materialized lazily: a molecule moves only when read, i.e.
    when chosen as a recruitment parent and at snapshots, where every
    molecule is advanced to the snapshot time (update="eager" instead
    advances all molecules at every event; it is the slow reference for the
    equivalence tests). Snapshots are deep copies taken at the given
    ascending times. A waiting time that would cross the next snapshot
    boundary is discarded and redrawn after it (exact by memorylessness).
    Deterministic given (params, rng state, dt_max, snapshot_times).
    """
    if t_end < 0.0:
        raise ValueError("t_end must be >= 0")
    snapshot_times = [float(t) for t in snapshot_times]
    if any(b < a for a, b in zip(snapshot_times, snapshot_times[1:])):
        raise ValueError("snapshot_times must be ascending")
    if snapshot_times and (snapshot_times[-1] > t_end or snapshot_times[0] < 0.0):
        raise ValueError("snapshot times must lie in [0, t_end]")
    if update not in ("lazy", "eager"):
        raise ValueError(f"unknown update mode {update!r}")
    if dt_max is None:
        dt_max = sphere.default_dt_max(params.diffusion, params.radius)

    if initial is None:
        state = empty_state(params, dt_max)
    else:
        state = initial.snapshot()
        state.dt_max = dt_max
        state.diffusion = params.diffusion

    result = SimulationResult()
    snap_idx = 0
    n_snaps = len(snapshot_times)

    while True:
        if snap_idx < n_snaps and state.now >= snapshot_times[snap_idx]:
            state.materialize_all(rng)
            result.snapshots.append(state.snapshot())
            snap_idx += 1
            continue
        if snap_idx >= n_snaps and state.now >= t_end:
            break
        boundary = snapshot_times[snap_idx] if snap_idx < n_snaps else t_end
        rates = total_rate(state.n, params)
        if rates.total <= 0.0:
            state.now = boundary
            continue
        wait = rng.standard_exponential() / rates.total
        if state.now + wait > boundary:
            state.now = boundary
            continue
        state.now += wait
        if update == "eager":
            state.materialize_all(rng)
        kind = _draw_kind(state, rates, rng)
        apply_event(state, kind, params, rng)
        if isinstance(kind, Association):
            result.counts.association += 1
        elif isinstance(kind, Dissociation):
            result.counts.dissociation += 1
        else:
            result.counts.recruitment += 1

    result.final = state
    return result


def simulate_counts(params: Params, eps: float, rng: np.random.Generator) -> HittingResult:
    """Counts-only jump chain from an empty membrane, stopped at the first
    time n >= ceil(eps*N). No geometry, no clans; exact waiting times.

    Requires the supercritical regime k_fb*(1-eps) > k_off and k_on > 0
    (an empty membrane is absorbing otherwise).
    """
    from . import kernels

    if not 0.0 < eps < 1.0:
        raise InvalidParameter(f"eps must lie in (0, 1), got {eps}")
    lam = params.k_fb * (1.0 - eps) - params.k_off
    if lam <= 0.0:
        raise Subcritical(
            f"k_fb*(1-eps) = {params.k_fb * (1.0 - eps)} does not exceed "
            f"k_off = {params.k_off}"
        )
    if params.k_on == 0.0:
        raise Stuck("k_on = 0: the empty membrane is absorbing")
    target = math.ceil(eps * params.n_total)
    rho, events = kernels.counts_hitting_raw(
        params.n_total, params.k_on, params.k_off, params.k_fb, target, rng
    )
    return HittingResult(rho=rho, events=events)
