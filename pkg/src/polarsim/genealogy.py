"""Clan-level statistics of membrane snapshots: size spectra, spatial spread,
polarity detection, occupancy estimates, and distinct-clan counts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import sphere
from .errors import EmptyMembrane, InsufficientData

__all__ = [
    "clan_counts",
    "clan_spectrum",
    "SpreadAccumulator",
    "accumulate_spread",
    "PolarityResult",
    "polarity_check",
    "SnapshotStats",
    "snapshot_stats",
    "OccupancyStats",
    "occupancy",
    "merge_occupancy",
    "distinct_clans",
    "wilson_interval",
    "default_decorrelation_gap",
]

POLARITY_MAX_POINTS = 200

DECORRELATION_FACTOR = 5.0


def default_decorrelation_gap(relax_rate: float) -> float:
    """Five relaxation times; infinite when the chain does not relax
    (k_on = 0), which collapses the effective sample count to 1."""
    if relax_rate > 0.0:
        return DECORRELATION_FACTOR / relax_rate
    return math.inf


def clan_counts(state) -> tuple[np.ndarray, np.ndarray]:
    """(clan ids, member counts) for the live molecules."""
    return np.unique(np.asarray(state.clans), return_counts=True)


def clan_spectrum(state) -> np.ndarray:
    """Normalized clan sizes, sorted descending. Empty membrane gives []."""
    if state.n == 0:
        return np.empty(0)
    _, counts = clan_counts(state)
    sizes = np.sort(counts)[::-1] / state.n
    return sizes


@dataclass
class SpreadAccumulator:
    """Running sums for the clan-spread ratio estimator.

    num -- sum of squared chord distances over same-clan unordered pairs
    den -- count of same-clan unordered pairs
    The estimate is the ratio of sums across all accumulated snapshots (the
    per-snapshot ratio would be biased).
    """

    num: float = 0.0
    den: float = 0.0

    @property
    def ratio(self) -> float:
        return self.num / self.den if self.den > 0 else math.nan

    def merge(self, other: "SpreadAccumulator") -> "SpreadAccumulator":
        return SpreadAccumulator(self.num + other.num, self.den + other.den)


def _pair_count(c: np.ndarray) -> np.ndarray:
    return c * (c - 1) // 2


def accumulate_spread(state, acc: SpreadAccumulator, max_pairs: int = 10_000,
                      rng: np.random.Generator | None = None) -> SpreadAccumulator:
    """Add this snapshot's same-clan pair distances to the accumulator.

    When the snapshot has at most max_pairs same-clan pairs, every pair
    enters exactly (per clan, sum_{i<j} |x_i - x_j|^2 = c * sum|x_k|^2 -
    |sum x_k|^2, so no enumeration is needed). Larger snapshots contribute a
    with-replacement subsample of max_pairs pairs, uniform over same-clan
    pairs, with num scaled by total/sampled so num/den stays unbiased.
    Positions must be materialized to state.now.
    """
    if state.n == 0:
        return acc
    ids, counts = clan_counts(state)
    multi = counts >= 2
    if not multi.any():
        return acc
    pair_counts = _pair_count(counts[multi].astype(np.int64))
    total_pairs = int(pair_counts.sum())
    positions = np.asarray(state.positions)
    clans = np.asarray(state.clans)

    if total_pairs <= max_pairs:
        num = 0.0
        for cid, c in zip(ids[multi], counts[multi]):
            pts = positions[clans == cid]
            sq = float(np.sum(pts * pts))
            s = pts.sum(axis=0)
            num += c * sq - float(s @ s)
        acc.num += num
        acc.den += total_pairs
        return acc

    if rng is None:
        raise ValueError("rng required when subsampling same-clan pairs")
    big_ids = ids[multi]
    weights = pair_counts / total_pairs
    pick = rng.choice(len(big_ids), size=max_pairs, p=weights)
    sampled = 0.0
    for k, cid in enumerate(big_ids):
        m = int(np.count_nonzero(pick == k))
        if m == 0:
            continue
        pts = positions[clans == cid]
        c = pts.shape[0]
        i = rng.integers(0, c, size=m)
        j = rng.integers(0, c - 1, size=m)
        j = j + (j >= i)
        d = pts[i] - pts[j]
        sampled += float(np.sum(d * d))
    acc.num += sampled * (total_pairs / max_pairs)
    acc.den += total_pairs
    return acc


@dataclass
class PolarityResult:
    """Outcome of the polarity test on one snapshot."""

    is_polarized: bool
    clan: int | None = None
    pole: np.ndarray | None = None
    clan_fraction: float = 0.0
    hemisphere_fraction: float = 0.0
    mode_used: str | None = None
    subsampled: bool = False


def polarity_check(state, eps: float, mode: str = "auto",
                   rng: np.random.Generator | None = None,
                   max_points: int = POLARITY_MAX_POINTS) -> PolarityResult:
    """Polarity test: the largest clan must hold at least sqrt(1-eps) of the
    membrane population AND have a closed hemisphere covering at least
    sqrt(1-eps) of its members.

    Both factors at sqrt(1-eps) make the covered-single-clan share of the
    whole population at least (1-eps) and nest the polarized snapshots inside
    the large-clan events {V1 >= sqrt(1-eps)}. Clans larger than max_points
    are subsampled (uniformly, without replacement) before the hemisphere
    search; `subsampled` records that.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if state.n == 0:
        return PolarityResult(is_polarized=False)
    threshold = math.sqrt(1.0 - eps)
    ids, counts = clan_counts(state)
    k = int(np.argmax(counts))
    clan_id = int(ids[k])
    clan_fraction = counts[k] / state.n
    if clan_fraction < threshold:
        return PolarityResult(False, clan=clan_id, clan_fraction=float(clan_fraction))
    pts = np.asarray(state.positions)[np.asarray(state.clans) == clan_id]
    subsampled = False
    if pts.shape[0] > max_points:
        if rng is None:
            raise ValueError("rng required to subsample the clan's points")
        keep = rng.choice(pts.shape[0], size=max_points, replace=False)
        pts = pts[keep]
        subsampled = True
    hemi = sphere.max_hemisphere(pts, mode=mode)
    return PolarityResult(
        is_polarized=hemi.covered_fraction >= threshold,
        clan=clan_id,
        pole=hemi.pole,
        clan_fraction=float(clan_fraction),
        hemisphere_fraction=float(hemi.covered_fraction),
        mode_used=hemi.mode_used,
        subsampled=subsampled,
    )


@dataclass
class SnapshotStats:
    """Per-snapshot summary row (the trajectory CSV schema)."""

    time: float
    n: int
    h: float
    num_clans: int
    largest: float
    second: float
    spread_num: float
    spread_den: float
    polarized: bool
    pole: np.ndarray | None


def snapshot_stats(state, eps: float | None = None, mode: str = "auto",
                   max_pairs: int = 10_000,
                   rng: np.random.Generator | None = None) -> SnapshotStats:
    """Compute the full summary row for one snapshot.

    The polarity columns are filled only when eps is given.
    """
    spectrum = clan_spectrum(state)
    acc = accumulate_spread(state, SpreadAccumulator(), max_pairs=max_pairs, rng=rng)
    polarized = False
    pole = None
    if eps is not None and state.n > 0:
        pol = polarity_check(state, eps, mode=mode, rng=rng)
        polarized = pol.is_polarized
        pole = pol.pole
    return SnapshotStats(
        time=float(state.now),
        n=int(state.n),
        h=state.n / state.n_total,
        num_clans=int(spectrum.shape[0]),
        largest=float(spectrum[0]) if spectrum.shape[0] > 0 else 0.0,
        second=float(spectrum[1]) if spectrum.shape[0] > 1 else 0.0,
        spread_num=acc.num,
        spread_den=acc.den,
        polarized=polarized,
        pole=pole,
    )


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054):
    """Wilson score 95% interval for a binomial proportion."""
    if trials <= 0:
        return (0.0, 1.0)
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass
class OccupancyStats:
    """Occupancy estimates over one or more trajectories."""

    p_hat: float
    q_hat: float
    p_ci: tuple
    q_ci: tuple
    eff_n: int
    largest_series: list = field(default_factory=list)
    distinct_counts: list = field(default_factory=list)


def occupancy(snapshots, eps: float, decorrelation_gap: float) -> OccupancyStats:
    """p_hat (fraction of snapshots polarized) and q_hat (fraction with
    V1 > sqrt(1-eps)) over one trajectory of SnapshotStats.

    Snapshots at least decorrelation_gap apart count as independent: the
    effective sample count backing the binomial CIs is capped at
    span/gap + 1.
    """
    snapshots = list(snapshots)
    if len(snapshots) < 2:
        raise InsufficientData(f"need at least 2 snapshots, got {len(snapshots)}")
    times = np.array([s.time for s in snapshots])
    largest = np.array([s.largest for s in snapshots])
    polarized = np.array([s.polarized for s in snapshots], dtype=bool)
    threshold = math.sqrt(1.0 - eps)
    q_events = largest > threshold

    count = len(snapshots)
    span = float(times[-1] - times[0])
    if decorrelation_gap > 0.0:
        eff_n = min(count, int(span / decorrelation_gap) + 1)
    else:
        eff_n = count
    eff_n = max(eff_n, 1)

    p_hat = float(np.mean(polarized))
    q_hat = float(np.mean(q_events))
    p_succ = int(round(p_hat * eff_n))
    q_succ = int(round(q_hat * eff_n))
    return OccupancyStats(
        p_hat=p_hat,
        q_hat=q_hat,
        p_ci=wilson_interval(p_succ, eff_n),
        q_ci=wilson_interval(q_succ, eff_n),
        eff_n=eff_n,
        largest_series=[(float(t), float(v)) for t, v in zip(times, largest)],
    )


def merge_occupancy(parts: list[OccupancyStats], eps: float) -> OccupancyStats:
    """Pool occupancy estimates from independent trajectories."""
    if not parts:
        raise InsufficientData("no occupancy parts to merge")
    eff_n = sum(p.eff_n for p in parts)
    p_succ = sum(p.p_hat * p.eff_n for p in parts)
    q_succ = sum(p.q_hat * p.eff_n for p in parts)
    p_hat = p_succ / eff_n
    q_hat = q_succ / eff_n
    series = [pt for p in parts for pt in p.largest_series]
    distinct = [d for p in parts for d in p.distinct_counts]
    return OccupancyStats(
        p_hat=p_hat,
        q_hat=q_hat,
        p_ci=wilson_interval(int(round(p_succ)), eff_n),
        q_ci=wilson_interval(int(round(q_succ)), eff_n),
        eff_n=eff_n,
        largest_series=series,
        distinct_counts=distinct,
    )


def distinct_clans(state, sample_size: int, rng: np.random.Generator) -> int:
    """Distinct clan ids among sample_size molecules drawn uniformly WITH
    replacement from the membrane (sampling from the empirical measure)."""
    if sample_size < 1:
        raise ValueError(f"sample_size must be >= 1, got {sample_size}")
    if state.n == 0:
        raise EmptyMembrane("cannot sample molecules from an empty membrane")
    draws = rng.integers(0, state.n, size=sample_size)
    return int(np.unique(np.asarray(state.clans)[draws]).shape[0])
