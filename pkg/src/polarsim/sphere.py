"""Geometry on the radius-R sphere: uniform sampling, Brownian steps, chord
distances, and hemisphere coverage searches."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyPointSet

__all__ = [
    "sample_uniform",
    "brownian_step",
    "step_many",
    "advance",
    "advance_many",
    "chord_sq",
    "HemisphereResult",
    "max_hemisphere",
    "default_dt_max",
    "substep_count",
]

# Points whose dot product with the pole is >= -BOUNDARY_TOL * R are counted
# as inside the closed hemisphere; this absorbs fp noise for points lying
# exactly on the boundary great circle (e.g. cross-product poles).
BOUNDARY_TOL = 1e-12

EXACT_CUTOFF = 200


def default_dt_max(diffusion: float, radius: float) -> float:
    """Default integrator step: 1e-3 * R^2/D, or 1e-3 when D = 0."""
    if diffusion > 0.0:
        return 1e-3 * radius * radius / diffusion
    return 1e-3


def substep_count(elapsed: float, dt_max: float) -> int:
    """Number of equal substeps covering `elapsed` with steps <= dt_max.

    The 1e-9 slack keeps exact multiples (elapsed = k*dt_max) at k substeps
    despite fp rounding in the quotient.
    """
    if elapsed <= 0.0:
        return 0
    return max(1, int(math.ceil(elapsed / dt_max - 1e-9)))


def sample_uniform(radius: float, rng: np.random.Generator, size: int | None = None):
    """Uniform point(s) on the sphere of the given radius.

    Normalized 3d standard Gaussian draws; exact and branch-free. Returns a
    (3,) array, or (size, 3) when size is given.
    """
    if size is None:
        g = rng.standard_normal(3)
        norm = math.sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2])
        while norm < 1e-12:
            g = rng.standard_normal(3)
            norm = math.sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2])
        return g * (radius / norm)
    g = rng.standard_normal((size, 3))
    norms = np.linalg.norm(g, axis=1)
    bad = norms < 1e-12
    while bad.any():
        g[bad] = rng.standard_normal((int(bad.sum()), 3))
        norms[bad] = np.linalg.norm(g[bad], axis=1)
        bad = norms < 1e-12
    return g * (radius / norms)[:, None]


def step_many(points: np.ndarray, dt, diffusion: float, rng: np.random.Generator) -> np.ndarray:
    """One Euler-Maruyama step of speed-D spherical Brownian motion for each row.

    dB = sqrt(D) (I - B B^T / R^2) dW - (D/R^2) B dt, followed by radial
    renormalization back onto the sphere. `dt` may be a scalar or per-row
    vector. Rows with dt = 0 (or D = 0) are unchanged. Operates out of place.
    """
    pts = np.asarray(points, dtype=float)
    r2 = np.sum(pts * pts, axis=1)
    dt = np.broadcast_to(np.asarray(dt, dtype=float), (pts.shape[0],))
    if diffusion == 0.0:
        return pts.copy()
    g = rng.standard_normal(pts.shape)
    dot = np.sum(pts * g, axis=1) / r2
    drift = (diffusion / r2) * dt
    amp = np.sqrt(diffusion * dt)
    new = pts + amp[:, None] * (g - dot[:, None] * pts) - drift[:, None] * pts
    scale = np.sqrt(r2) / np.linalg.norm(new, axis=1)
    new *= scale[:, None]
    still = dt == 0.0
    if still.any():
        new[still] = pts[still]
    return new


def brownian_step(point: np.ndarray, dt: float, diffusion: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Single-point Euler-Maruyama step; dt = 0 returns the point exactly.

    No randomness is consumed when dt = 0 or D = 0.
    """
    p = np.asarray(point, dtype=float)
    if dt == 0.0 or diffusion == 0.0:
        return p.copy()
    return step_many(p[None, :], dt, diffusion, rng)[0]


def advance(point: np.ndarray, elapsed: float, dt_max: float, diffusion: float,
            rng: np.random.Generator) -> np.ndarray:
    """Advance a point by `elapsed` time using equal substeps of at most dt_max.

    Exactly ceil(elapsed/dt_max) substeps are taken (none when elapsed = 0),
    each consuming one 3-vector of normals from the stream when D > 0.
    """
    p = np.asarray(point, dtype=float).copy()
    if diffusion == 0.0 or elapsed <= 0.0:
        return p
    k = substep_count(elapsed, dt_max)
    dt = elapsed / k
    for _ in range(k):
        p = step_many(p[None, :], dt, diffusion, rng)[0]
    return p


def advance_many(points: np.ndarray, elapsed, dt_max: float, diffusion: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Advance each row by its own elapsed time (vector or scalar).

    Each row i takes ceil(elapsed_i/dt_max) equal substeps; substeps are
    executed round-robin (all rows' first substeps, then second, ...), which
    fixes the stream consumption order.
    """
    pts = np.asarray(points, dtype=float).copy()
    if pts.shape[0] == 0 or diffusion == 0.0:
        return pts
    elapsed = np.broadcast_to(np.asarray(elapsed, dtype=float), (pts.shape[0],))
    ks = np.where(
        elapsed > 0.0,
        np.maximum(1, np.ceil(elapsed / dt_max - 1e-9).astype(np.int64)),
        0,
    )
    if ks.max(initial=0) == 0:
        return pts
    dts = np.where(ks > 0, elapsed / np.maximum(ks, 1), 0.0)
    for r in range(int(ks.max())):
        active = ks > r
        pts[active] = step_many(pts[active], dts[active], diffusion, rng)
    return pts


def chord_sq(p: np.ndarray, q: np.ndarray) -> float:
    """Squared Euclidean (chord) distance between two points; range [0, 4R^2]."""
    d = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    return float(d @ d)


@dataclass(frozen=True)
class HemisphereResult:
    """Best covering closed hemisphere found for a point set."""

    pole: np.ndarray
    covered_fraction: float
    mode_used: str


def _coverage(unit_points: np.ndarray, poles: np.ndarray) -> np.ndarray:
    """Count of points with <p, pole> >= -tol for each pole row."""
    dots = poles @ unit_points.T
    return np.count_nonzero(dots >= -BOUNDARY_TOL, axis=1)


def _orthogonal_unit(u: np.ndarray) -> np.ndarray:
    """Any unit vector orthogonal to the unit vector u."""
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(u)))] = 1.0
    v = np.cross(u, axis)
    return v / np.linalg.norm(v)


def max_hemisphere(points, mode: str = "auto",
                   exact_cutoff: int = EXACT_CUTOFF) -> HemisphereResult:
    """Closed hemisphere maximizing the fraction of covered points.

    exact mode enumerates candidate poles (every input direction, every
    antipode, all normalized pairwise cross products with both signs, an
    orthogonal direction for degenerate pairs, plus the heuristic resultant
    pole) and is an exact maximizer in O(n^3). heuristic mode uses only the
    normalized resultant sum of the points. auto picks exact for at most
    `exact_cutoff` points.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise EmptyPointSet("hemisphere search needs at least one point")
    if mode not in ("exact", "heuristic", "auto"):
        raise ValueError(f"unknown hemisphere mode {mode!r}")
    n = pts.shape[0]
    used = mode
    if mode == "auto":
        used = "exact" if n <= exact_cutoff else "heuristic"

    norms = np.linalg.norm(pts, axis=1)
    unit = pts / norms[:, None]

    resultant = pts.sum(axis=0)
    rnorm = np.linalg.norm(resultant)
    if rnorm > 1e-12:
        heuristic_pole = resultant / rnorm
    else:
        heuristic_pole = unit[0]

    if used == "heuristic":
        frac = _coverage(unit, heuristic_pole[None, :])[0] / n
        return HemisphereResult(pole=heuristic_pole, covered_fraction=float(frac),
                                mode_used="heuristic")

    candidates = [unit, -unit, heuristic_pole[None, :]]
    if n >= 2:
        ii, jj = np.triu_indices(n, k=1)
        crosses = np.cross(unit[ii], unit[jj])
        cnorms = np.linalg.norm(crosses, axis=1)
        good = cnorms > 1e-12
        if good.any():
            normed = crosses[good] / cnorms[good][:, None]
            candidates.append(normed)
            candidates.append(-normed)
        if (~good).any():
            # (anti)parallel pairs: both lie on any great circle through them
            for i in np.unique(ii[~good]):
                v = _orthogonal_unit(unit[i])
                candidates.append(v[None, :])
                candidates.append(-v[None, :])
    poles = np.concatenate(candidates, axis=0)

    best_count = -1
    best_pole = heuristic_pole
    chunk = 8192
    for start in range(0, poles.shape[0], chunk):
        block = poles[start:start + chunk]
        counts = _coverage(unit, block)
        k = int(np.argmax(counts))
        if counts[k] > best_count:
            best_count = int(counts[k])
            best_pole = block[k]
    return HemisphereResult(pole=best_pole.copy(), covered_fraction=best_count / n,
                            mode_used="exact")
