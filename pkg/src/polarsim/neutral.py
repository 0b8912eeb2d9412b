"""Reference samplers independent of the simulator: GEM stick-breaking,
Poisson-Dirichlet largest-atom sampling, the two-level lookdown genealogy
behind the clan-spread formula, and the two-sample KS statistic."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import sphere
from .params import Params, derive

__all__ = [
    "GemSample",
    "gem_sample",
    "pd_truncation",
    "pd_largest",
    "pd_largest_sampled",
    "LookdownSample",
    "lookdown_pair",
    "lookdown_many",
    "ks_statistic",
    "ks_critical",
]


@dataclass(frozen=True)
class GemSample:
    """One stick-breaking draw: sticks P_1..P_k, leftover mass, and the
    underlying Beta(1, theta) fractions W_1..W_k."""

    sticks: np.ndarray
    residual: float
    betas: np.ndarray


def gem_sample(theta: float, k: int, rng: np.random.Generator) -> GemSample:
    """Stick-breaking sample truncated at k sticks.

    W_i ~ Beta(1, theta) i.i.d., P_1 = W_1, P_n = (1-W_1)...(1-W_{n-1}) W_n.
    theta = 0 degenerates to all mass on the first stick.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if theta < 0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    if theta == 0.0:
        betas = np.ones(k)
    else:
        betas = rng.beta(1.0, theta, size=k)
    prefix = np.cumprod(1.0 - betas)
    sticks = betas.copy()
    sticks[1:] *= prefix[:-1]
    return GemSample(sticks=sticks, residual=float(prefix[-1]), betas=betas)


def pd_truncation(theta: float, tol: float = 1e-12) -> int:
    """Smallest k with mean residual (theta/(1+theta))^k below tol."""
    if theta == 0.0:
        return 1
    ratio = theta / (1.0 + theta)
    return max(1, int(math.ceil(math.log(tol) / math.log(ratio))))


def pd_largest(theta: float, samples: int, rng: np.random.Generator,
               tol: float = 1e-12) -> np.ndarray:
    """Sorted sample of the largest atom of the size-ordered stick-breaking
    law, truncated deep enough that the residual cannot change the max."""
    k = pd_truncation(theta, tol)
    if theta == 0.0:
        return np.ones(samples)
    betas = rng.beta(1.0, theta, size=(samples, k))
    prefix = np.cumprod(1.0 - betas, axis=1)
    sticks = betas
    sticks[:, 1:] = betas[:, 1:] * prefix[:, :-1]
    return np.sort(sticks.max(axis=1))


def pd_largest_sampled(theta: float, samples: int, n_sample: int,
                       rng: np.random.Generator, tol: float = 1e-12) -> np.ndarray:
    """Sorted sample of the largest BLOCK FRACTION among n_sample individuals
    multinomially drawn from one stick-breaking weight vector each.

    This is the continuous largest-atom law observed at resolution 1/n_sample,
    matching what a finite membrane of n_sample molecules can express (for
    small theta the continuous largest atom lives within ~1e-6 of 1, which a
    few hundred molecules can only render as exactly 1). The truncation
    residual (< tol) is folded back by normalization.
    """
    if n_sample < 1:
        raise ValueError(f"n_sample must be >= 1, got {n_sample}")
    if theta == 0.0:
        return np.ones(samples)
    k = pd_truncation(theta, tol)
    betas = rng.beta(1.0, theta, size=(samples, k))
    prefix = np.cumprod(1.0 - betas, axis=1)
    sticks = betas
    sticks[:, 1:] = betas[:, 1:] * prefix[:, :-1]
    sticks /= sticks.sum(axis=1, keepdims=True)
    out = np.empty(samples)
    for i in range(samples):
        out[i] = rng.multinomial(n_sample, sticks[i]).max() / n_sample
    return np.sort(out)


@dataclass(frozen=True)
class LookdownSample:
    """One draw of the two-level genealogy.

    same_clan -- whether the last relevant event was a lookdown (vs an
    immigration at either level); tau is the time back to it; dist_sq is the
    squared chord distance accumulated over tau, present only for same-clan
    draws.
    """

    same_clan: bool
    tau: float
    dist_sq: float | None


def _lookdown_times(params: Params, rng: np.random.Generator, size=None):
    alpha = derive(params).alpha
    rate_look = 2.0 * params.k_fb * alpha
    rate_imm = params.k_on * alpha
    t12 = rng.standard_exponential(size) / rate_look
    if rate_imm > 0.0:
        t1 = rng.standard_exponential(size) / rate_imm
        t2 = rng.standard_exponential(size) / rate_imm
    elif size is None:
        t1 = t2 = math.inf
    else:
        t1 = np.full(size, np.inf)
        t2 = np.full(size, np.inf)
    return t12, t1, t2


def lookdown_pair(params: Params, rng: np.random.Generator,
                  variant: str = "analytic", dt_max: float | None = None) -> LookdownSample:
    """Sample the joint law of (same clan?, pair squared distance) for two
    molecules drawn at stationarity.

    The pair is in the same clan iff the lookdown clock (rate 2*k_fb*alpha)
    beats both immigration clocks (rate k_on*alpha each); in that case the
    two positions coincide a time tau ago and have diffused independently
    since. variant="analytic" uses the closed-form mean-square law
    2R^2(1 - exp(-2*D*tau/R^2)); variant="mc" advances two coincident points
    with the sphere integrator.
    """
    if variant not in ("analytic", "mc"):
        raise ValueError(f"unknown variant {variant!r}")
    t12, t1, t2 = _lookdown_times(params, rng)
    tau = min(t12, t1, t2)
    same = t12 <= t1 and t12 <= t2
    if not same:
        return LookdownSample(same_clan=False, tau=float(tau), dist_sq=None)
    r2 = params.radius**2
    if variant == "analytic":
        dist = 2.0 * r2 * (1.0 - math.exp(-2.0 * params.diffusion * tau / r2))
    else:
        if dt_max is None:
            dt_max = sphere.default_dt_max(params.diffusion, params.radius)
        start = np.array([0.0, 0.0, params.radius])
        a = sphere.advance(start, tau, dt_max, params.diffusion, rng)
        b = sphere.advance(start, tau, dt_max, params.diffusion, rng)
        dist = sphere.chord_sq(a, b)
    return LookdownSample(same_clan=True, tau=float(tau), dist_sq=float(dist))


def lookdown_many(params: Params, draws: int, rng: np.random.Generator,
                  variant: str = "analytic", dt_max: float | None = None):
    """Vectorized lookdown draws: (same_clan mask, taus, same-clan dist_sq).

    Same law as lookdown_pair; the mc variant advances all same-clan pairs
    in lock-step substep rounds.
    """
    if variant not in ("analytic", "mc"):
        raise ValueError(f"unknown variant {variant!r}")
    t12, t1, t2 = _lookdown_times(params, rng, size=draws)
    tau = np.minimum(np.minimum(t12, t1), t2)
    same = (t12 <= t1) & (t12 <= t2)
    taus_same = tau[same]
    r2 = params.radius**2
    if variant == "analytic":
        dist = 2.0 * r2 * (1.0 - np.exp(-2.0 * params.diffusion * taus_same / r2))
    else:
        if dt_max is None:
            dt_max = sphere.default_dt_max(params.diffusion, params.radius)
        start = np.tile([0.0, 0.0, params.radius], (taus_same.shape[0], 1))
        a = sphere.advance_many(start, taus_same, dt_max, params.diffusion, rng)
        b = sphere.advance_many(start, taus_same, dt_max, params.diffusion, rng)
        d = a - b
        dist = np.sum(d * d, axis=1)
    return same, tau, dist


def ks_statistic(sample_a, sample_b) -> float:
    """Two-sample Kolmogorov-Smirnov sup-distance between empirical CDFs."""
    a = np.sort(np.asarray(sample_a, dtype=float))
    b = np.sort(np.asarray(sample_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be nonempty")
    data = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, data, side="right") / a.size
    cdf_b = np.searchsorted(b, data, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def ks_critical(n: int, m: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample KS critical value at significance alpha."""
    c = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    return c * math.sqrt((n + m) / (n * m))
