"""Model parameters and every closed-form quantity derived from them."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import AssumptionViolated, InvalidGeometry, InvalidParameter, Subcritical

__all__ = ["Params", "Derived", "validate_params", "derive", "hitting_time_bound"]


@dataclass(frozen=True)
class Params:
    """The six biological parameters of the model.

    n_total   -- molecule count N (cytosol + membrane)
    diffusion -- membrane diffusion coefficient D, area/time
    radius    -- cell radius R
    k_on      -- spontaneous membrane association rate, per cytosol molecule
    k_off     -- spontaneous dissociation rate (scaled by N in the dynamics)
    k_fb      -- recruitment (feedback) rate (scaled by N in the dynamics)

    Instances are validated on construction: k_fb > k_off > 0, N >= 1,
    R > 0, D >= 0, k_on >= 0, all finite.
    """

    n_total: int
    diffusion: float
    radius: float
    k_on: float
    k_off: float
    k_fb: float

    def __post_init__(self):
        for name in ("diffusion", "radius", "k_on", "k_off", "k_fb"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise InvalidParameter(f"{name} must be a finite number, got {value!r}")
        if not isinstance(self.n_total, int) or isinstance(self.n_total, bool):
            raise InvalidParameter(f"n_total must be an integer, got {self.n_total!r}")
        if self.n_total < 1:
            raise InvalidParameter(f"n_total must be >= 1, got {self.n_total}")
        if self.radius <= 0:
            raise InvalidGeometry(f"radius must be > 0, got {self.radius} (degenerate sphere)")
        if self.diffusion < 0:
            raise InvalidParameter(f"diffusion must be >= 0, got {self.diffusion}")
        if self.k_on < 0:
            raise InvalidParameter(f"k_on must be >= 0, got {self.k_on}")
        if self.k_off <= 0:
            raise InvalidParameter(f"k_off must be > 0, got {self.k_off}")
        if self.k_fb <= self.k_off:
            raise AssumptionViolated(
                f"k_fb must exceed k_off (got k_fb={self.k_fb}, k_off={self.k_off}); "
                "otherwise the membrane is nearly empty at equilibrium"
            )


def validate_params(n_total, diffusion, radius, k_on, k_off, k_fb) -> Params:
    """Validate six raw numbers and return a Params.

    Raises AssumptionViolated / InvalidGeometry / InvalidParameter naming the
    violated constraint.
    """
    try:
        n_int = int(n_total)
    except (TypeError, ValueError) as exc:
        raise InvalidParameter(f"n_total must be an integer, got {n_total!r}") from exc
    if n_int != n_total:
        raise InvalidParameter(f"n_total must be integral, got {n_total!r}")
    return Params(
        n_total=n_int,
        diffusion=float(diffusion),
        radius=float(radius),
        k_on=float(k_on),
        k_off=float(k_off),
        k_fb=float(k_fb),
    )


@dataclass(frozen=True)
class Derived:
    """Closed-form stationary quantities.

    h_eq       -- equilibrium membrane fraction, 1 - k_off/k_fb
    theta      -- immigration-to-feedback ratio k_on/k_fb
    alpha      -- cytosol-to-membrane mass ratio (1-h_eq)/h_eq
    gamma      -- effective feedback strength k_fb*alpha, 1/time
    chi        -- relative diffusion D/R^2, 1/time
    spread     -- expected same-clan squared chord distance S_p, length^2
    spread_rel -- S_p / R^2, dimensionless
    relax_rate -- exponential relaxation rate to stationarity, 1/time
    """

    h_eq: float
    theta: float
    alpha: float
    gamma: float
    chi: float
    spread: float
    spread_rel: float
    relax_rate: float

    def to_json_dict(self) -> dict:
        """Flat dict with the documented output key names."""
        return {
            "h_eq": self.h_eq,
            "theta": self.theta,
            "alpha": self.alpha,
            "gamma": self.gamma,
            "chi": self.chi,
            "S_p": self.spread,
            "S_p_rel": self.spread_rel,
            "relax_rate": self.relax_rate,
        }


def derive(params: Params) -> Derived:
    """Evaluate every closed-form prediction for the given parameters.

    relax_rate is 0 when k_on = 0; downstream auto burn-in refuses to run in
    that case.
    """
    h_eq = 1.0 - params.k_off / params.k_fb
    theta = params.k_on / params.k_fb
    alpha = params.k_off / (params.k_fb - params.k_off)
    gamma = params.k_fb * params.k_off / (params.k_fb - params.k_off)
    chi = params.diffusion / params.radius**2
    spread = 2.0 * params.diffusion / ((params.k_on + params.k_fb) * alpha + chi)
    spread_rel = spread / params.radius**2
    relax_rate = params.k_on * (1.0 - h_eq) / (2.0 * h_eq)
    return Derived(
        h_eq=h_eq,
        theta=theta,
        alpha=alpha,
        gamma=gamma,
        chi=chi,
        spread=spread,
        spread_rel=spread_rel,
        relax_rate=relax_rate,
    )


def hitting_time_bound(params: Params, eps: float) -> float:
    """Time bound 2*ln(N)/(lambda*N) for first reaching a membrane fraction eps.

    lambda = k_fb*(1-eps) - k_off must be positive (supercritical growth);
    the empirical probability of hitting within this bound tends to 1 as N
    grows.
    """
    if not 0.0 < eps < 1.0:
        raise InvalidParameter(f"eps must lie in (0, 1), got {eps}")
    lam = params.k_fb * (1.0 - eps) - params.k_off
    if lam <= 0.0:
        raise Subcritical(
            f"k_fb*(1-eps) = {params.k_fb * (1.0 - eps)} does not exceed k_off = "
            f"{params.k_off}; the bound does not apply"
        )
    return 2.0 * math.log(params.n_total) / (lam * params.n_total)
