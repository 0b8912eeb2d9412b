"""Flat key = value run configuration: parsing, validation, defaults, hash."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

from . import sphere
from .errors import AutoBurnInUnavailable, ConfigError, InvalidParameter
from .params import Params, Derived, derive, validate_params

__all__ = ["RunConfig", "parse_config", "load_config", "config_hash"]

_INT_KEYS = {"N", "replicas", "seed", "max_pairs"}
_FLOAT_KEYS = {"D", "R", "k_on", "k_off", "k_fb", "t_end", "snapshot_interval",
               "dt_max", "epsilon"}
_STR_KEYS = {"hemisphere_mode", "burn_in"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS
_PARAM_KEYS = ("N", "D", "R", "k_on", "k_off", "k_fb")
_MODES = ("exact", "heuristic", "auto")

AUTO_BURN_IN_FACTOR = 10.0


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run configuration.

    burn_in is already resolved when the file said `auto` (10 relaxation
    times); epsilon, t_end and snapshot_interval stay None when absent and
    are demanded per subcommand.
    """

    params: Params
    t_end: float | None = None
    burn_in: float = 0.0
    snapshot_interval: float | None = None
    dt_max: float | None = None
    epsilon: float | None = None
    replicas: int = 1
    master_seed: int = 0
    max_pairs: int = 10_000
    hemisphere_mode: str = "auto"

    @property
    def resolved_dt_max(self) -> float:
        if self.dt_max is not None:
            return self.dt_max
        return sphere.default_dt_max(self.params.diffusion, self.params.radius)

    def derived(self) -> Derived:
        return derive(self.params)

    def with_overrides(self, seed: int | None = None,
                       replicas: int | None = None) -> "RunConfig":
        out = self
        if seed is not None:
            out = replace(out, master_seed=_check_seed(seed))
        if replicas is not None:
            if replicas < 1:
                raise ConfigError(f"replicas must be >= 1, got {replicas}")
            out = replace(out, replicas=replicas)
        return out

    def to_dict(self) -> dict:
        """Resolved flat mapping with the file's key names."""
        p = self.params
        return {
            "N": p.n_total, "D": p.diffusion, "R": p.radius,
            "k_on": p.k_on, "k_off": p.k_off, "k_fb": p.k_fb,
            "t_end": self.t_end, "burn_in": self.burn_in,
            "snapshot_interval": self.snapshot_interval,
            "dt_max": self.resolved_dt_max, "epsilon": self.epsilon,
            "replicas": self.replicas, "seed": self.master_seed,
            "max_pairs": self.max_pairs, "hemisphere_mode": self.hemisphere_mode,
        }


def _check_seed(seed: int) -> int:
    if not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def parse_config(text: str) -> RunConfig:
    """Parse `key = value` lines (# starts a comment) into a RunConfig.

    Unknown keys, duplicates, unparsable values and constraint violations all
    raise with the offending 1-based line number. The six model parameters
    are required; everything else is optional with documented defaults
    (dt_max = 1e-3*R^2/D or 1e-3 when D = 0; max_pairs = 10000;
    hemisphere_mode = auto; replicas = 1; seed = 0; burn_in = 0).
    """
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected `key = value`, got {raw.strip()!r}", lineno)
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        if not val:
            raise ConfigError(f"missing value for {key!r}", lineno)
        values[key] = _parse_value(key, val, lineno)
        lines[key] = lineno

    missing = [k for k in _PARAM_KEYS if k not in values]
    if missing:
        raise ConfigError(f"missing required parameter keys: {', '.join(missing)}")
    try:
        params = validate_params(
            n_total=values["N"], diffusion=values["D"], radius=values["R"],
            k_on=values["k_on"], k_off=values["k_off"], k_fb=values["k_fb"],
        )
    except InvalidParameter as exc:
        key = _blame_key(exc)
        raise type(exc)(f"line {lines.get(key, '?')}: {exc}") from None

    burn_in = 0.0
    if "burn_in" in values:
        raw_burn = values["burn_in"]
        if raw_burn == "auto":
            relax = derive(params).relax_rate
            if relax <= 0.0:
                raise AutoBurnInUnavailable(
                    f"line {lines['burn_in']}: burn_in = auto needs k_on > 0 "
                    "(relaxation rate is zero)"
                )
            burn_in = AUTO_BURN_IN_FACTOR / relax
        else:
            burn_in = _require_float("burn_in", raw_burn, lines["burn_in"])
            if burn_in < 0.0:
                raise ConfigError("burn_in must be >= 0", lines["burn_in"])

    cfg = RunConfig(
        params=params,
        t_end=values.get("t_end"),
        burn_in=burn_in,
        snapshot_interval=values.get("snapshot_interval"),
        dt_max=values.get("dt_max"),
        epsilon=values.get("epsilon"),
        replicas=values.get("replicas", 1),
        master_seed=values.get("seed", 0),
        max_pairs=values.get("max_pairs", 10_000),
        hemisphere_mode=values.get("hemisphere_mode", "auto"),
    )
    _validate_ranges(cfg, lines)
    return cfg


def _parse_value(key: str, val: str, lineno: int):
    if key == "burn_in":
        return val if val == "auto" else _require_float(key, val, lineno)
    if key == "hemisphere_mode":
        if val not in _MODES:
            raise ConfigError(
                f"hemisphere_mode must be one of {', '.join(_MODES)}, got {val!r}",
                lineno,
            )
        return val
    if key in _INT_KEYS:
        try:
            return int(val)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {val!r}", lineno) from None
    return _require_float(key, val, lineno)


def _require_float(key: str, val, lineno: int) -> float:
    try:
        return float(val)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {val!r}", lineno) from None


def _blame_key(exc: InvalidParameter) -> str:
    text = str(exc)
    for key, needle in (("k_fb", "k_fb"), ("R", "radius"), ("D", "diffusion"),
                        ("k_on", "k_on"), ("k_off", "k_off"), ("N", "n_total")):
        if needle in text:
            return key
    return "N"


def _validate_ranges(cfg: RunConfig, lines: dict[str, int]) -> None:
    def loc(key):
        return lines.get(key)

    if cfg.t_end is not None and cfg.t_end < 0.0:
        raise ConfigError("t_end must be >= 0", loc("t_end"))
    if cfg.snapshot_interval is not None and cfg.snapshot_interval <= 0.0:
        raise ConfigError("snapshot_interval must be > 0", loc("snapshot_interval"))
    if cfg.dt_max is not None and cfg.dt_max <= 0.0:
        raise ConfigError("dt_max must be > 0", loc("dt_max"))
    if cfg.epsilon is not None and not 0.0 < cfg.epsilon < 1.0:
        raise ConfigError("epsilon must lie in (0, 1)", loc("epsilon"))
    if cfg.replicas < 1:
        raise ConfigError("replicas must be >= 1", loc("replicas"))
    if cfg.max_pairs < 1:
        raise ConfigError("max_pairs must be >= 1", loc("max_pairs"))
    _check_seed(cfg.master_seed)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_hash(cfg: RunConfig) -> str:
    """Hash of the resolved configuration, embedded in every output file."""
    payload = "".join(
        f"{k}={v!r}\n" for k, v in sorted(cfg.to_dict().items())
    )
    return hashlib.sha256(payload.encode()).hexdigest()
