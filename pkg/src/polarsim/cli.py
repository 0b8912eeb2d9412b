"""Command-line entry point.

    polarsim <subcommand> --config FILE [--out DIR] [--seed U64] [--replicas N]

Subcommands: predict, simulate, verify-spread, verify-clans, hitting-scan,
polarity-scan, lookdown, gem-sample. Exit status: 0 on success/pass, 1 on a
verification failure or runtime error, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import genealogy, neutral, output, runner, seeding, verify
from .config import RunConfig, config_hash, load_config
from .errors import ConfigError, PolarsimError

__all__ = ["main"]

_VERIFY_COMMANDS = {
    "verify-spread": verify.verify_spread,
    "verify-clans": verify.verify_clans,
    "hitting-scan": verify.hitting_scan,
    "polarity-scan": verify.polarity_scan,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarsim",
        description="Event-driven cell-polarity simulator and verification harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = [
        ("predict", "evaluate the closed-form predictions and emit them as JSON"),
        ("simulate", "run the event simulation; write trajectory/snapshot CSVs"),
        ("verify-spread", "check the stationary clan-spread estimate"),
        ("verify-clans", "check the largest-clan law and distinct-clan slope"),
        ("hitting-scan", "membrane fill-time probabilities over an N grid"),
        ("polarity-scan", "estimate polarity occupancy p_eps and q_eps"),
        ("lookdown", "oracle-only clan-spread estimate from the pair genealogy"),
        ("gem-sample", "emit stick-breaking clan-size samples as CSV"),
    ]
    for name, help_text in commands:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a key = value config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--replicas", type=int, default=None,
                       help="override the config replica count")
    return parser


def _summary_payload(cfg: RunConfig, wall: float, extra: dict | None = None) -> dict:
    payload = {
        "config": cfg.to_dict(),
        "derived": cfg.derived().to_json_dict(),
        "seeds": {
            "master_seed": cfg.master_seed,
            "replicas": cfg.replicas,
            "scheme": "SeedSequence(master_seed, spawn_key=(stream, replica))",
        },
        "wall_time_s": wall,
    }
    if extra:
        payload.update(extra)
    return payload


_SUMMARY_STAT_KEYS = ("S_p_hat", "S_p_ci_low", "S_p_ci_high", "p_eps_hat",
                      "q_eps_hat", "distinct_slope")


def _emit(args, cfg: RunConfig, report: dict, name: str, wall: float) -> None:
    print(json.dumps(report, indent=2, default=output._jsonify))
    if args.out:
        cfg_hash = config_hash(cfg)
        output.check_existing_hash(args.out, cfg_hash)
        extra = {k: report[k] for k in _SUMMARY_STAT_KEYS if k in report}
        extra["report"] = report
        with output.OutputSet(args.out) as out:
            out.write_json(f"{name}.json", report, cfg_hash)
            out.write_json("summary.json", _summary_payload(cfg, wall, extra),
                           cfg_hash)


def _cmd_predict(args, cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    derived = cfg.derived().to_json_dict()
    print(json.dumps(derived, indent=2))
    if args.out:
        cfg_hash = config_hash(cfg)
        output.check_existing_hash(args.out, cfg_hash)
        with output.OutputSet(args.out) as out:
            out.write_json("predict.json", derived, cfg_hash)
            out.write_json("summary.json",
                           _summary_payload(cfg, time.perf_counter() - t0), cfg_hash)
    return 0


def _cmd_simulate(args, cfg: RunConfig) -> int:
    if not args.out:
        raise ConfigError("simulate requires --out for its CSV outputs")
    if cfg.t_end is None:
        raise ConfigError("t_end is required for simulate")
    t0 = time.perf_counter()
    interval = cfg.snapshot_interval
    if interval is not None:
        times = runner.snapshot_schedule(cfg.burn_in, interval, cfg.t_end)
    else:
        times = np.array([cfg.t_end])
    spec = runner.EnsembleSpec(
        t_end=cfg.t_end,
        snapshot_times=tuple(times),
        dt_max=cfg.resolved_dt_max,
        epsilon=cfg.epsilon,
        max_pairs=cfg.max_pairs,
        hemisphere_mode=cfg.hemisphere_mode,
        keep_states=True,
    )
    results = runner.run_ensemble(cfg.params, spec, cfg.master_seed, cfg.replicas)
    derived = cfg.derived()
    cfg_hash = config_hash(cfg)
    output.check_existing_hash(args.out, cfg_hash)

    pooled = genealogy.SpreadAccumulator()
    for r in results:
        pooled = pooled.merge(r.spread)
    stats: dict = {"S_p_hat": pooled.ratio,
                   "events": [r.events for r in results]}
    if cfg.epsilon is not None and all(len(r.stats) >= 2 for r in results):
        gap = genealogy.default_decorrelation_gap(derived.relax_rate)
        occ = genealogy.merge_occupancy(
            [genealogy.occupancy(r.stats, cfg.epsilon, gap) for r in results],
            cfg.epsilon,
        )
        stats["p_eps_hat"] = occ.p_hat
        stats["q_eps_hat"] = occ.q_hat

    with output.OutputSet(args.out) as out:
        for r in results:
            suffix = f"_r{r.index:03d}" if cfg.replicas > 1 else ""
            out.write_csv(f"trajectory{suffix}.csv", output.TRAJECTORY_HEADER,
                          output.trajectory_rows(r.stats), cfg_hash)
            out.write_csv(f"snapshots{suffix}.csv", output.SNAPSHOT_HEADER,
                          output.snapshot_rows(r.states), cfg_hash)
        out.write_json("summary.json",
                       _summary_payload(cfg, time.perf_counter() - t0, stats),
                       cfg_hash)
    return 0


def _cmd_lookdown(args, cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    report = {
        "analytic": verify.lookdown_estimate(cfg, variant="analytic"),
        "mc": verify.lookdown_estimate(cfg, variant="mc"),
    }
    report["pass"] = report["analytic"]["pass"] and report["mc"]["pass"]
    _emit(args, cfg, report, "lookdown", time.perf_counter() - t0)
    return 0 if report["pass"] else 1


def _cmd_gem_sample(args, cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    theta = cfg.derived().theta
    k = neutral.pd_truncation(theta)
    rng = seeding.substream(cfg.master_seed, seeding.ORACLE, 3)
    rows = []
    for _ in range(cfg.replicas):
        sample = neutral.gem_sample(theta, k, rng)
        rows.append(",".join(
            [output.format_float(v) for v in sample.sticks]
            + [output.format_float(sample.residual)]
        ))
    header = ",".join([f"stick_{i + 1}" for i in range(k)] + ["residual"])
    cfg_hash = config_hash(cfg)
    if args.out:
        output.check_existing_hash(args.out, cfg_hash)
        with output.OutputSet(args.out) as out:
            out.write_csv("gem_sticks.csv", header, rows, cfg_hash)
            out.write_json("summary.json",
                           _summary_payload(cfg, time.perf_counter() - t0,
                                            {"gem": {"theta": theta, "sticks": k,
                                                     "samples": cfg.replicas}}),
                           cfg_hash)
    else:
        print(f"# config_hash={cfg_hash}")
        print(header)
        for row in rows:
            print(row)
    return 0


def _cmd_verify(name):
    func = _VERIFY_COMMANDS[name]

    def run(args, cfg: RunConfig) -> int:
        t0 = time.perf_counter()
        report = func(cfg)
        _emit(args, cfg, report, name.replace("-", "_"), time.perf_counter() - t0)
        return 0 if report["pass"] else 1

    return run


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = cfg.with_overrides(seed=args.seed, replicas=args.replicas)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PolarsimError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    handlers = {
        "predict": _cmd_predict,
        "simulate": _cmd_simulate,
        "lookdown": _cmd_lookdown,
        "gem-sample": _cmd_gem_sample,
        **{name: _cmd_verify(name) for name in _VERIFY_COMMANDS},
    }
    try:
        return handlers[args.command](args, cfg)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except PolarsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2 if "config_hash" in str(exc) else 1


if __name__ == "__main__":
    sys.exit(main())
