"""File outputs: trajectory/snapshot CSVs and JSON reports.

Every file carries the config hash (a `# config_hash=` comment line in CSVs,
a top-level key in JSON). Floats are written with shortest round-trip repr,
i.e. full double precision. Writers go through OutputSet so partially
written files are removed if a run fails.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

__all__ = ["OutputSet", "format_float", "trajectory_rows", "snapshot_rows"]

TRAJECTORY_HEADER = ("time,n,h,num_clans,largest_clan_frac,second_clan_frac,"
                     "spread_num,spread_den,polarized,pole_x,pole_y,pole_z")
SNAPSHOT_HEADER = "time,clan,x,y,z"


def format_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def trajectory_rows(stats) -> list[str]:
    """CSV rows for a sequence of SnapshotStats."""
    rows = []
    for s in stats:
        pole = s.pole if s.pole is not None else (math.nan, math.nan, math.nan)
        rows.append(",".join([
            format_float(s.time), str(s.n), format_float(s.h), str(s.num_clans),
            format_float(s.largest), format_float(s.second),
            format_float(s.spread_num), format_float(s.spread_den),
            str(int(s.polarized)),
            format_float(pole[0]), format_float(pole[1]), format_float(pole[2]),
        ]))
    return rows


def snapshot_rows(states) -> list[str]:
    """One CSV row per molecule per snapshot state."""
    rows = []
    for state in states:
        t = format_float(state.now)
        clans = np.asarray(state.clans)
        pos = np.asarray(state.positions)
        for i in range(state.n):
            rows.append(",".join([
                t, str(int(clans[i])),
                format_float(pos[i, 0]), format_float(pos[i, 1]),
                format_float(pos[i, 2]),
            ]))
    return rows


class OutputSet:
    """Tracks files written into an output directory; deletes them on failure.

    Use as a context manager: files persist only if the block completes.
    """

    def __init__(self, out_dir):
        self.out_dir = str(out_dir)
        self.paths: list[str] = []

    def __enter__(self):
        os.makedirs(self.out_dir, exist_ok=True)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            for path in self.paths:
                try:
                    os.unlink(path)
                except OSError:
                    pass
        return False

    def _target(self, name: str) -> str:
        path = os.path.join(self.out_dir, name)
        self.paths.append(path)
        return path

    def write_csv(self, name: str, header: str, rows, cfg_hash: str) -> str:
        path = self._target(name)
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(f"# config_hash={cfg_hash}\n")
                fh.write(header + "\n")
                for row in rows:
                    fh.write(row + "\n")
        except OSError as exc:
            raise OSError(f"failed writing {path}: {exc}") from exc
        return path

    def write_json(self, name: str, payload: dict, cfg_hash: str) -> str:
        path = self._target(name)
        body = {"config_hash": cfg_hash}
        body.update(payload)
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(body, fh, indent=2, default=_jsonify)
                fh.write("\n")
        except OSError as exc:
            raise OSError(f"failed writing {path}: {exc}") from exc
        return path


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def check_existing_hash(out_dir, cfg_hash: str) -> None:
    """Refuse to mix outputs from different configurations in one directory."""
    path = os.path.join(str(out_dir), "summary.json")
    if not os.path.exists(path):
        return
    try:
        with open(path, "r", encoding="utf-8") as fh:
            old = json.load(fh).get("config_hash")
    except (OSError, ValueError):
        return
    if old is not None and old != cfg_hash:
        raise OSError(
            f"{path} was written with config_hash={old[:12]}..., which does not "
            f"match this run ({cfg_hash[:12]}...); use a fresh output directory"
        )
