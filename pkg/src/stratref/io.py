"""Instance files (TOML), result JSON and CSV writers.

An instance file looks like::

    name = "prosecutor"
    prior = [0.7, 0.3]
    d_e = [[[1.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [1.0, 0.0]]]   # [u][v1][v2]
    d_1 = [[0.0, 0.0], [0.0, 0.0]]                               # [u][v1]
    d_2 = [[0.0, 1.0], [1.0, 0.0]]                               # [u][v2]

    [solver]        # optional SolverConfig overrides
    seed = 0

    [sim]           # optional SimConfig overrides
    n = 12

Optional integer keys u_size, v1_size and v2_size are checked against the
table shapes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import tomli_w

from .blocksim import SimConfig
from .game import GameInstance
from .solver import SolverConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class InstanceFileError(ValueError):
    """Malformed instance file; the message names the line or field."""


SWEEP_COLUMNS = ["r1", "r2", "dstar", "i_uw2", "i_uw1w2", "feasible", "restarts", "epsilon_report"]
SIM_COLUMNS = ["trial", "n", "m1", "m2", "encoder_error", "d_e_emp", "d_1_emp", "d_2_emp",
               "kl_avg_d1", "kl_avg_d2", "typical_fraction"]


@dataclass
class InstanceFile:
    game: GameInstance
    solver: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)

    def solver_config(self, **overrides) -> SolverConfig:
        return _apply(SolverConfig(), {**self.solver, **_drop_none(overrides)}, "solver")

    def sim_config(self, **overrides) -> SimConfig:
        return _apply(SimConfig(), {**self.sim, **_drop_none(overrides)}, "sim")


def _drop_none(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}


def _apply(cfg, values: dict, section: str):
    names = {f.name for f in fields(cfg)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise InstanceFileError(f"[{section}]: unknown field(s) {', '.join(unknown)}")
    return replace(cfg, **values)


def _table(doc: dict, key: str, ndim: int) -> np.ndarray:
    if key not in doc:
        raise InstanceFileError(f"field '{key}': missing")
    try:
        arr = np.array(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InstanceFileError(f"field '{key}': not a numeric array ({exc})") from None
    if arr.ndim != ndim:
        raise InstanceFileError(f"field '{key}': expected a {ndim}-level nested array, got shape {arr.shape}")
    return arr


def parse_instance(text: str) -> InstanceFile:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise InstanceFileError(f"TOML syntax error: {exc}") from None
    prior = _table(doc, "prior", 1)
    d_e = _table(doc, "d_e", 3)
    d_1 = _table(doc, "d_1", 2)
    d_2 = _table(doc, "d_2", 2)
    for key, size in (("u_size", d_e.shape[0]), ("v1_size", d_e.shape[1]), ("v2_size", d_e.shape[2])):
        if key in doc and doc[key] != size:
            raise InstanceFileError(f"field '{key}': declared {doc[key]} but tables imply {size}")
    try:
        game = GameInstance(prior, d_e, d_1, d_2, name=str(doc.get("name", "")))
    except ValueError as exc:
        raise InstanceFileError(f"invalid instance: {exc}") from None
    known = {"name", "prior", "d_e", "d_1", "d_2", "u_size", "v1_size", "v2_size", "solver", "sim"}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise InstanceFileError(f"unknown top-level field(s) {', '.join(unknown)}")
    inst = InstanceFile(game, dict(doc.get("solver", {})), dict(doc.get("sim", {})))
    inst.solver_config()
    inst.sim_config()
    return inst


def load_instance(path) -> InstanceFile:
    return parse_instance(Path(path).read_text())


def dump_instance(inst: InstanceFile | GameInstance) -> str:
    if isinstance(inst, GameInstance):
        inst = InstanceFile(inst)
    g = inst.game
    doc = {
        "name": g.name,
        "u_size": g.u_size,
        "v1_size": g.v1_size,
        "v2_size": g.v2_size,
        "prior": g.prior.tolist(),
        "d_e": g.d_e.tolist(),
        "d_1": g.d_1.tolist(),
        "d_2": g.d_2.tolist(),
    }
    if inst.solver:
        doc["solver"] = inst.solver
    if inst.sim:
        doc["sim"] = inst.sim
    return tomli_w.dumps(doc)


def fmt_float(x: float) -> str:
    """Round-trip text for a float: 17 significant digits, 'inf' for infinities."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt_float(v)


def write_csv(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    """Parse a results CSV back to Python values."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        parsed = {}
        for k, v in row.items():
            if v in ("true", "false"):
                parsed[k] = v == "true"
            elif v.lstrip("-").isdigit():
                parsed[k] = int(v)
            else:
                parsed[k] = float(v)
        out.append(parsed)
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else fmt_float(x)
    return obj


def dump_json(obj) -> str:
    """Deterministic JSON; non-finite floats become strings."""
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"
