"""Command-line front end: solve, sweep, simulate and oracle subcommands.

Exit codes:
    0  success
    2  unreadable or malformed input (instance, strategy, grid spec)
    3  invalid solver or simulation settings
    4  block too long for exact posteriors
    5  instance too large for exhaustive enumeration
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .blocksim import (
    BlockTooLongForExact,
    CodebookTooLarge,
    NotInQ0Tilde,
    distortion_gap_bound,
    run_monte_carlo,
)
from .game import RatePair, Strategy
from .io import (
    SIM_COLUMNS,
    SWEEP_COLUMNS,
    InstanceFileError,
    dump_json,
    load_instance,
    write_csv,
)
from .oracle import InstanceTooLarge, brute_force_game_value, grid_oracle_dstar
from .solver import InvalidConfig, rate_sweep, solve

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_TOO_LONG, EXIT_TOO_LARGE = 0, 2, 3, 4, 5


class InputError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load(path: str):
    try:
        return load_instance(path)
    except FileNotFoundError:
        raise InputError(f"instance file not found: {path}") from None
    except (OSError, InstanceFileError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _solver_cfg(inst, args):
    return inst.solver_config(seed=args.seed, restarts=args.restarts, grid_step=args.grid_step,
                              tie_tol=args.tie_tol, boundary_eps=args.boundary_eps,
                              max_iters=args.max_iters, method=args.method).validate()


def parse_axis(spec: str) -> list[float]:
    """'0:0.25:1' (start:step:stop, inclusive) or a comma list '0,0.5,1'."""
    try:
        if ":" in spec:
            start, step, stop = (float(x) for x in spec.split(":"))
            if step <= 0:
                raise ValueError
            k = int(np.floor((stop - start) / step + 1e-9))
            return [round(start + i * step, 12) for i in range(k + 1)]
        return [float(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"bad rate axis spec {spec!r}; use start:step:stop or a comma list") from None


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    cfg = _solver_cfg(inst, args)
    res = solve(inst.game, RatePair(args.r1, args.r2), cfg)
    out = {"instance": inst.game.name, "r1": args.r1, "r2": args.r2, **res.to_dict()}
    _emit(dump_json(out), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    inst = _load(args.instance)
    cfg = _solver_cfg(inst, args)
    grid = [RatePair(a, b) for a in parse_axis(args.r1) for b in parse_axis(args.r2)]
    rows = []
    for r, res in zip(grid, rate_sweep(inst.game, grid, cfg)):
        rows.append({"r1": r.r1, "r2": r.r2, "dstar": res.value, "i_uw2": res.rates_used[0],
                     "i_uw1w2": res.rates_used[1], "feasible": res.feasible,
                     "restarts": res.restarts, "epsilon_report": res.epsilon_report})
    _emit(write_csv(SWEEP_COLUMNS, rows), args.out)
    return EXIT_OK


def _load_strategy(src: str) -> Strategy:
    text = src.strip()
    try:
        if not text.startswith(("{", "[")):
            text = Path(src).read_text()
        doc = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read strategy {src!r}: {exc}") from None
    if isinstance(doc, dict) and "strategy" in doc:
        doc = doc["strategy"]
    if isinstance(doc, list):
        doc = {"q": doc}
    try:
        return Strategy.from_dict(doc)
    except (KeyError, ValueError) as exc:
        raise InputError(f"invalid strategy: {exc}") from None


def cmd_simulate(args) -> int:
    inst = _load(args.instance)
    g = inst.game
    s = _load_strategy(args.strategy) if args.strategy else Strategy.uninformative(g.u_size, g.v1_size, g.v2_size)
    if s.u_size != g.u_size:
        raise InputError("strategy and instance disagree on |U|")
    try:
        cfg = inst.sim_config(n=args.n, delta=args.delta, eta=args.eta, alpha=args.alpha,
                              gamma=args.gamma, trials=args.trials, seed=args.seed,
                              tie_tol=args.tie_tol).validate()
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(str(exc)) from None
    rep = run_monte_carlo(g, s, cfg)
    rows = [{c: getattr(r, c) for c in SIM_COLUMNS} for r in rep.records]
    csv_text = write_csv(SIM_COLUMNS, rows)
    summary = rep.to_dict()
    try:
        gap, bound = distortion_gap_bound(rep, s, g, cfg.alpha, cfg.gamma, cfg.delta, cfg.tie_tol)
        summary.update({"singleton_worst_pairs": True, "gap": gap, "gap_bound": bound})
    except NotInQ0Tilde:
        summary.update({"singleton_worst_pairs": False, "gap": None, "gap_bound": None})
    if args.out:
        Path(args.out).write_text(csv_text)
        _emit(dump_json(summary), args.report)
    else:
        sys.stdout.write(csv_text)
        if args.report:
            Path(args.report).write_text(dump_json(summary))
    return EXIT_OK


def cmd_oracle(args) -> int:
    inst = _load(args.instance)
    r = RatePair(args.r1, args.r2)
    tie = args.tie_tol if args.tie_tol is not None else inst.solver_config().tie_tol
    if args.n is not None:
        res = brute_force_game_value(inst.game, r, args.n, args.enc_grid, tie)
        kind = "block"
    else:
        res = grid_oracle_dstar(inst.game, r, args.resolution, tie)
        kind = "single-letter"
    _emit(dump_json({"instance": inst.game.name, "r1": args.r1, "r2": args.r2, "kind": kind, **res.to_dict()}),
          args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stratref", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--restarts", type=int)
        sp.add_argument("--grid-step", type=float)
        sp.add_argument("--tie-tol", type=float)
        sp.add_argument("--boundary-eps", type=float)
        sp.add_argument("--max-iters", type=int)
        sp.add_argument("--method", choices=["convex", "search"])
        sp.add_argument("--out", help="output file (default: stdout)")

    sp = sub.add_parser("solve", help="optimal encoder distortion at one rate pair (JSON)")
    sp.add_argument("instance")
    sp.add_argument("r1", type=float)
    sp.add_argument("r2", type=float)
    solver_flags(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep", help="solve over a rate grid (CSV)")
    sp.add_argument("instance")
    sp.add_argument("--r1", default="0:0.25:1", help="start:step:stop or comma list")
    sp.add_argument("--r2", default="0:0.25:1", help="start:step:stop or comma list")
    solver_flags(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("simulate", help="Monte Carlo block simulation (per-trial CSV + JSON report)")
    sp.add_argument("instance")
    sp.add_argument("--strategy", help="solve JSON file, strategy JSON file, or inline JSON")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--eta", type=float)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--tie-tol", type=float)
    sp.add_argument("--out", help="per-trial CSV file (default: stdout)")
    sp.add_argument("--report", help="aggregate JSON file (default: stdout when --out is given)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("oracle", help="exhaustive reference value (JSON)")
    sp.add_argument("instance")
    sp.add_argument("r1", type=float)
    sp.add_argument("r2", type=float)
    sp.add_argument("--resolution", type=float, default=0.02, help="belief/channel lattice step")
    sp.add_argument("--n", type=int, help="block length for the finite-n game value (1 or 2)")
    sp.add_argument("--enc-grid", type=float, default=0.1, help="encoding lattice step for --n")
    sp.add_argument("--tie-tol", type=float)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InvalidConfig, InstanceFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, InvalidConfig) else EXIT_INPUT
    except BlockTooLongForExact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOO_LONG
    except (InstanceTooLarge, CodebookTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
