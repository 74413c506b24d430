"""Command line entry point: ``ditrotter {sweep,compare,bound-check,demo}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 bound violation found by ``bound-check``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import kernels
from .counterdiabatic import CDSystem, adiabatic_phases
from .errors import ConfigError, DitrotterError, NumericalFailure
from .experiments import SweepConfig, compare_splits, run_sweep, write_comparison_csv
from .evolution import Trajectory
from .invariant import InvariantFrame
from .linalg import fs_angles
from .models import build_model

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VIOLATION = 0, 2, 3, 4

log = logging.getLogger("ditrotter")


def _load_config(args) -> SweepConfig:
    data = {}
    if args.config:
        data.update(vars(SweepConfig.from_file(args.config)))
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        data[k.strip()] = v
    if getattr(args, "out", None):
        data["out"] = args.out
    return SweepConfig.from_mapping(data)


def _frame_cache(model, path):
    """Load the invariant frame from ``path`` if present, else write it there."""
    if not path:
        return
    p = Path(path)
    if p.exists():
        frame = InvariantFrame.from_json(p)
        if frame.resolution != model.resolution or frame.dim != model.dim:
            raise ConfigError(f"cached frame {p} does not match the model grid")
        model.__dict__["frame"] = frame
        log.info("loaded frame cache %s", p)
        return
    if model.cd_enabled:
        model.cd.to_json(p)
    else:
        model.frame.to_json(p)
    log.info("wrote frame cache %s", p)


def _export_trajectories(model, cfg, directory):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    split = model.split(cfg.split)
    for M in cfg.m_values():
        _, exact, digit = model.run(cfg.split, M, cfg.level, split)
        ts = np.linspace(0.0, model.horizon, M + 1)
        Trajectory(ts, exact, "exact").to_csv(d / f"exact_M{M}.csv")
        Trajectory(ts, digit, "digitized").to_csv(d / f"digitized_M{M}.csv")


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    model = cfg.build_model()
    _frame_cache(model, args.frame_cache)
    result = run_sweep(cfg, model)
    if args.trajectories:
        _export_trajectories(model, cfg, args.trajectories)
    print(f"model={cfg.model} split={cfg.split} slope={result.slope:.4f} "
          f"intercept={result.intercept:.4f} residual={result.residual:.2e} points={len(result.M)}")
    for M, y, b in zip(result.M, result.infidelity, result.bound):
        print(f"  M={M:6d}  sqrt(1-F)={y:.6e}  sin(sum L)={b:.6e}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load_config(args)
    model = cfg.build_model()
    _frame_cache(model, args.frame_cache)
    cmp = compare_splits(cfg, (args.first, args.second), model)
    if cfg.out:
        write_comparison_csv(cfg.out, cmp)
    for s in cmp["strategies"]:
        print(f"{s}: slope={cmp['results'][s].slope:.4f}")
    for M, q in zip(cmp["M"], cmp["ratio"]):
        print(f"  M={M:6d}  ratio={q:.6e}")
    return EXIT_OK


def cmd_bound_check(args) -> int:
    cfg = _load_config(args)
    model = cfg.build_model()
    strategies = [cfg.split] if args.only_split else list(model.strategies())
    violations = checked = 0
    for s in strategies:
        split = model.split(s)
        for M in cfg.m_values():
            report, _, _ = model.run(s, M, cfg.level, split)
            checked += report.bound_valid
            if not report.bound_holds():
                violations += 1
                print(f"VIOLATION split={s} M={M} overlap={report.overlap_exact!r} "
                      f"cos(sum L)={report.overlap_lower!r}")
    print(f"checked {checked} runs with sum L <= pi/2, {violations} violations")
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_demo(args) -> int:
    cfg = _load_config(args)
    if not cfg.model.endswith("-cd"):
        cfg = SweepConfig(**{**cfg.echo(), "model": "lz-cd"})
    model = cfg.build_model()
    sys_: CDSystem = model.cd
    print(f"backend: {kernels.BACKEND}")
    print(f"counterdiabatic {model.href.label}, T = {cfg.horizon}, J_s = {model.resolution}")
    ph = adiabatic_phases(sys_)
    c0 = np.zeros(model.dim)
    c0[cfg.level] = 1.0
    traj, _ = model.reference.trajectory(cfg.m_max, sys_.frame.basis[0] @ c0)
    stride = model.resolution // cfg.m_max
    target = sys_.frame.basis[::stride] @ (c0 * np.exp(1j * ph.kappa[::stride]))[..., None]
    worst = float(np.max(fs_angles(traj.states, target[..., 0])))
    print(f"exact CD evolution vs adiabatic state: max angle {worst:.3e}")
    print(f"{'M':>6} {'naive sqrt(1-F)':>16} {'cd sqrt(1-F)':>14}")
    naive, cd = model.split("naive"), model.split("cd")
    for M in cfg.m_values():
        a = model.run("naive", M, cfg.level, naive)[0].infidelity_sqrt
        b = model.run("cd", M, cfg.level, cd)[0].infidelity_sqrt
        print(f"{M:6d} {a:16.6e} {b:14.6e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ditrotter", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("-c", "--config", help="flat key = value config file")
        sp.add_argument("-s", "--set", action="append", metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
        sp.add_argument("-o", "--out", help="output CSV path")

    sp = sub.add_parser("sweep", help="sweep M for one split and fit the slope")
    common(sp)
    sp.add_argument("--frame-cache", help="JSON cache for the invariant frame")
    sp.add_argument("--trajectories", metavar="DIR", help="also export trajectory CSVs here")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("compare", help="compare two splits over the same M values")
    common(sp)
    sp.add_argument("--first", default="naive")
    sp.add_argument("--second", default="di")
    sp.add_argument("--frame-cache", help="JSON cache for the invariant frame")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("bound-check", help="check the overlap bound on every run")
    common(sp)
    sp.add_argument("--only-split", action="store_true", help="check only the configured split")
    sp.set_defaults(func=cmd_bound_check)

    sp = sub.add_parser("demo", help="Landau-Zener counterdiabatic showcase")
    common(sp)
    sp.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DitrotterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
