"""Command-line entry point: ``twofluid {run,ladder,verify,inspect}``.

Exit codes: 0 success, 1 validation failure (bad config or failed
verification gate), 2 runtime failure (stability or fixed point), 3 I/O.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import ModelParams, ValidationError, total_mass
from .diagnostics import comparability_check, energy_budget, llogl
from .harness import ladder, manufactured_convergence, run_scenario
from .io import (
    RunConfig,
    SnapshotError,
    load_config,
    read_snapshot,
    serialize_config,
    write_report,
    write_snapshot,
)
from .momentum import FixedPointError
from .transport import StabilityError

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("twofluid")


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out if args.out else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_run(out: Path, cfg: RunConfig, traj, report) -> None:
    (out / "config.cfg").write_text(serialize_config(cfg))
    write_report(report, out / "report.json")
    if cfg.write_csv:
        write_report(report, out / "timeseries.csv")
    if traj.states:
        write_snapshot(traj.states[-1], out / "final.snap")
    if cfg.write_snapshots:
        for i, s in enumerate(traj.states):
            write_snapshot(s, out / f"snap_{i:05d}.snap")


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.override)
    out = _out_dir(args, cfg)
    traj, report = run_scenario(cfg.scenario())
    _write_run(out, cfg, traj, report)
    print(f"stored {len(traj.states)} snapshots up to t={traj.states[-1].time:.6g} in {out}")
    if traj.failure:
        print(f"run stopped: {traj.failure}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_ladder(args) -> int:
    cfg = load_config(args.config, args.override)
    if cfg.ladder_kind is None or not cfg.ladder_values:
        raise ValidationError("ladder needs ladder_kind and ladder_values")
    out = _out_dir(args, cfg)
    values = [int(v) for v in cfg.ladder_values] if cfg.ladder_kind == "basis_k" else cfg.ladder_values
    result = ladder(cfg.ladder_kind, values, cfg.scenario(), workers=cfg.workers)
    (out / "config.cfg").write_text(serialize_config(cfg))
    write_report(result, out / "ladder.json")
    if cfg.write_csv:
        for i, rep in enumerate(result.reports):
            if rep is not None:
                rung = out / f"rung_{i:02d}"
                rung.mkdir(exist_ok=True)
                write_report(rep, rung / "timeseries.csv")
    print(f"{cfg.ladder_kind} ladder {result.values}")
    for v, m in zip(result.values, result.metrics):
        print(f"  {v:<10g} {result.primary} = {m.get(result.primary, float('nan')):.6e}")
    print(f"  order {result.order:.3f}  cauchy ratios {result.cauchy_ratios}")
    if result.partial:
        print("ladder is partial: " + "; ".join(f for f in result.failures if f), file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _invariant_suite() -> dict:
    """Small mass-conservation and comparability checks."""
    from .core import FluidState, Grid, ScalarField, VectorField
    from .transport import advance_density

    g = Grid((1.0,), (128,))
    x = g.coords[0]
    uu = np.sin(np.pi * x)
    uu[[0, -1]] = 0.0
    u = VectorField(g, uu[None])
    f = ScalarField(g, 1 + 0.5 * np.cos(2 * np.pi * x), density=True)
    nf = ScalarField(g, 2 * f.values, density=True)
    m0 = total_mass(f)
    for _ in range(200):
        f = advance_density(f, u, 1e-2, 2e-3)
        nf = advance_density(nf, u, 1e-2, 2e-3)
    drift = abs(total_mass(f) - m0) / m0
    margin = comparability_check(FluidState(f, nf, u), 2.0)
    return {
        "mass_drift": {"value": drift, "passed": drift <= 1e-12},
        "comparability_margin": {"value": margin, "passed": margin <= 1e-10},
    }


def cmd_verify(args) -> int:
    results = {}
    ok = True
    for profile in ("equilibrium", "diffusion", "advection", "momentum"):
        r = manufactured_convergence(profile, refinements=args.refinements)
        results[profile] = r.to_dict()
        ok &= r.passed
        verdict = "PASS" if r.passed else "FAIL"
        if profile == "equilibrium":
            print(f"{profile:<12} max error {max(r.errors):.2e}  {verdict}")
        else:
            print(f"{profile:<12} order {r.order:7.3f}  gate {r.gate:4.2f}  {verdict}")
    for name, item in _invariant_suite().items():
        results[name] = item
        ok &= item["passed"]
        print(f"{name:<12} {item['value']:.3e}  {'PASS' if item['passed'] else 'FAIL'}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_report(results, out / "verify.json")
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_inspect(args) -> int:
    state = read_snapshot(args.snapshot)
    p = load_config(args.config, args.override).params() if args.config else ModelParams()
    g = state.grid
    info = {
        "dim": g.dim,
        "extent": list(g.extent),
        "points": list(g.points),
        "time": state.time,
        "mass_rho": total_mass(state.rho),
        "mass_n": total_mass(state.n),
        "min_rho": float(state.rho.values.min()),
        "max_rho": float(state.rho.values.max()),
        "min_n": float(state.n.values.min()),
        "max_n": float(state.n.values.max()),
        "max_speed": state.u.max_abs(),
    }
    info["llogl_rho"], info["llogl_n"] = llogl(state)
    if p.c0 is not None:
        info["comparability_margin"] = comparability_check(state, p.c0)
    if p.gamma > 1:
        info.update({f"energy_{k}": v for k, v in energy_budget(state, p).as_dict().items()})
    print(json.dumps(info, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twofluid", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="key = value config file")
        p.add_argument("--out", help="output directory (overrides out_dir)")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="replace a config entry; repeatable")

    p_run = sub.add_parser("run", help="single simulation from a config")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_lad = sub.add_parser("ladder", help="continuation study in epsilon, delta or basis_k")
    common(p_lad)
    p_lad.set_defaults(func=cmd_ladder)

    p_ver = sub.add_parser("verify", help="manufactured-solution convergence and invariants")
    p_ver.add_argument("--out", help="write verify.json here")
    p_ver.add_argument("--refinements", type=int, default=4)
    p_ver.set_defaults(func=cmd_verify)

    p_ins = sub.add_parser("inspect", help="print diagnostics of a snapshot file")
    p_ins.add_argument("snapshot")
    common(p_ins, config_required=False)
    p_ins.set_defaults(func=cmd_inspect)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (StabilityError, FixedPointError, np.linalg.LinAlgError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, SnapshotError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
