"""Command-line interface.

Exit codes: 0 success, 2 config error, 3 model error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import harness, meanfield, rdpde
from .harness import ConfigError


class ModelError(Exception):
    pass


def _load_config(path, args) -> harness.ExperimentConfig:
    try:
        with open(path) as fh:
            cfg = harness.parse_config(fh.read())
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.replicates is not None:
        overrides["replicates"] = args.replicates
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.threads is not None:
        overrides["threads"] = args.threads
    return replace(cfg, **overrides) if overrides else cfg


def _parse_params(raw: str) -> dict:
    out = {}
    if not raw:
        return out
    for part in raw.split(","):
        k, _, v = part.partition("=")
        if not _:
            raise ConfigError(f"bad parameter {part!r}; expected name=value")
        v = v.strip()
        out[k.strip()] = (v.lower() == "true" if v.lower() in ("true", "false")
                          else float(v))
    return out


def cmd_sim(args):
    cfg = _load_config(args.config, args)
    res = harness.run_experiment(cfg)
    for rep, verdict in enumerate(res.verdicts):
        flags = ",".join("1" if p else "0" for p in verdict.persists)
        print(f"rep{rep:03d} persists=[{flags}] theta={verdict.theta}")
    print(f"wrote {len(res.csv_paths)} trace files to {cfg.out_dir}")


def cmd_sweep(args):
    cfg = _load_config(args.config, args)
    values = [float(v) for v in args.values.split(",")]
    rows = harness.sweep(cfg, args.axis, values)
    for row in rows:
        print(" ".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}"
                       for k, v in row.items()))


def cmd_snapshot(args):
    cfg = _load_config(args.config, args)
    model = harness.build_model_from_config(cfg)
    trace, grid = harness.run_replicate(cfg, args.rep, model=model)
    out = args.snapshot_out or os.path.join(cfg.out_dir,
                                            f"snapshot{args.rep:03d}.ppm")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    harness.emit_snapshot(grid, cfg.palette or harness.DEFAULT_PALETTE, out)
    print(f"wrote {out}")


def cmd_ode(args):
    params = _parse_params(args.params)
    try:
        system = meanfield.OdeSystem(args.system, params)
        u0 = np.array([float(v) for v in args.u0.split(",")])
        traj = meanfield.integrate(system, u0, args.horizon, tol=args.tol)
    except KeyError as e:
        raise ModelError(str(e)) from e
    if args.out:
        meanfield.trajectory_to_csv(traj, args.out)
        print(f"wrote {args.out}")
    final = np.array2string(traj.states[-1], precision=6)
    print(f"u({args.horizon}) = {final}")


def cmd_fixed_points(args):
    params = _parse_params(args.params)
    try:
        system = meanfield.OdeSystem(args.system, params)
    except KeyError as e:
        raise ModelError(str(e)) from e
    reports = meanfield.find_fixed_points(system, tol=args.tol)
    for r in reports:
        pt = np.array2string(r.point, precision=8)
        print(f"{pt}  {r.classification}  |rhs|={r.residual:.2e}")
    if args.out:
        meanfield.fixed_points_to_csv(reports, args.out)
        print(f"wrote {args.out}")


def _make_reaction(args):
    if args.reaction == "sexual":
        return rdpde.SexualReaction(args.beta)
    if args.reaction == "catalyst":
        return rdpde.CatalystReaction(args.p, args.q, args.r)
    raise ModelError(f"unknown reaction {args.reaction!r}")


def cmd_pde(args):
    reaction = _make_reaction(args)
    state = rdpde.front_initial_state(reaction, args.cells, args.dx)
    rdpde.integrate_pde(reaction, state, args.horizon)
    if args.out:
        rdpde.profile_to_csv(state, args.out)
        print(f"wrote {args.out}")
    print(f"profile mean = {state.u.mean(axis=1)}")


def cmd_speed(args):
    if args.analytic:
        sign = rdpde.speed_sign(args.beta)
        print(f"analytic speed sign at beta={args.beta}: {'+0-'[1 - sign]}")
        return
    reaction = _make_reaction(args)
    est = rdpde.estimate_front_speed(reaction, args.horizon, args.cells,
                                     args.dx)
    if not est.valid:
        print("front speed estimate invalid (front left the domain)")
        sys.exit(3)
    print(f"c = {est.speed:.5f} (residual {est.residual:.2e}, "
          f"window {est.window[0]:g}..{est.window[1]:g})")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coexlab",
                                description="stochastic spatial coexistence lab")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=None)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sim", help="run a lattice experiment from a config")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_sim)

    s = sub.add_parser("sweep", help="sweep one model parameter")
    s.add_argument("--config", required=True)
    s.add_argument("--axis", required=True)
    s.add_argument("--values", required=True, help="comma-separated values")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("snapshot", help="run one replicate, write a PPM")
    s.add_argument("--config", required=True)
    s.add_argument("--rep", type=int, default=0)
    s.add_argument("--snapshot-out", default=None)
    s.set_defaults(func=cmd_snapshot)

    s = sub.add_parser("ode", help="integrate a mean-field system")
    s.add_argument("--system", required=True)
    s.add_argument("--params", default="")
    s.add_argument("--u0", required=True)
    s.add_argument("--horizon", type=float, default=100.0)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--out-file", dest="out", default=None)
    s.set_defaults(func=cmd_ode)

    s = sub.add_parser("fixed-points", help="find and classify fixed points")
    s.add_argument("--system", required=True)
    s.add_argument("--params", default="")
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--out-file", dest="out", default=None)
    s.set_defaults(func=cmd_fixed_points)

    s = sub.add_parser("pde", help="run the 1-D reaction-diffusion solver")
    s.add_argument("--reaction", choices=["sexual", "catalyst"], required=True)
    s.add_argument("--beta", type=float, default=4.5)
    s.add_argument("--p", type=float, default=0.1)
    s.add_argument("--q", type=float, default=0.5)
    s.add_argument("--r", type=float, default=1.0)
    s.add_argument("--horizon", type=float, default=50.0)
    s.add_argument("--cells", type=int, default=2000)
    s.add_argument("--dx", type=float, default=0.1)
    s.add_argument("--out-file", dest="out", default=None)
    s.set_defaults(func=cmd_pde)

    s = sub.add_parser("speed", help="front speed (numeric or analytic sign)")
    s.add_argument("--reaction", choices=["sexual", "catalyst"],
                   default="sexual")
    s.add_argument("--beta", type=float, default=5.0)
    s.add_argument("--p", type=float, default=0.1)
    s.add_argument("--q", type=float, default=0.5)
    s.add_argument("--r", type=float, default=1.0)
    s.add_argument("--horizon", type=float, default=80.0)
    s.add_argument("--cells", type=int, default=2000)
    s.add_argument("--dx", type=float, default=0.1)
    s.add_argument("--analytic", action="store_true")
    s.set_defaults(func=cmd_speed)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ModelError, KeyError, ValueError) as e:
        print(f"model error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
