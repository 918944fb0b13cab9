"""Command-line front end.

Subcommands:
  simulate       integrate one of the controlled systems, export CSV + JSON
  verify         run the flag checks over sampled configurations
  singular-scan  locate alignment-degeneracy crossings along a trajectory

Outputs are deterministic for a fixed seed: the PRNG is seeded explicitly,
floats are printed with 17 significant digits, and JSON keys are sorted.
`MULTIFLAG_THREADS` caps the worker threads of verification sweeps.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import dynamics as dyn
from . import flags as fg
from . import sampling
from .arm import ArmDims, gamma_inverse, load_config
from .errors import ChartDegenerate, ConstraintViolated, StepRejected

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _parse_floats(text: str) -> np.ndarray:
    return np.array([float(x) for x in text.split(",") if x.strip() != ""])


def _initial_config(args) -> "sampling.AngularConfig":
    dims = ArmDims(args.k, args.n)
    if args.config:
        q = load_config(args.config)
        if q.dims != dims:
            raise ValueError(
                f"config file has (k={q.dims.k}, n={q.dims.n}), "
                f"flags say (k={dims.k}, n={dims.n})")
        return q
    rng = np.random.default_rng(args.seed)
    if args.preset == "straight":
        return sampling.collinear_config(dims)
    if args.preset == "random":
        return sampling.random_regular_config(dims, rng, chart_margin=0.1)
    raise ValueError(f"unknown preset {args.preset!r}")


def _controls(args, k: int) -> dyn.ControlSignal:
    if args.controls_file:
        data = np.loadtxt(args.controls_file, delimiter=",", skiprows=1,
                          ndmin=2)
        if data.shape[1] != 2 + k:
            raise ValueError(
                f"controls file needs columns t, vn, w1..w{k}")
        return dyn.ControlSignal.from_table(data[:, 0], data[:, 1],
                                            data[:, 2:])
    wn = _parse_floats(args.wn) if args.wn else np.zeros(k)
    if wn.size == 1 and k > 1:
        wn = np.full(k, wn[0])
    if wn.size != k:
        raise ValueError(f"--wn needs {k} comma-separated values")
    if args.controls == "constant":
        return dyn.ControlSignal.constant(args.vn, wn)
    if args.controls == "sine":
        return dyn.ControlSignal.sinusoid(k, vn_amp=args.vn, w_amp=wn,
                                          freq=args.freq)
    raise ValueError(f"unknown controls preset {args.controls!r}")


def _simulate_trajectory(args) -> dyn.Trajectory:
    q0 = _initial_config(args)
    dims = q0.dims
    settings = dyn.IntegratorSettings(h=args.h,
                                      projection=not args.no_projection)
    if args.mode == "car":
        if dims.k != 1:
            raise ValueError("--mode car requires --k 1")
        u = _controls(args, 1)
        return dyn.integrate_car(q0, u, args.T, settings, seed=args.seed)
    if args.mode == "arm":
        u = _controls(args, dims.k)
        return dyn.integrate_arm(q0, u, args.T, settings, seed=args.seed)
    if args.mode == "cartesian":
        u = _controls(args, dims.k)
        return dyn.integrate_cartesian(gamma_inverse(q0), u, args.T,
                                       settings, seed=args.seed)
    if args.mode == "subarm":
        if args.p is None or args.m is None:
            raise ValueError("--mode subarm requires --p and --m")
        u = _controls(args, dims.k)
        return dyn.integrate_subarm(q0, args.p, args.m, u, args.T,
                                    settings, seed=args.seed)
    raise ValueError(f"unknown mode {args.mode!r}")


def cmd_simulate(args) -> int:
    try:
        traj = _simulate_trajectory(args)
    except (ValueError, ChartDegenerate, ConstraintViolated) as exc:
        print(f"simulate: invalid run configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StepRejected as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return EXIT_FAIL
    traj.to_csv(args.out + ".csv")
    traj.to_json(args.out + ".json")
    summary = {
        "records": len(traj),
        "max_drift_pre_projection": float(traj.drift_pre.max()),
        "max_drift_post_projection": float(traj.drift_post.max()),
        "min_abs_A": traj.min_abs_a(),
    }
    print(f"wrote {args.out}.csv and {args.out}.json")
    for key, val in summary.items():
        print(f"  {key}: {val:.6e}" if isinstance(val, float)
              else f"  {key}: {val}")
    return EXIT_OK


def _verify_one(payload):
    q, tol, h, basis = payload
    return fg.verify_flag(q, tol=tol, h=h, basis=basis)


def cmd_verify(args) -> int:
    dims = ArmDims(args.k, args.n)
    rng = np.random.default_rng(args.seed)
    regular = [sampling.random_regular_config(dims, rng)
               for _ in range(args.samples)]
    singular = []
    for j in range(args.singular_samples):
        if dims.n < 1:
            break
        singular.append(sampling.singular_config(dims, rng,
                                                 index=1 + j % dims.n))

    threads = int(os.environ.get("MULTIFLAG_THREADS", "1") or "1")
    payloads = [(q, args.tol, args.bracket_h, args.basis)
                for q in regular + singular]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(_verify_one, payloads))
    else:
        reports = [_verify_one(p) for p in payloads]

    if args.out:
        payload = {
            "k": dims.k, "n": dims.n, "seed": args.seed,
            "samples": args.samples,
            "singular_samples": len(singular),
            "basis": args.basis,
            "reports": [r.to_dict() for r in reports],
        }
        with open(args.out + "_reports.json", "w") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")

    if args.render and reports:
        print(reports[0].render())

    reg_reports = reports[:len(regular)]
    sing_reports = reports[len(regular):]
    failures = [(j, r) for j, r in enumerate(reg_reports)
                if r.verdict == "regular" and not r.passed]
    stray_singular = [j for j, r in enumerate(reg_reports)
                      if r.verdict == "singular"]
    n_pass = sum(1 for r in reg_reports
                 if r.verdict == "regular" and r.passed)
    print(f"verify k={dims.k} n={dims.n}: {n_pass}/{len(regular)} regular "
          f"samples PASS"
          + (f", {len(stray_singular)} resampled points were singular"
             if stray_singular else ""))
    for j, r in enumerate(sing_reports):
        print(f"  injected singular sample {j}: verdict={r.verdict} "
              f"indices={list(r.singular_indices)} "
              f"sandwich={list(r.sandwich_indices)}")
    if failures:
        j, rep = failures[0]
        print(f"FAIL at regular sample {j}: {rep.failures[0]}",
              file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_singular_scan(args) -> int:
    if args.traj:
        traj = dyn.Trajectory.from_json(args.traj)
    else:
        try:
            traj = _simulate_trajectory(args)
        except (ValueError, ChartDegenerate, ConstraintViolated) as exc:
            print(f"singular-scan: invalid run configuration: {exc}",
                  file=sys.stderr)
            return EXIT_USAGE
    n = traj.dims.n
    events = []
    if n >= 1:
        a = np.sum(traj.z[:, :-1, :] * traj.z[:, 1:, :], axis=2)  # (M, n)
        for i in range(n):
            col = a[:, i]
            hits = np.abs(col) < args.eps_sing
            signflip = np.flatnonzero(np.sign(col[:-1]) * np.sign(col[1:]) < 0)
            marks = sorted(set(np.flatnonzero(hits)).union(signflip + 1))
            last = None
            for j in marks:
                if last is not None and j == last + 1:
                    last = j
                    continue  # one event per contiguous crossing
                last = j
                events.append({
                    "t": float(traj.times[j]),
                    "index": i + 1,
                    "A": float(col[j]),
                    "zero_velocity_joints": list(range(i + 1)),
                })
        events.sort(key=lambda e: (e["t"], e["index"]))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"events": events, "eps_sing": args.eps_sing,
                       "seed": args.seed}, fh, sort_keys=True)
            fh.write("\n")
    if not events:
        print("no alignment degeneracies found")
    for e in events:
        print(f"t={e['t']:.6f}  A_{e['index']} ~ {e['A']:.3e}  "
              f"stationary joints M_j for j < {e['index']}: "
              f"{e['zero_velocity_joints']}")
    return EXIT_OK


def _add_sim_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, required=True, help="sphere dimension")
    p.add_argument("--n", type=int, required=True,
                   help="number of trailers/segments minus one")
    p.add_argument("--mode", default="arm",
                   choices=["arm", "car", "cartesian", "subarm"])
    p.add_argument("--p", type=int, default=None, help="sub-arm lower joint")
    p.add_argument("--m", type=int, default=None, help="sub-arm upper joint")
    p.add_argument("--preset", default="straight",
                   choices=["straight", "random"])
    p.add_argument("--config", default=None,
                   help="JSON file with an initial configuration")
    p.add_argument("--controls", default="constant",
                   choices=["constant", "sine"])
    p.add_argument("--controls-file", default=None,
                   help="CSV with columns t, vn, w1..wk (linear interp)")
    p.add_argument("--vn", type=float, default=1.0,
                   help="normal-velocity control (amplitude for sine)")
    p.add_argument("--wn", default=None,
                   help="comma-separated tangential controls (amplitudes)")
    p.add_argument("--freq", type=float, default=0.5,
                   help="frequency of the sine preset")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-projection", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="multiflag",
        description="Articulated-arm kinematics and flag verification")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate a controlled run")
    _add_sim_args(sim)
    sim.add_argument("--out", default="multiflag_run",
                     help="output path prefix")
    sim.set_defaults(fn=cmd_simulate)

    ver = sub.add_parser("verify", help="flag checks over random samples")
    ver.add_argument("--k", type=int, required=True)
    ver.add_argument("--n", type=int, required=True)
    ver.add_argument("--samples", type=int, default=100)
    ver.add_argument("--singular-samples", type=int, default=0,
                     help="additionally verify constructed singular points")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--tol", type=float, default=1e-8,
                     help="relative SVD rank threshold")
    ver.add_argument("--bracket-h", type=float, default=fg.BRACKET_H)
    ver.add_argument("--basis", default="projected",
                     choices=["projected", "chart"])
    ver.add_argument("--out", default=None, help="report path prefix")
    ver.add_argument("--render", action="store_true",
                     help="print the diagram of the first report")
    ver.set_defaults(fn=cmd_verify)

    scan = sub.add_parser("singular-scan",
                          help="find A_i crossings along a trajectory")
    _add_sim_args(scan)
    scan.add_argument("--traj", default=None,
                      help="trajectory JSON (skips simulation)")
    scan.add_argument("--eps-sing", type=float, default=fg.EPS_SING)
    scan.add_argument("--out", default=None, help="JSON report path")
    scan.set_defaults(fn=cmd_singular_scan)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ValueError as exc:
        print(f"multiflag: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
