"""
Command-line driver.

    noisy-qwalk evolve       position distribution after N steps
    noisy-qwalk moments      moment scan with closed forms, slopes and regimes
    noisy-qwalk trajectories Monte Carlo ensemble report
    noisy-qwalk verify       dilation and coset-probability identities

Exit codes: 0 ok, 2 invalid configuration, 3 window overflow, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path


from . import __version__
from .dilation import equivalence_check, write_report
from .errors import CapacityError, SupportOverflow
from .evolution import NoiseSpec, cptp_step, iterate_diagonal
from .linalg import lemma1_residuals
from .moments import crossover_scan, write_scan_csv
from .state import (
    InitialCondition,
    init_density,
    init_diagonal,
    write_state_csv,
    write_state_json,
)
from .trajectories import RNG_CONTRACT, TrajectorySpec, ensemble_average

EXIT_OK, EXIT_CONFIG, EXIT_OVERFLOW, EXIT_VERIFY = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def _add_common(p: argparse.ArgumentParser, epsilon: float = 0.1) -> None:
    p.add_argument("--epsilon", type=float, default=epsilon, help="noise strength")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--gamma", type=float, default=None, help="initial coin angle, radians")
    g.add_argument("--gamma-deg", type=float, default=None, help="initial coin angle, degrees")
    p.add_argument("--qplus", type=float, default=0.5, help="probability of s = +1")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noisy-qwalk", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="evolve the walk and write the position distribution")
    _add_common(p)
    p.add_argument("--mode", choices=("diagonal", "dense"), default="diagonal")
    p.add_argument("--per-step", action="store_true", help="write every step, not just the last")

    p = sub.add_parser("moments", help="moment scan over N = 1..steps")
    _add_common(p)

    p = sub.add_parser("trajectories", help="Monte Carlo over noise realizations")
    _add_common(p, epsilon=0.5)
    p.add_argument("--ntraj", type=int, default=1000)
    p.add_argument("--parallel", action="store_true")

    p = sub.add_parser("verify", help="check dilation and coset-probability identities")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--nrandom", type=int, default=100, help="random densities per grid point")
    p.add_argument("--nunitaries", type=int, default=1000)
    p.add_argument("--halfwidth", type=int, default=16)
    p.add_argument("--out", type=Path, default=None)
    return parser


def _gamma(args) -> float:
    if args.gamma_deg is not None:
        return math.radians(args.gamma_deg)
    return math.pi / 4 if args.gamma is None else args.gamma


def _validate(args, allow_zero_eps: bool = False) -> tuple[NoiseSpec, InitialCondition]:
    gamma = _gamma(args)
    if not 0 <= gamma < math.pi:
        raise ConfigError(f"gamma must lie in [0, pi), got {gamma}")
    eps = args.epsilon
    if not (eps > 0 or (allow_zero_eps and eps == 0)) or not math.isfinite(eps):
        raise ConfigError(f"epsilon must be > 0, got {eps}")
    if not 0 <= args.qplus <= 1:
        raise ConfigError(f"qplus must lie in [0, 1], got {args.qplus}")
    if args.steps < 0:
        raise ConfigError(f"steps must be >= 0, got {args.steps}")
    if not 0 <= args.seed < 2 ** 64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    return NoiseSpec(eps, args.qplus), InitialCondition(gamma)


def _metadata(args, **extra) -> dict:
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    return {"library": "noisy_qwalk", "version": __version__, "config": config, **extra}


def _emit_text(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def cmd_evolve(args) -> int:
    spec, ic = _validate(args)
    if args.mode == "diagonal" and spec.q_plus != 0.5:
        raise ConfigError("diagonal mode requires --qplus 0.5; use --mode dense")
    meta = _metadata(args, gamma_radians=ic.gamma)

    if args.mode == "diagonal":
        state = init_diagonal(ic, args.steps)
        snapshots = [state.copy()]
        for st in iterate_diagonal(state, spec, args.steps):
            if args.per_step:
                snapshots.append(st.copy())
            else:
                snapshots[0] = st
        final = snapshots[-1].copy()
    else:
        dense = init_density(ic, args.steps)
        snapshots = [dense.diagonal_state()]
        for _ in range(args.steps):
            dense = cptp_step(dense, spec)
            if args.per_step:
                snapshots.append(dense.diagonal_state())
        final = dense.diagonal_state()
    if not args.per_step:
        snapshots = [final]

    out = args.out
    if args.format == "json":
        payload = {"metadata": meta, "states": [s.to_dict() for s in snapshots]}
        if not args.per_step:
            payload = {**final.to_dict(), "metadata": meta}
        _emit_text(json.dumps(payload, indent=1) + "\n", out)
        return EXIT_OK

    if not args.per_step and out is not None:
        write_state_csv(final, out, meta)
        write_state_json(final, out.with_suffix(".json"), meta)
        return EXIT_OK

    fh = sys.stdout if out is None else out.open("w", newline="")
    try:
        for key, value in meta.items():
            fh.write(f"# {key}: {json.dumps(value)}\n")
        writer = csv.writer(fh)
        header = ["k", "alpha", "beta", "total"]
        writer.writerow(["N", *header] if args.per_step else header)
        for s in snapshots:
            for k, a, b in zip(s.window.sites, s.alpha, s.beta):
                row = [int(k), repr(float(a)), repr(float(b)), repr(float(a + b))]
                writer.writerow([s.step, *row] if args.per_step else row)
    finally:
        if out is not None:
            fh.close()
    return EXIT_OK


def cmd_moments(args) -> int:
    spec, ic = _validate(args, allow_zero_eps=True)
    if spec.q_plus != 0.5:
        raise ConfigError("moment scan and closed forms require --qplus 0.5")
    if args.steps < 1:
        raise ConfigError("moment scan needs --steps >= 1")
    scan = crossover_scan(spec, ic.gamma, args.steps)
    meta = _metadata(args)
    if args.format == "json":
        payload = {
            "metadata": {**scan.metadata(), **meta},
            "columns": {k: [float(x) for x in v] for k, v in scan.columns.items()},
            "regime": [r.value for r in scan.regimes],
        }
        _emit_text(json.dumps(payload, indent=1) + "\n", args.out)
    elif args.out is None:
        write_scan_csv(scan, sys.stdout, meta)
    else:
        write_scan_csv(scan, args.out, meta)
        args.out.with_suffix(".meta.json").write_text(
            json.dumps({**scan.metadata(), **meta}, indent=1)
        )
    print(f"N* (slope < 1.5) = {scan.n_star}", file=sys.stderr)
    return EXIT_OK


def cmd_trajectories(args) -> int:
    spec, ic = _validate(args)
    if args.ntraj < 100:
        raise ConfigError("--ntraj must be >= 100")
    tspec = TrajectorySpec(args.ntraj, args.seed, args.steps, spec, ic)
    report = ensemble_average(tspec, parallel=args.parallel)
    meta = _metadata(args, rng_contract=RNG_CONTRACT)
    if args.out is None:
        print(json.dumps({**report.to_dict(), "metadata": meta}, indent=1))
    else:
        report.write(args.out, args.out.with_suffix(".csv"), meta)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.tol <= 0:
        raise ConfigError("--tol must be positive")
    if not 1 <= args.halfwidth <= 16:
        raise ConfigError("--halfwidth must lie in [1, 16]")
    rows = equivalence_check(n_random=args.nrandom, halfwidth=args.halfwidth, seed=args.seed)
    lemma = lemma1_residuals(args.nunitaries, seed=args.seed)
    checks = []
    for r in rows:
        label = f"dilation eps={r['epsilon']} q+={r['q_plus']} a={r['aux_index']}"
        checks.append((label + " trace-norm", r["max_trace_norm_deviation"]))
        checks.append((label + " Y unitarity", r["y_unitarity_residual"]))
    checks += [(f"coset {name}", value) for name, value in lemma.items()]
    ok = True
    print(f"{'check':58s} {'residual':>11s}  status")
    for label, value in checks:
        passed = value < args.tol
        ok &= passed
        print(f"{label:58s} {value:11.3e}  {'PASS' if passed else 'FAIL'}")
    print(f"tolerance {args.tol:.1e}: {'all passed' if ok else 'FAILED'}")
    if args.out is not None:
        write_report(rows, args.out, _metadata(args, coset_residuals=lemma, passed=ok))
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {
    "evolve": cmd_evolve,
    "moments": cmd_moments,
    "trajectories": cmd_trajectories,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SupportOverflow, CapacityError) as exc:
        print(f"overflow: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW


if __name__ == "__main__":
    sys.exit(main())
