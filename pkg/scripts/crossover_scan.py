"""Ballistic-to-diffusive crossover: N* from the log-log slope of S2 for several noise strengths."""

import argparse
from pathlib import Path

import numpy as np

from noisy_qwalk.evolution import NoiseSpec
from noisy_qwalk.moments import SLOPE_THRESHOLD, crossover_scan, write_scan_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.02, 0.05, 0.1, 0.2, 0.5])
    ap.add_argument("--gamma", type=float, default=np.pi / 4)
    ap.add_argument("--nmax", type=int, default=None, help="default: 40 / eps^2")
    ap.add_argument("--outdir", type=Path, default=None)
    args = ap.parse_args()

    print(f"{'eps':>6} {'N_max':>7} {'N*':>7} {'N* eps^2':>9} {'S2(N_max) eps^2/N':>18}")
    for eps in args.eps:
        n_max = args.nmax or max(50, int(40 / eps ** 2))
        scan = crossover_scan(NoiseSpec(eps), args.gamma, n_max)
        s2 = scan.columns["S2"][-1]
        n_star = scan.n_star
        x = "-" if n_star is None else f"{n_star * eps ** 2:.3f}"
        print(f"{eps:6.3f} {n_max:7d} {str(n_star):>7} {x:>9} {s2 * eps ** 2 / n_max:18.4f}")
        if args.outdir is not None:
            args.outdir.mkdir(parents=True, exist_ok=True)
            write_scan_csv(scan, args.outdir / f"scan_eps{eps:g}.csv", {"slope_threshold": SLOPE_THRESHOLD})


if __name__ == "__main__":
    main()
