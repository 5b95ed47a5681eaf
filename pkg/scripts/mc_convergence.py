"""Monte Carlo S2 against the exact averaged walk as the ensemble grows."""

import argparse
import time

import numpy as np

from noisy_qwalk.evolution import NoiseSpec
from noisy_qwalk.state import InitialCondition
from noisy_qwalk.trajectories import TrajectorySpec, ensemble_average


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=0.5)
    ap.add_argument("--qplus", type=float, default=0.5)
    ap.add_argument("--steps", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--ntraj", type=int, nargs="+", default=[1000, 3000, 10_000, 30_000, 100_000])
    ap.add_argument("--parallel", action="store_true")
    args = ap.parse_args()

    noise = NoiseSpec(args.eps, args.qplus)
    print(f"{'M':>8} {'S2 est':>10} {'stderr':>8} {'exact':>10} {'z':>6} {'TV':>8} {'sec':>6}")
    for m in args.ntraj:
        t0 = time.perf_counter()
        rep = ensemble_average(TrajectorySpec(m, args.seed, args.steps, noise, InitialCondition()), parallel=args.parallel)
        s2 = rep.moments[2]
        z = (s2.estimate - s2.exact) / s2.stderr
        print(
            f"{m:8d} {s2.estimate:10.3f} {s2.stderr:8.3f} {s2.exact:10.3f} {z:6.2f} "
            f"{rep.tv_distance:8.4f} {time.perf_counter() - t0:6.1f}"
        )
    print(f"stderr should fall as 1/sqrt(M); sqrt(10) = {np.sqrt(10):.3f}")


if __name__ == "__main__":
    main()
