"""Position distributions after N steps for a range of noise strengths, written as one CSV."""

import argparse
import csv
import sys

import numpy as np

from noisy_qwalk.evolution import NoiseSpec, evolve
from noisy_qwalk.state import InitialCondition, position_distribution


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.0, 0.05, 0.2, 1.0])
    ap.add_argument("--gamma", type=float, default=np.pi / 4)
    args = ap.parse_args()

    ic = InitialCondition(args.gamma)
    cols = {eps: position_distribution(evolve(ic, NoiseSpec(eps), args.steps)) for eps in args.eps}
    writer = csv.writer(sys.stdout)
    writer.writerow(["k", *(f"p_eps{eps:g}" for eps in args.eps)])
    for i, k in enumerate(range(-args.steps, args.steps + 1)):
        if (k + args.steps) % 2:
            continue  # parity: odd offsets are empty
        writer.writerow([k, *(repr(float(cols[eps][i])) for eps in args.eps)])


if __name__ == "__main__":
    main()
