"""Cut family (a) short at a range of pulse deviations and compare with the closed form."""

import argparse
import math

import numpy as np

from ramanpass.analysis import truncation_population
from ramanpass.schedule import builtin_family


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--max-delta", type=float, default=0.3)
    parser.add_argument("--points", type=int, default=7)
    args = parser.parse_args()

    spec = builtin_family("a")
    print(f"{'delta':>8}{'predicted P3':>15}{'simulated P3':>15}{'|diff|':>11}{'cos^2':>10}")
    for delta in np.linspace(args.max_delta / args.points, args.max_delta, args.points):
        # for family a, tan(delta) = 2 cos(tau / 2)
        r = truncation_population(spec, 2 * math.acos(math.tan(delta) / 2))
        print(f"{r.delta:>8.4f}{r.predicted_p3:>15.10f}{r.simulated_p3:>15.10f}"
              f"{abs(r.simulated_p3 - r.predicted_p3):>11.1e}{r.stirap_baseline:>10.5f}")


if __name__ == "__main__":
    main()
