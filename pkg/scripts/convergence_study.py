"""Step-doubling study of the fixed-step reference and its distance to the adaptive run."""

import argparse

import numpy as np

from ramanpass import operators as ops
from ramanpass.dynamics import evolve, propagate_reference
from ramanpass.schedule import builtin_family, end_tau


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--family", default="a")
    parser.add_argument("--truth-steps", type=int, default=1 << 20)
    args = parser.parse_args()

    spec = builtin_family(args.family)
    end = end_tau(spec)
    psi0 = ops.basis(1)
    truth = propagate_reference(spec, psi0, end, args.truth_steps)
    previous = None
    print(f"{'steps':>8}{'error':>12}{'ratio':>8}")
    for n in (250, 500, 1000, 2000, 4000, 8000):
        err = np.linalg.norm(propagate_reference(spec, psi0, end, n) - truth)
        ratio = f"{previous / err:8.2f}" if previous else " " * 8
        print(f"{n:>8}{err:>12.3e}{ratio}")
        previous = err
    adaptive = evolve(spec, samples=2).final_state
    print(f"adaptive vs reference ({args.truth_steps} steps): "
          f"{np.linalg.norm(adaptive - truth):.2e}")


if __name__ == "__main__":
    main()
