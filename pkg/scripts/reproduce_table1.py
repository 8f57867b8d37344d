"""Print the six-family duration table with simulated and closed-form values."""

import argparse
import math

from ramanpass.analysis import table1_report


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nu", type=float, default=1.0)
    parser.add_argument("--threshold", type=float, default=0.9999)
    args = parser.parse_args()

    rows = table1_report(args.nu, args.threshold)
    print(f"{'':3}{'stokes':<26}{'reported':>10}{'closed form':>13}{'simulated':>13}{'dev/pi':>10}")
    for r in rows:
        print(f"{r['family']:<3}{r['stokes']:<26}{r['reported_nu_t_fc']:>10.4f}"
              f"{r['closed_form_nu_t_fc']:>13.6f}{r['simulated_nu_t_fc']:>13.6f}"
              f"{r['deviation'] / math.pi:>10.5f}")


if __name__ == "__main__":
    main()
