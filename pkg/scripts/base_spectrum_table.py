"""Smallest eigenvalue of the unperturbed chain Jacobian against two closed forms.

    python3 scripts/base_spectrum_table.py --q-max 16
"""
import argparse

from billiard_lab.orbits import base_spectrum


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--q-max", type=int, default=16)
    p.add_argument("--A", type=float, default=1.0)
    args = p.parse_args()
    print(f"{'q':>3} {'computed':>14} {'cos(pi/q)':>14} {'cos(2pi/q)':>14} {'|inv| q^-3 A':>14}")
    for q in range(3, args.q_max + 1):
        s = base_spectrum(q, args.A)
        print(f"{q:>3} {s.smallest:>14.10f} {s.toeplitz_smallest:>14.10f} {s.stated_smallest:>14.10f} {s.inverse_bound_ratio:>14.6f}")


if __name__ == "__main__":
    main()
