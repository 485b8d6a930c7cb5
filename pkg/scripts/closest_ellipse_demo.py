"""Closest-ellipse iteration on an exact ellipse and on a non-elliptic curve.

    python3 scripts/closest_ellipse_demo.py --size 0.05 --amp 0.01 --k 7
"""
import argparse
import sys

from billiard_lab.analysis import ellipse_families
from billiard_lab.fitting import closest_ellipse, ellipse_at_distance
from billiard_lab.geometry import DeformedCurve, EllipseSpec


def show(title, trace):
    print(f"{title}: {trace.termination}")
    trace.write_csv(sys.stdout)
    print()


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=float, default=0.05, help="C1 norm of the ellipse over the unit circle")
    p.add_argument("--amp", type=float, default=0.01, help="amplitude of the non-elliptic harmonic")
    p.add_argument("--k", type=int, default=7, help="index of the non-elliptic harmonic")
    p.add_argument("--max-iter", type=int, default=10)
    args = p.parse_args()

    unit = EllipseSpec((0.0, 0.0), 1.0, 1.0, 0.0)
    for name, fam in ellipse_families().items():
        omega, delta = ellipse_at_distance(unit, fam, args.size)
        trace = closest_ellipse(DeformedCurve(omega), unit, max_iter=args.max_iter, tol=1e-12)
        show(f"ellipse family {name} (delta={delta:.6f})", trace)
    omega = DeformedCurve.over(unit, {args.k: (args.amp, 0.0)})
    show(f"circle + {args.amp} cos({args.k}t)", closest_ellipse(omega, unit, max_iter=args.max_iter))


if __name__ == "__main__":
    main()
