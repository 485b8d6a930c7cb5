"""C1 norm and high-harmonic mass of nearby ellipses re-expressed over the unit circle.

    python3 scripts/fourier_suppression.py --deltas 1e-2 3e-3 1e-3 3e-4
"""
import argparse

from billiard_lab.analysis import ellipse_families, fourier_suppression_study
from billiard_lab.geometry import EllipseSpec


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--deltas", type=float, nargs="+", default=[1e-2, 3e-3, 1e-3, 3e-4])
    p.add_argument("--k-lo", type=int, default=3)
    p.add_argument("--k-hi", type=int, default=8)
    args = p.parse_args()

    unit = EllipseSpec((0.0, 0.0), 1.0, 1.0, 0.0)
    for name, fam in ellipse_families().items():
        rep = fourier_suppression_study(unit, fam, args.deltas, (args.k_lo, args.k_hi), name)
        print(f"{name}")
        for d, n, h in zip(rep.norm_fit.epsilon, rep.norm_fit.values, rep.high_fit.values):
            print(f"  delta={d:.1e}  c1={n:.6e}  high={h:.6e}")
        print(f"  slopes: c1 {rep.norm_fit.slope:.4f}, high {rep.high_fit.slope:.4f}")


if __name__ == "__main__":
    main()
