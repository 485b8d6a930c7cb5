"""Scaling of action deviation, equidistribution and sine-sum deviation in eps.

    python3 scripts/orbit_law_scaling.py --a 2 --b 1 --out results/orbit_law
"""
import argparse
from pathlib import Path

from billiard_lab.analysis import DEFAULT_EPS, DEFAULT_QS, default_shapes, orbit_law_study, reports_json
from billiard_lab.geometry import EllipseSpec


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--tilt", type=float, default=0.0)
    p.add_argument("--qs", type=int, nargs="+", default=list(DEFAULT_QS))
    p.add_argument("--eps", type=float, nargs="+", default=list(DEFAULT_EPS))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="results/orbit_law")
    args = p.parse_args()

    E = EllipseSpec((0.0, 0.0), args.a, args.b, args.tilt)
    reports = orbit_law_study(E, default_shapes(E.period), args.qs, args.eps, args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "reports.json").write_text(reports_json(reports) + "\n")
    for key, reps in reports.items():
        with open(out / f"{key}.csv", "w") as fh:
            for i, r in enumerate(reps):
                r.write_csv(fh, header=i == 0)
        for r in reps:
            print(f"{key:18s} {r.meta['shape']:14s} q={r.meta['q']:<3d} slope={r.slope:.4f}")


if __name__ == "__main__":
    main()
