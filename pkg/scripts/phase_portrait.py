"""Phase portrait CSV for a circle with one added harmonic (plot t against t_next - t).

    python3 scripts/phase_portrait.py --k 3 --amp 0.02 --out results/portrait.csv
"""
import argparse

from billiard_lab.cli import StudyConfig, cmd_phase_portrait


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--amp", type=float, default=0.02)
    p.add_argument("--points", type=int, default=40)
    p.add_argument("--steps", type=int, default=400)
    p.add_argument("--out", default="results/portrait")
    args = p.parse_args()

    cos = [0.0] * args.k
    cos[-1] = args.amp
    curve = {"ellipse": {"center": [0, 0], "a": args.a, "b": args.b, "tilt": 0.0}, "deformation": {"cos": cos}}
    cfg = StudyConfig(command="phase-portrait", curve=curve, n_points=args.points, n_steps=args.steps, out=args.out)
    _, summary = cmd_phase_portrait(cfg.validate())
    print(f"{summary['rows']} rows -> {summary['csv']}")


if __name__ == "__main__":
    main()
