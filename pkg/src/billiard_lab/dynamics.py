"""The symplectic billiard map as a negative twist map of the phase cylinder.

A phase point is a pair of boundary parameters (t, t_next) with positively
oriented tangents.  Three consecutive points satisfy: the chord from the
first to the third is positively parallel to the tangent at the second.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketError, DomainError
from .geometry import area_form, curve_eval

DOMAIN_EPS = 1e-14
BRACKET_SAMPLES = 256


def generating_function(curve, t, t_next):
    """H(t, t') = omega(gamma(t), gamma(t')) about the base ellipse center."""
    return area_form(curve.relative(t), curve.relative(t_next))


def twist_density(curve, t, t_next):
    """Mixed partial of H: omega(gamma'(t), gamma'(t'))."""
    return area_form(curve_eval(curve, t, 1), curve_eval(curve, t_next, 1))


def _refine_root(g, dg, lo, hi, glo, width=1e-8, newton_steps=10, atol=0.0):
    """Bisection on [lo, hi] (g changes sign) to ``width``, then safeguarded Newton."""
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0.0:
            return mid
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(newton_steps):
        gx = g(x)
        if abs(gx) <= atol:
            break
        d = dg(x)
        if d == 0.0:
            break
        x_new = x - gx / d
        if not lo - width <= x_new <= hi + width:
            break
        if x_new == x:
            break
        x = x_new
    return x


def _first_sign_change(g, lo, hi, m=BRACKET_SAMPLES, want=None, closed=False):
    """Sample g on (lo, hi), or [lo, hi] if ``closed``, and return the first bracket.

    ``want`` = +1 keeps only - to + changes, -1 only + to -.
    """
    s = np.linspace(lo, hi, m + 2)
    if not closed:
        s = s[1:-1]
    vals = g(s)
    sign = np.sign(vals)
    idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    if want is not None:
        idx = [i for i in idx if np.sign(vals[i + 1]) == want]
    if len(idx) == 0:
        return None
    i = idx[0]
    return s[i], s[i + 1], vals[i]


def parallel_partner(curve, t):
    """The t* != t whose tangent is antiparallel to the tangent at t."""
    P = curve.period
    d0 = curve_eval(curve, t, 1)

    def g(s):
        return area_form(d0, curve_eval(curve, s, 1))

    def dg(s):
        return area_form(d0, curve_eval(curve, s, 2))

    br = _first_sign_change(g, t, t + P, want=-1)
    if br is None:
        raise BracketError(f"no parallel partner found for t={t}; curve may be non-convex")
    lo, hi, glo = br
    scale = float(np.dot(d0, d0))
    ts = _refine_root(g, dg, lo, hi, glo, atol=1e-15 * scale)
    if float(np.dot(curve_eval(curve, ts, 1), d0)) >= 0:
        raise BracketError("partner tangent is not opposite; curve may be non-convex")
    return float(ts % P)


@dataclass(frozen=True)
class PhasePoint:
    t: float
    t_next: float

    def reduced(self, period):
        """Representative with t in [0, P) and t_next in (t, t + P)."""
        t = self.t % period
        dt = (self.t_next - self.t) % period
        return PhasePoint(t, t + dt)


def check_domain(curve, p):
    w = twist_density(curve, p.t, p.t_next)
    if not w > DOMAIN_EPS:
        raise DomainError(f"phase point {p} has twist density {w:.3e} <= {DOMAIN_EPS}")
    return w


def billiard_step(curve, p):
    """Image (t_next, t'') of a phase point under the symplectic billiard map."""
    P = curve.period
    p = p.reduced(P)
    check_domain(curve, p)
    t, t1 = p.t, p.t_next
    x0 = curve_eval(curve, t, 0)
    d1 = curve_eval(curve, t1, 1)

    def g(s):
        return area_form(curve_eval(curve, s, 0) - x0, d1)

    def dg(s):
        return area_form(curve_eval(curve, s, 1), d1)

    # g(t1) > 0 on the domain and g < 0 just before t + P; exclude a neighbourhood of t.
    hi = t + P - 1e-9 * P
    br = _first_sign_change(g, t1, hi, want=-1, closed=True)
    if br is None:
        raise BracketError(f"no reflection found from {p}; curve may be non-convex")
    lo, hi, glo = br
    scale = curve.A * math.sqrt(float(np.dot(d1, d1)))
    t2 = _refine_root(g, dg, lo, hi, glo, atol=1e-15 * scale)
    chord = curve_eval(curve, t2, 0) - x0
    if float(np.dot(chord, d1)) <= 0:
        raise BracketError("chord is not positively parallel to the tangent")
    return PhasePoint(float(t1), float(t2))


@dataclass
class Trajectory:
    """Phase points p_0..p_N with the unreduced parameter lift t_0 <= t_1 <= ... <= t_{N+1}."""

    period: float
    points: list = field(default_factory=list)
    lift: list = field(default_factory=list)
    twist: list = field(default_factory=list)

    @property
    def steps(self):
        return len(self.points) - 1

    def rows(self):
        """One CSV row per applied step: the phase point before the step."""
        for i in range(self.steps):
            p = self.points[i]
            yield {
                "step": i,
                "t": p.t,
                "t_next": p.t_next,
                "lift": self.lift[i],
                "twist_density": self.twist[i],
            }

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "t", "t_next", "lift", "twist_density"])
        for r in self.rows():
            w.writerow([r["step"]] + [f"{r[k]:.17g}" for k in ("t", "t_next", "lift", "twist_density")])


def iterate_map(curve, p0, n_steps):
    """Apply billiard_step ``n_steps`` times, tracking the lift for rotation numbers."""
    P = curve.period
    p = p0.reduced(P)
    traj = Trajectory(P, [p], [p.t, p.t_next], [check_domain(curve, p)])
    for i in range(n_steps):
        try:
            p = billiard_step(curve, p)
        except (DomainError, BracketError) as exc:
            raise type(exc)(f"step {i}: {exc}") from exc
        traj.points.append(p)
        traj.lift.append(traj.lift[-1] + (p.t_next - p.t))
        traj.twist.append(twist_density(curve, p.t, p.t_next))
        p = p.reduced(P)
        traj.points[-1] = p
    return traj


def rotation_number(traj):
    """(lift_end - lift_start) / (N * period) over the N steps of a trajectory."""
    n = traj.steps
    if n < 1:
        raise ValueError("need at least two phase points")
    return (traj.lift[n] - traj.lift[0]) / (n * traj.period)
