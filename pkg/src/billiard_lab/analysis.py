"""Quantitative harnesses: Fourier spectra, action deviation, equidistribution,
sine-sum cancellation, smooth decay, integrability witnesses, symmetric
difference, and log-log scaling fits.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import BilliardError, GeometryError
from .geometry import DENSE_GRID, DeformationFn, DeformedCurve, EllipseSpec, c1_norm
from .orbits import chain_action, find_periodic_orbit, solve_chain

VALUE_FLOOR = 1e-14


# ------------------------------------------------------------------ spectra


@dataclass(frozen=True, eq=False)
class FourierSpectrum:
    """a_k = (1/2 pi A) int n(t) exp(-i k t/A) dt for |k| <= k_max."""

    period: float
    coefficients: np.ndarray  # index k + k_max

    @property
    def k_max(self):
        return (self.coefficients.size - 1) // 2

    def __getitem__(self, k):
        if abs(k) > self.k_max:
            return 0j
        return complex(self.coefficients[k + self.k_max])

    def parseval(self):
        return float(np.sum(np.abs(self.coefficients) ** 2))

    def max_abs(self, k_lo, k_hi):
        """max |a_k| over k_lo <= |k| <= k_hi."""
        return max(abs(self[k]) for k in range(k_lo, k_hi + 1))


def fourier_coefficients(n, k_max, period=None, nodes=None):
    """Spectrum of a DeformationFn (exact) or a periodic callable (trapezoid quadrature)."""
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    if isinstance(n, DeformationFn):
        z = np.zeros(2 * k_max + 1, dtype=complex)
        z[k_max] = n.c0
        m = min(k_max, n.k_max)
        pos = 0.5 * (n.cos[:m] - 1j * n.sin[:m])
        z[k_max + 1 : k_max + 1 + m] = pos
        z[k_max - m : k_max][::-1] = np.conj(pos)
        return FourierSpectrum(n.period, z)
    if period is None:
        raise ValueError("period is required for callables")
    nodes = nodes or max(8 * k_max, DENSE_GRID)
    t = np.arange(nodes) * (period / nodes)
    c = np.fft.fft(np.asarray(n(t), dtype=complex)) / nodes
    z = np.concatenate([c[-k_max:], c[: k_max + 1]])
    return FourierSpectrum(period, z)


# ------------------------------------------------------------ orbit diagnostics


def _params(orbit):
    return np.asarray(getattr(orbit, "params", orbit), dtype=float)


def equidistribution_deviation(curve, orbit):
    """max_j |t_j - (t_0 + 2 pi A j / q)| for an orbit or a chain t_0..t_{q-1}."""
    t = _params(orbit)
    ideal = t[0] + curve.period * np.arange(t.size) / t.size
    return float(np.max(np.abs(t - ideal)))


def sine_sum_deviation(curve, q, orbit):
    """|sum_j sin((t_{j+1} - t_j)/A) - q sin(2 pi / q)| with t_q = t_0 + 2 pi A."""
    t = _params(orbit)
    t = np.concatenate([t, [t[0] + curve.period]])
    return float(abs(np.sum(np.sin(np.diff(t) / curve.A)) - q * math.sin(2 * math.pi / q)))


def _action_gap(curve, orbit, n0_eps):
    A, q = curve.A, orbit.q
    s = math.sin(2 * math.pi / q)
    ideal = orbit.params[0] + curve.period * np.arange(q) / q
    linear = 2 * A**3 * s * float(np.sum(n0_eps(ideal)))
    return abs(orbit.action - A**3 * q * s - linear)


def perturbed(E, n0, eps):
    """The curve E + eps * n0 (n0 is read as a function of the angle t/A)."""
    return DeformedCurve(E, eps * n0.with_period(E.period))


CHAIN_ANCHOR = 0.37  # anchor angle t0/A for chain diagnostics, away from symmetry axes


def chain_diagnostics(curve, q, t0):
    """Equidistribution and sine-sum deviation of the chain anchored at t0."""
    t, closing = solve_chain(curve, q, t0)
    chain = np.concatenate([[t0], t])
    return equidistribution_deviation(curve, chain), sine_sum_deviation(curve, q, chain), closing


def orbit_diagnostics(E, n0, eps, q, seed_t0=0.0, anchor=CHAIN_ANCHOR):
    """Deviation quantities for E + eps n0.

    The action deviation is measured on a genuine q-periodic orbit; the
    equidistribution and sine-sum deviations on the chain anchored at
    ``anchor * A`` (symmetric curves can have exactly equidistributed orbits,
    where those quantities vanish identically).  Orbit-based versions of both
    are included under ``orbit_*`` keys.
    """
    curve = perturbed(E, n0, eps)
    orbit = find_periodic_orbit(curve, q, seed_t0)
    eq, ss, closing = chain_diagnostics(curve, q, anchor * E.A)
    return {
        "epsilon": eps,
        "q": q,
        "action": orbit.action,
        "action_deviation": _action_gap(curve, orbit, curve.deformation),
        "equidistribution": eq,
        "sine_sum": ss,
        "chain_closing": closing,
        "orbit_equidistribution": equidistribution_deviation(curve, orbit),
        "orbit_sine_sum": sine_sum_deviation(curve, q, orbit),
        "max_residual": orbit.max_residual,
    }


def action_deviation(E, n0, eps, q, seed_t0=0.0):
    """|A_q - A^3 q sin(2pi/q) - 2 A^3 sin(2pi/q) sum_j eps n0(t_0 + 2 pi A j/q)| for E + eps n0."""
    return orbit_diagnostics(E, n0, eps, q, seed_t0)["action_deviation"]


# -------------------------------------------------------------- smooth decay


@dataclass
class DecayReport:
    q: list
    integrals: list
    ratios: list
    constant: float
    c1: float
    A: float


def smooth_decay_check(n, q_range, period=None, k_max=None):
    """Check |int n e^{iqt/A} dt| <= C A^2 ||n||_C1 / |q| and report C = max ratio."""
    q_range = list(q_range)
    if not isinstance(n, DeformationFn):
        k_max = k_max or max(4 * max(q_range), 256)
        n = DeformationFn.from_function(n, period, k_max)
    P = n.period
    A = P / (2 * math.pi)
    c1 = c1_norm(n)
    if c1 == 0:
        raise ValueError("n must be nonzero")
    coef = fourier_coefficients(n, max(max(q_range), 2))
    # int n e^{iqt/A} dt = 2 pi A conj(a_q) for real n
    integrals = [P * abs(coef[q]) for q in q_range]
    ratios = [I * abs(q) / (A**2 * c1) for I, q in zip(integrals, q_range)]
    return DecayReport(q_range, integrals, ratios, max(ratios), c1, A)


# ------------------------------------------------------------ symmetric diff


def symmetric_difference(E, n, nodes=DENSE_GRID):
    """Area of E symmetric-difference (E + n): A^2 int |n| (1 + n/2) dt."""
    t = np.arange(nodes) * (E.period / nodes)
    v = n(t)
    if np.any(1.0 + v <= 0):
        raise GeometryError("1 + n must stay positive")
    return float(E.A**2 * np.sum(np.abs(v) * (1.0 + 0.5 * v)) * (E.period / nodes))


def symmetric_difference_bound(E, n):
    c1 = c1_norm(n)
    return 2 * math.pi * E.A**3 * c1 * (1 + c1)


# ------------------------------------------------------------ witness


@dataclass
class WitnessReport:
    q: int
    grid_size: int
    tol: float
    max_closing: float
    action_spread: float
    failures: int
    passed: bool


def integrability_witness(curve, q, grid_size=64, tol=1e-9):
    """Sweep the chain anchor over a grid; PASS iff every chain closes to tol * A^2."""
    if q < 3:
        raise ValueError("q must be >= 3")
    P = curve.period
    closing, actions, failures = [], [], 0
    for t0 in np.arange(grid_size) * (P / grid_size):
        try:
            t, c = solve_chain(curve, q, t0)
        except BilliardError:
            failures += 1
            continue
        closing.append(abs(c))
        actions.append(chain_action(curve, np.concatenate([[t0], t, [t0 + P]])))
    max_closing = max(closing) if closing else math.inf
    spread = (max(actions) - min(actions)) if actions else math.inf
    passed = failures == 0 and max_closing <= tol * curve.scale
    return WitnessReport(q, grid_size, tol, max_closing, spread, failures, passed)


# ------------------------------------------------------------ scaling fits


@dataclass
class ScalingReport:
    name: str
    epsilon: list
    values: list
    slope: float
    intercept: float
    residual: float
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def write_csv(self, fh, header=True):
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(["epsilon", "quantity", "value", "slope", "fit_residual"])
        for e, v in zip(self.epsilon, self.values):
            w.writerow([f"{e:.17g}", self.name, f"{v:.17g}", "", ""])
        w.writerow(["", self.name, "", f"{self.slope:.17g}", f"{self.residual:.17g}"])


def fit_loglog(epsilon, values, name="quantity", meta=None):
    """Least-squares line through (log eps, log value); values <= 1e-14 are dropped."""
    order = np.argsort(epsilon)[::-1]
    eps = np.asarray(epsilon, dtype=float)[order]
    vals = np.asarray(values, dtype=float)[order]
    if np.any(np.diff(eps) >= 0):
        raise ValueError("epsilon grid must have distinct values")
    keep = vals > VALUE_FLOOR
    if not np.all(keep):
        warnings.warn(f"{name}: {int(np.sum(~keep))} values <= {VALUE_FLOOR} excluded from the fit")
    if np.sum(keep) < 3:
        raise ValueError(f"{name}: fewer than 3 usable points")
    x, y = np.log(eps[keep]), np.log(vals[keep])
    (slope, intercept), res, *_ = np.polyfit(x, y, 1, full=True)
    residual = math.sqrt(float(res[0]) / x.size) if res.size else 0.0
    return ScalingReport(name, eps.tolist(), vals.tolist(), float(slope), float(intercept), residual, meta or {})


def scaling_study(quantity, eps_grid, name="quantity"):
    """Evaluate quantity(eps) over the grid and fit the log-log slope."""
    eps = sorted(eps_grid, reverse=True)
    if len(eps) < 3:
        raise ValueError("need at least 3 grid points")
    return fit_loglog(eps, [quantity(e) for e in eps], name)


# ------------------------------------------------------------ studies


def _diag_cell(args):
    E, n0, eps, q = args
    return orbit_diagnostics(E, n0, eps, q)


def _pool_map(fn, cells, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, cells))
    return [fn(c) for c in cells]


DEFAULT_EPS = (1e-2, 3e-3, 1e-3, 3e-4)
DEFAULT_QS = (3, 4, 5, 7)


def default_shapes(period):
    """cos(3t/A) and cos(3t/A) + 0.5 sin(5t/A)."""
    return {
        "cos3": DeformationFn.from_harmonics(period, {3: (1.0, 0.0)}),
        "cos3+0.5sin5": DeformationFn.from_harmonics(period, {3: (1.0, 0.0), 5: (0.0, 0.5)}),
    }


def orbit_law_study(E, shapes=None, qs=DEFAULT_QS, eps_grid=DEFAULT_EPS, workers=1):
    """Scaling reports of action deviation, equidistribution and sine-sum for every (shape, q).

    Returns {quantity: [ScalingReport, ...]} in deterministic (shape, q) order.
    """
    shapes = shapes or default_shapes(E.period)
    eps_grid = sorted(eps_grid, reverse=True)
    cells = [(E, n0, eps, q) for name, n0 in shapes.items() for q in qs for eps in eps_grid]
    out = _pool_map(_diag_cell, cells, workers)
    reports = {"action_deviation": [], "equidistribution": [], "sine_sum": []}
    i = 0
    for name in shapes:
        for q in qs:
            rows = out[i : i + len(eps_grid)]
            i += len(eps_grid)
            for key in reports:
                reports[key].append(
                    fit_loglog(eps_grid, [r[key] for r in rows], key, {"shape": name, "q": q})
                )
    return reports


def ellipse_families():
    """Ellipses near the unit circle, indexed by delta (the only known integrable family)."""
    return {
        "stretch": lambda d: EllipseSpec((0.0, 0.0), 1 + d, 1 / (1 + d), 0.0),
        "stretch-tilt-shift": lambda d: EllipseSpec((0.5 * d, -0.3 * d), 1 + d, 1.0, 0.4),
    }


@dataclass
class SuppressionReport:
    family: str
    norm_fit: ScalingReport
    high_fit: ScalingReport


def fourier_suppression_study(E, family, deltas, k_range=(3, 8), name="family", k_max=64):
    """For integrable (elliptic) Omega_delta = E + n_delta: slopes of ||n_delta||_C1 and of max high |a_k|."""
    from .fitting import reexpress

    norms, highs = [], []
    for d in deltas:
        n = reexpress(DeformedCurve(family(d)), E, k_max=k_max)
        norms.append(c1_norm(n))
        highs.append(fourier_coefficients(n, k_range[1]).max_abs(*k_range))
    return SuppressionReport(
        name,
        fit_loglog(deltas, norms, "c1_norm", {"family": name}),
        fit_loglog(deltas, highs, "high_harmonics", {"family": name, "k_range": list(k_range)}),
    )


def reports_json(reports):
    return json.dumps(reports, indent=2, sort_keys=True, default=lambda o: o.to_dict() if hasattr(o, "to_dict") else asdict(o))
