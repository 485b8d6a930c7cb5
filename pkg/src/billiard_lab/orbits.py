"""q-periodic orbits: the residual system F, its tridiagonal Jacobian, solvers and actions.

For parameters t_{j-1} < t_j < t_{j+1} the orbit equation at j is

    F_j = -omega(gamma(t_{j+1}) - gamma(t_{j-1}), gamma'(t_j))
        = A^3 (1+a_{j+1}) b_j sin(d+/A) + A^3 (1+a_{j-1}) b_j sin(d-/A)
          - A^2 (1+a_{j+1})(1+a_j) cos(d+/A) + A^2 (1+a_j)(1+a_{j-1}) cos(d-/A)

with a = n(t), b = n'(t), d+ = t_{j+1} - t_j and d- = t_j - t_{j-1}.  F_j is
also dW/dt_j for the chain action W = sum H(t_j, t_{j+1}).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from .errors import ConvergenceError
from .geometry import area_form, curve_eval

MAX_ITER = 50


@dataclass(frozen=True, eq=False)
class ChainSystem:
    """Interior points t_1..t_{q-1} of a chain anchored at t0 and t0 + 2 pi A."""

    curve: object
    q: int
    t0: float
    t: np.ndarray

    def __post_init__(self):
        if self.q < 3:
            raise ValueError("q must be >= 3")
        t = np.asarray(self.t, dtype=float).reshape(-1)
        if t.size != self.q - 1:
            raise ValueError(f"expected {self.q - 1} interior parameters, got {t.size}")
        object.__setattr__(self, "t", t)

    @classmethod
    def equidistributed(cls, curve, q, t0=0.0):
        P = curve.period
        return cls(curve, q, t0, t0 + P * np.arange(1, q) / q)

    @property
    def full(self):
        """t_0, t_1, ..., t_q with t_q = t_0 + 2 pi A."""
        return np.concatenate([[self.t0], self.t, [self.t0 + self.curve.period]])

    def is_ordered(self):
        return bool(np.all(np.diff(self.full) > 0))


def _terms(curve, tm, t, tp):
    """F at the middle points plus its total derivatives in (tm, t, tp).

    Returns F, dF/dtm, dF/dt, dF/dtp.  The partials with a, b held fixed are
    the closed-form ones; the chain rule through a = n(t), b = n'(t) is added
    on top so the result is the derivative of F as a function of t alone.
    """
    A = curve.A
    n = curve.deformation
    am, a, ap = 1.0 + n(tm), 1.0 + n(t), 1.0 + n(tp)
    b = n(t, 1)
    sp, cp = np.sin((tp - t) / A), np.cos((tp - t) / A)
    sm, cm = np.sin((t - tm) / A), np.cos((t - tm) / A)
    A2, A3 = A * A, A**3
    F = A3 * ap * b * sp + A3 * am * b * sm - A2 * ap * a * cp + A2 * a * am * cm
    # partials in t with (a, b) fixed
    Ft_m = -A2 * b * am * cm + A * am * a * sm
    Ft_p = A2 * b * ap * cp + A * a * ap * sp
    Ft = -A2 * b * ap * cp - A * a * ap * sp + A2 * b * am * cm - A * am * a * sm
    # partials in a and b
    Fa_m = A3 * b * sm + A2 * a * cm
    Fa_p = A3 * b * sp - A2 * a * cp
    Fa = -A2 * ap * cp + A2 * am * cm
    Fb = A3 * ap * sp + A3 * am * sm
    dm = Ft_m + Fa_m * n(tm, 1)
    dp = Ft_p + Fa_p * n(tp, 1)
    d0 = Ft + Fa * n(t, 1) + Fb * n(t, 2)
    return F, dm, d0, dp


def chain_residual(sys):
    """F_1..F_{q-1} for the chain with fixed endpoints t0 and t0 + 2 pi A."""
    full = sys.full
    return _terms(sys.curve, full[:-2], full[1:-1], full[2:])[0]


def chain_jacobian(sys, partial=False):
    """Closed-form (q-1)x(q-1) tridiagonal Jacobian of chain_residual.

    With ``partial=True`` only the derivative in t at fixed (a, b) is returned,
    which at n = 0 and equidistributed t equals A sin(2 pi/q) tridiag(1, -2, 1).
    The default includes the dependence of a, b on t (the true derivative).
    """
    full = sys.full
    tm, t, tp = full[:-2], full[1:-1], full[2:]
    if partial:
        c = sys.curve
        A, n = c.A, c.deformation
        am, a, ap, b = 1 + n(tm), 1 + n(t), 1 + n(tp), n(t, 1)
        sp, cp = np.sin((tp - t) / A), np.cos((tp - t) / A)
        sm, cm = np.sin((t - tm) / A), np.cos((t - tm) / A)
        dm = -A**2 * b * am * cm + A * am * a * sm
        dp = A**2 * b * ap * cp + A * a * ap * sp
        d0 = -A**2 * b * ap * cp - A * a * ap * sp + A**2 * b * am * cm - A * am * a * sm
    else:
        _, dm, d0, dp = _terms(sys.curve, tm, t, tp)
    m = sys.q - 1
    J = np.diag(d0)
    if m > 1:
        J += np.diag(dm[1:], -1) + np.diag(dp[:-1], 1)
    return J


def geometric_residual(curve, t_prev, t, t_next):
    """-omega(gamma(t_next) - gamma(t_prev), gamma'(t)): the orbit law evaluated directly."""
    chord = curve_eval(curve, t_next, 0) - curve_eval(curve, t_prev, 0)
    return -area_form(chord, curve_eval(curve, t, 1))


def closing_residual(curve, full):
    """Orbit equation at the anchor, -omega(gamma(t_1) - gamma(t_{q-1}), gamma'(t_0))."""
    return float(geometric_residual(curve, full[-2], full[0], full[1]))


def solve_chain(curve, q, t0, tol=1e-11, max_iter=MAX_ITER):
    """Solve F = 0 for t_1..t_{q-1} with t_0 fixed, starting from equidistribution.

    Returns (t, closing_residual) where t holds the q - 1 interior parameters.
    """
    sys = ChainSystem.equidistributed(curve, q, t0)
    cap = 0.25 * curve.period / q
    atol = tol * curve.scale
    t = sys.t
    for it in range(max_iter + 1):
        F = chain_residual(sys)
        if np.max(np.abs(F)) <= atol:
            return t, closing_residual(curve, sys.full)
        if it == max_iter:
            break
        _, dm, d0, dp = _terms(curve, sys.full[:-2], sys.full[1:-1], sys.full[2:])
        ab = np.zeros((3, q - 1))
        ab[0, 1:] = dp[:-1]
        ab[1] = d0
        ab[2, :-1] = dm[1:]
        try:
            step = solve_banded((1, 1), ab, -F)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular chain Jacobian at iteration {it}", it) from exc
        big = np.max(np.abs(step))
        if big > cap:
            step *= cap / big
        for _ in range(30):
            trial = ChainSystem(curve, q, t0, t + step)
            if trial.is_ordered():
                break
            step *= 0.5
        else:
            raise ConvergenceError(f"chain left the ordered region at iteration {it}", it)
        sys, t = trial, trial.t
    raise ConvergenceError(
        f"chain Newton did not converge in {max_iter} iterations (|F|={np.max(np.abs(F)):.3e})",
        max_iter,
    )


def chain_action(curve, full):
    """Sum of H(t_j, t_{j+1}) along t_0..t_q."""
    x = curve.relative(full)
    return float(np.sum(area_form(x[:-1], x[1:])))


# ---------------------------------------------------------------- full orbits


@dataclass(frozen=True, eq=False)
class PeriodicOrbit:
    q: int
    params: np.ndarray
    action: float
    max_residual: float
    closing_residual: float
    residuals: np.ndarray = None
    iterations: int = 0

    @property
    def anchor(self):
        return float(np.min(self.params))

    def points(self, curve):
        return curve_eval(curve, self.params, 0)

    def rows(self):
        for j, (tj, rj) in enumerate(zip(self.params, self.residuals)):
            yield self.q, j, float(tj), float(rj)

    def write_csv(self, fh, header=True):
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(["q", "j", "t_j", "residual_j"])
        for q, j, tj, rj in self.rows():
            w.writerow([q, j, f"{tj:.17g}", f"{rj:.17g}"])

    def summary(self):
        return {
            "q": self.q,
            "action": self.action,
            "max_residual": self.max_residual,
            "closing_residual": self.closing_residual,
            "iterations": self.iterations,
        }

    def summary_json(self):
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _cyclic_terms(curve, params):
    params = np.asarray(params, dtype=float)
    P = curve.period
    tm = np.concatenate([[params[-1] - P], params[:-1]])
    tp = np.concatenate([params[1:], [params[0] + P]])
    return _terms(curve, tm, params, tp)


def cyclic_residual(curve, params):
    """All q orbit equations for a closed configuration t_0 < ... < t_{q-1}."""
    return _cyclic_terms(curve, params)[0]


def cyclic_jacobian(curve, params):
    """Closed-form q x q Jacobian of cyclic_residual (tridiagonal plus corners)."""
    q = len(params)
    _, dm, d0, dp = _cyclic_terms(curve, params)
    J = np.diag(d0)
    for j in range(q):
        J[j, (j - 1) % q] += dm[j]
        J[j, (j + 1) % q] += dp[j]
    return J


def _levenberg_marquardt(curve, params, atol, max_iter=MAX_ITER, lam=1e-10):
    """Damped least-squares on the cyclic system; the one-dimensional family mode is damped."""
    q = len(params)
    cap = 0.25 * curve.period / q
    F = cyclic_residual(curve, params)
    cost = float(F @ F)
    for it in range(max_iter):
        if np.max(np.abs(F)) <= atol:
            return params, F, it
        J = cyclic_jacobian(curve, params)
        g = J.T @ F
        H = J.T @ J
        accepted = False
        for _ in range(20):
            step = np.linalg.solve(H + lam * np.diag(np.maximum(np.diag(H), 1e-300)), -g)
            big = np.max(np.abs(step))
            if big > cap:
                step *= cap / big
            trial = params + step
            ordered = np.all(np.diff(trial) > 0) and trial[-1] - trial[0] < curve.period
            if ordered:
                Ft = cyclic_residual(curve, trial)
                ct = float(Ft @ Ft)
                if ct < cost:
                    params, F, cost = trial, Ft, ct
                    lam = max(lam / 10.0, 1e-15)
                    accepted = True
                    break
            lam *= 10.0
        if not accepted:
            break
    if np.max(np.abs(F)) <= atol:
        return params, F, max_iter
    raise ConvergenceError(
        f"periodic orbit solve stalled (max residual {np.max(np.abs(F)):.3e})", max_iter
    )


def _closing(curve, q, t0):
    t, c = solve_chain(curve, q, t0)
    return c


def find_periodic_orbit(curve, q, seed_t0=0.0, tol=1e-10, scan=16):
    """A q-periodic orbit of rotation number 1/q near the equidistributed seed.

    The closing residual of the anchored chain is dW/dt0 for the chain action
    W, so orbits are its zeros.  A window of length about 2 pi A / q around the
    seed is scanned and the maximizing zero (sign change + to -) is located by
    Brent's method; the full cyclic system is then polished by damped
    least squares.  On integrable curves every anchor closes and the seed is
    used directly.
    """
    if q < 3:
        raise ValueError("q must be >= 3")
    P = curve.period
    atol = tol * curve.scale
    width = 0.6 * P / q
    grid = seed_t0 + np.linspace(-width, width, scan + 1)
    vals = np.array([_closing(curve, q, s) for s in grid])
    if np.max(np.abs(vals)) <= atol:
        t0 = seed_t0
    else:
        sign = np.sign(vals)
        changes = [i for i in range(scan) if sign[i] > 0 and sign[i + 1] <= 0]
        if not changes:
            changes = [i for i in range(scan) if sign[i] * sign[i + 1] <= 0]
        if not changes:
            raise ConvergenceError(f"no closing orbit bracketed near t0={seed_t0} for q={q}")
        i = min(changes, key=lambda i: abs(0.5 * (grid[i] + grid[i + 1]) - seed_t0))
        if vals[i + 1] == 0.0:
            t0 = grid[i + 1]
        else:
            t0 = brentq(lambda s: _closing(curve, q, s), grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15)
    t, _ = solve_chain(curve, q, t0)
    params = np.concatenate([[t0], t])
    params, F, iters = _levenberg_marquardt(curve, params, atol)
    # rotate so the anchor is the smallest reduced parameter
    shift = math.floor(np.min(params) / P) * P
    params = params - shift
    k = int(np.argmin(params % P))
    params = np.concatenate([params[k:], params[:k] + P])
    params = params - math.floor(params[0] / P) * P
    F = np.roll(F, -k)
    action = orbit_action(curve, params)
    return PeriodicOrbit(
        q=q,
        params=params,
        action=action,
        max_residual=float(np.max(np.abs(F))),
        closing_residual=float(abs(F[0])),
        residuals=F,
        iterations=iters,
    )


def orbit_action(curve, orbit, origin=None):
    """Cyclic sum of omega(gamma(t_j), gamma(t_{j+1})); ``orbit`` may be a PeriodicOrbit or parameters.

    The origin defaults to the base ellipse center; for closed orbits the value
    does not depend on it.
    """
    params = orbit.params if isinstance(orbit, PeriodicOrbit) else np.asarray(orbit, dtype=float)
    o = curve.base.center_array if origin is None else np.asarray(origin, dtype=float)
    x = curve_eval(curve, params, 0) - o
    return float(np.sum(area_form(x, np.roll(x, -1, axis=0))))


def shoelace_area(points):
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class BaseSpectrum:
    q: int
    A: float
    eigenvalues: tuple
    smallest: float
    stated_smallest: float
    toeplitz_smallest: float
    inverse_norm: float
    inverse_bound_ratio: float


def base_spectrum(q, A=1.0):
    """Eigenvalues of A sin(2 pi/q) tridiag(1, -2, 1) of size q - 1, sorted by |lambda|.

    Also reports the smallest eigenvalue as written in closed form two ways,
    -2 + 2cos(2 pi/q) (the often-quoted form) and the Toeplitz value
    -2 + 2cos(pi/q), and the ratio of the inverse norm to A^-1 q^3.
    """
    m = q - 1
    T = -2.0 * np.eye(m) + np.eye(m, k=1) + np.eye(m, k=-1)
    s = A * math.sin(2 * math.pi / q)
    ev = np.linalg.eigvalsh(s * T)
    ev = ev[np.argsort(np.abs(ev))]
    smallest = float(ev[0])
    inv = 1.0 / abs(smallest)
    return BaseSpectrum(
        q=q,
        A=A,
        eigenvalues=tuple(float(x) for x in ev),
        smallest=smallest,
        stated_smallest=s * (-2 + 2 * math.cos(2 * math.pi / q)),
        toeplitz_smallest=s * (-2 + 2 * math.cos(math.pi / q)),
        inverse_norm=inv,
        inverse_bound_ratio=inv / (q**3 / A),
    )
