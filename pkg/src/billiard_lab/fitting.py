"""Elliptic projection, ellipse fitting, re-expression over nearby ellipses, closest-ellipse iteration."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, GeometryError
from .geometry import DENSE_GRID, DeformationFn, DeformedCurve, EllipseSpec, area_form, c1_norm, curve_eval

K_MAX = 64
FIT_SAMPLES = 256


def elliptic_projection(n):
    """Split n into harmonics |k| <= 2 and the L2-orthogonal rest."""
    n_ell = DeformationFn(n.period, n.c0, n.cos[:2], n.sin[:2])
    return n_ell, n.high_part(3)


def reexpress(omega, target, k_max=K_MAX, nodes=None, grid=DENSE_GRID):
    """The deformation n_bar with omega = target + n_bar.

    For each target parameter on a uniform grid, the ray from the target
    center through the target ellipse point is intersected with omega; the
    radial factor minus one is projected onto a Fourier series.
    """
    nodes = nodes or 4 * k_max
    tb = np.arange(nodes) * (target.period / nodes)
    d = target.point(tb)  # ray directions, relative to the target center
    c = target.center_array

    tau = omega.grid(grid)
    X = curve_eval(omega, tau, 0) - c
    if np.any(area_form(X, np.roll(X, -1, axis=0)) <= 0):
        raise GeometryError("target center is outside the domain or the domain is not star-shaped about it")
    h = X[None, :, 0] * d[:, None, 1] - X[None, :, 1] * d[:, None, 0]
    along = X @ d.T  # (grid, nodes)
    h_next = np.roll(h, -1, axis=1)
    # omega(X, d) goes from + to - as the boundary sweeps past the ray; half-open
    # so that a vertex exactly on the ray is counted once
    cross = (h > 0) & (h_next <= 0) & (along.T > 0)
    counts = cross.sum(axis=1)
    if np.any(counts != 1):
        raise GeometryError("a ray meets the boundary more than once (non-star-shaped domain)")
    k = np.argmax(cross, axis=1)
    rows = np.arange(nodes)
    h0, h1 = h[rows, k], h_next[rows, k]
    step = omega.period / grid
    lo = tau[k]
    s = lo + step * h0 / (h0 - h1)
    for _ in range(8):
        g = area_form(curve_eval(omega, s, 0) - c, d)
        dg = area_form(curve_eval(omega, s, 1), d)
        s = np.clip(s - g / dg, lo - step, lo + 2 * step)
    Y = curve_eval(omega, s, 0) - c
    radial = np.sum(Y * d, axis=1) / np.sum(d * d, axis=1)
    return DeformationFn.from_samples(radial - 1.0, target.period, k_max)


def _polar_shape(M):
    w, V = np.linalg.eigh(M @ M.T)
    return V @ np.diag(np.sqrt(w)) @ V.T


def _first_order_seed(E, n_ell):
    """Ellipse matching the |k| <= 2 harmonics of n_ell to first order."""
    c0 = n_ell.c0
    a1, a2 = (list(n_ell.cos) + [0, 0])[:2]
    b1, b2 = (list(n_ell.sin) + [0, 0])[:2]
    S = np.array([[c0 + a2, b2], [b2, c0 - a2]])
    F = E.frame
    center = E.center_array + F @ np.array([a1, b1])
    return center, _polar_shape(F @ (np.eye(2) + S))


def _radial_residual(X, center, P):
    Pinv = np.linalg.inv(P)
    u = (X - center) @ Pinv.T
    rho = np.linalg.norm(u, axis=1)
    return rho - 1.0, u, rho, Pinv


def _residual_jacobian(u, rho, Pinv):
    v = (u @ Pinv.T) / rho[:, None]
    return np.column_stack([
        -v[:, 0],
        -v[:, 1],
        -v[:, 0] * u[:, 0],
        -(v[:, 0] * u[:, 1] + v[:, 1] * u[:, 0]),
        -v[:, 1] * u[:, 1],
    ])


@dataclass(frozen=True, eq=False)
class FitResult:
    fitted: EllipseSpec
    residual_n: DeformationFn
    c1_residual: float
    iterations: int
    constant: float = math.nan


def fit_ellipse(E, n_ell, samples=FIT_SAMPLES, max_iter=50, k_max=K_MAX):
    """Ellipse closest (mean squared radial residual) to the curve E + n_ell.

    Gauss-Newton over (center, symmetric shape matrix), seeded with the
    first-order harmonic correspondence: mean -> scaling, first harmonic ->
    translation, second harmonic -> axes and tilt.
    """
    if n_ell.k_max > 2 and np.any(n_ell.cos[2:] != 0) | np.any(n_ell.sin[2:] != 0):
        raise ValueError("fit_ellipse expects harmonics |k| <= 2 only")
    curve = DeformedCurve(E, n_ell)
    X = curve(curve.grid(samples))
    center, P = _first_order_seed(E, n_ell)
    x = np.array([center[0], center[1], P[0, 0], P[0, 1], P[1, 1]])
    unpack = lambda x: (x[:2], np.array([[x[2], x[3]], [x[3], x[4]]]))
    r, u, rho, Pinv = _radial_residual(X, *unpack(x))
    iterations = 0
    for it in range(max_iter):
        J = _residual_jacobian(u, rho, Pinv)
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        x = x + step
        r, u, rho, Pinv = _radial_residual(X, *unpack(x))
        iterations = it + 1
        if np.max(np.abs(step)) <= 1e-14 * (1.0 + np.max(np.abs(x))):
            break
    else:
        if np.max(np.abs(step)) > 1e-10:
            raise ConvergenceError(f"ellipse fit did not converge in {max_iter} iterations", max_iter)
    center, P = unpack(x)
    fitted = EllipseSpec.from_shape(center, P, reference_tilt=E.tilt)
    n_bar_e = reexpress(DeformedCurve(fitted), E, k_max=k_max)
    res = c1_norm(n_ell - n_bar_e)
    size = c1_norm(n_ell)
    A = E.A
    const = res / (max(A**2, 1 / A) * size**2) if size > 0 else math.nan
    return FitResult(fitted, n_bar_e, res, iterations, const)


@dataclass(frozen=True, eq=False)
class StepResult:
    ellipse: EllipseSpec
    n_bar: DeformationFn
    norm_before: float
    norm_after: float
    comparability: float
    fit: FitResult


def deformation_over(omega, E, k_max=K_MAX):
    """Deformation of omega over E, reusing omega's own when E is its base."""
    if omega.base.to_dict() == E.to_dict():
        return omega.deformation
    return reexpress(omega, E, k_max=k_max)


def _step(omega, E, n, k_max=K_MAX):
    n_ell, _ = elliptic_projection(n)
    fit = fit_ellipse(E, n_ell, k_max=k_max)
    n_bar = reexpress(omega, fit.fitted, k_max=k_max)
    before, after = c1_norm(n), c1_norm(n_bar)
    gap = c1_norm(n - fit.residual_n)
    ratio = after / gap if gap > 0 else math.nan
    return StepResult(fit.fitted, n_bar, before, after, ratio, fit)


def better_ellipse_step(omega, E, k_max=K_MAX):
    """One projection -> fit -> re-expression round; returns the new ellipse, n_bar and norms."""
    return _step(omega, E, deformation_over(omega, E, k_max), k_max)


@dataclass
class IterationTrace:
    records: list = field(default_factory=list)
    termination: str = ""

    @property
    def final(self):
        return min(self.records, key=lambda r: r["c1_norm"])

    @property
    def norms(self):
        return [r["c1_norm"] for r in self.records]

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "a", "b", "tilt", "center_x", "center_y", "c1_norm", "d_delta"])
        for r in self.records:
            E = r["ellipse"]
            w.writerow([r["step"]] + [
                f"{v:.17g}" for v in (E.a, E.b, E.tilt, E.center[0], E.center[1], r["c1_norm"], r["d_delta"])
            ])


def closest_ellipse(omega, E0, max_iter=25, tol=1e-10, min_improvement=0.01, k_max=K_MAX):
    """Iterate better_ellipse_step from E0 until the deformation is below ``tol`` or stalls.

    Termination reasons: "converged", "no improvement", "diverged" (two
    increases in a row), "max_iter".
    """
    from .analysis import symmetric_difference

    E, n = E0, deformation_over(omega, E0, k_max)
    trace = IterationTrace()
    norm = c1_norm(n)
    trace.records.append({"step": 0, "ellipse": E, "c1_norm": norm, "d_delta": symmetric_difference(E, n)})
    if norm <= tol:
        trace.termination = "converged"
        return trace
    increases = 0
    for step in range(1, max_iter + 1):
        res = _step(omega, E, n, k_max)
        E, n, new = res.ellipse, res.n_bar, res.norm_after
        trace.records.append({
            "step": step, "ellipse": E, "c1_norm": new, "d_delta": symmetric_difference(E, n),
        })
        ratio = new / norm
        norm = new
        if new <= tol:
            trace.termination = "converged"
            return trace
        if ratio > 1.0 + min_improvement:
            increases += 1
            if increases >= 2:
                trace.termination = "diverged"
                return trace
            continue
        increases = 0
        if ratio > 1.0 - min_improvement:
            trace.termination = "no improvement"
            return trace
    trace.termination = "max_iter"
    return trace


def ellipse_at_distance(E, family, target, k_max=K_MAX, hi=0.5):
    """Member of an ellipse family whose deformation over E has C1 norm ``target``.

    ``family`` maps delta >= 0 to an ellipse with family(0) = E; the norm is
    assumed increasing on [0, hi].
    """
    from scipy.optimize import brentq

    g = lambda d: c1_norm(reexpress(DeformedCurve(family(d)), E, k_max=k_max)) - target
    d = brentq(g, 1e-12, hi, xtol=1e-14)
    return family(d), d
