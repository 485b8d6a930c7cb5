"""Ellipses in affine arc-length parametrization and their radial deformations.

A deformed curve is

    gamma(t) = center + (1 + n(t)) * R(tilt) @ (a cos(t/A), b sin(t/A)),

with ``A = (a b)^(1/3)`` the normalized area and ``n`` a real trigonometric
polynomial of period ``2 pi A``.  Everything here is an immutable value.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError

DENSE_GRID = 4096


def area_form(u, v):
    """The standard area form omega(u, v) = u_x v_y - u_y v_x (broadcasts over leading axes)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    out = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    return float(out) if out.ndim == 0 else out


def rotation(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def _readonly(x):
    arr = np.array(x, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EllipseSpec:
    center: tuple = (0.0, 0.0)
    a: float = 1.0
    b: float = 1.0
    tilt: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "tilt", float(self.tilt))
        if not (self.a > 0 and self.b > 0):
            raise GeometryError(f"semi-axes must be positive, got a={self.a}, b={self.b}")
        if not all(map(math.isfinite, (*self.center, self.tilt))):
            raise GeometryError("non-finite ellipse parameters")

    @property
    def A(self):
        return normalized_area(self)

    @property
    def period(self):
        return 2.0 * math.pi * self.A

    @property
    def center_array(self):
        return np.array(self.center)

    @property
    def frame(self):
        """Matrix mapping the unit circle (cos s, sin s) onto the ellipse (minus center)."""
        return rotation(self.tilt) @ np.diag([self.a, self.b])

    @property
    def shape_matrix(self):
        """Symmetric positive matrix P with ellipse = center + P(unit circle)."""
        R = rotation(self.tilt)
        return R @ np.diag([self.a, self.b]) @ R.T

    def point(self, t, order=0):
        """Derivative of order 0, 1 or 2 of e(t) = R diag(a, b) (cos(t/A), sin(t/A)), without center."""
        A = self.A
        s = np.asarray(t, dtype=float) / A
        c, sn = np.cos(s), np.sin(s)
        if order == 0:
            base = np.stack([c, sn], axis=-1)
        elif order == 1:
            base = np.stack([-sn, c], axis=-1) / A
        elif order == 2:
            base = -np.stack([c, sn], axis=-1) / A**2
        else:
            raise ValueError("order must be 0, 1 or 2")
        return base @ self.frame.T

    def same_set(self, other, tol=1e-9):
        """True when both specs describe the same point set (parametrization may differ)."""
        return (
            np.allclose(self.center, other.center, atol=tol, rtol=0)
            and np.allclose(self.shape_matrix, other.shape_matrix, atol=tol, rtol=0)
        )

    def to_dict(self):
        return {"center": list(self.center), "a": self.a, "b": self.b, "tilt": self.tilt}

    @classmethod
    def from_dict(cls, d):
        return cls(center=tuple(d.get("center", (0.0, 0.0))), a=d["a"], b=d["b"], tilt=d.get("tilt", 0.0))

    @classmethod
    def from_shape(cls, center, P, reference_tilt=0.0):
        """Ellipse center + P(unit circle) for symmetric positive definite P.

        Among the equivalent (a, b, tilt) descriptions the one with tilt closest
        to ``reference_tilt`` is returned, which keeps parameter origins stable
        when re-fitting nearby ellipses.
        """
        P = 0.5 * (np.asarray(P, dtype=float) + np.asarray(P, dtype=float).T)
        w, V = np.linalg.eigh(P)
        if w[0] <= 0:
            raise GeometryError("shape matrix is not positive definite")
        theta = math.atan2(V[1, 1], V[0, 1])  # direction of the larger axis
        candidates = []
        for k in range(4):
            tilt = theta + k * math.pi / 2
            a, b = (w[1], w[0]) if k % 2 == 0 else (w[0], w[1])
            candidates.append((a, b, tilt))
        def dist(c):
            d = (c[2] - reference_tilt + math.pi) % (2 * math.pi) - math.pi
            return abs(d)
        a, b, tilt = min(candidates, key=dist)
        tilt = reference_tilt + ((tilt - reference_tilt + math.pi) % (2 * math.pi) - math.pi)
        return cls(center=tuple(center), a=a, b=b, tilt=tilt)


def normalized_area(E):
    """(a b)^(1/3), the cube root of area / pi."""
    return (E.a * E.b) ** (1.0 / 3.0)


@dataclass(frozen=True, eq=False)
class DeformationFn:
    """n(t) = c0 + sum_k cos_k cos(2 pi k t / period) + sin_k sin(2 pi k t / period)."""

    period: float
    c0: float = 0.0
    cos: np.ndarray = field(default_factory=lambda: _readonly([]))
    sin: np.ndarray = field(default_factory=lambda: _readonly([]))

    def __post_init__(self):
        cos, sin = np.asarray(self.cos, dtype=float).reshape(-1), np.asarray(self.sin, dtype=float).reshape(-1)
        k = max(cos.size, sin.size)
        cos = np.concatenate([cos, np.zeros(k - cos.size)])
        sin = np.concatenate([sin, np.zeros(k - sin.size)])
        object.__setattr__(self, "cos", _readonly(cos))
        object.__setattr__(self, "sin", _readonly(sin))
        object.__setattr__(self, "c0", float(self.c0))
        object.__setattr__(self, "period", float(self.period))
        if not self.period > 0:
            raise GeometryError("period must be positive")
        if not (math.isfinite(self.c0) and np.all(np.isfinite(cos)) and np.all(np.isfinite(sin))):
            raise GeometryError("non-finite Fourier coefficients")

    @property
    def k_max(self):
        return self.cos.size

    @property
    def frequency(self):
        return 2.0 * math.pi / self.period

    @classmethod
    def zero(cls, period):
        return cls(period)

    @classmethod
    def from_harmonics(cls, period, harmonics, c0=0.0):
        """Build from a mapping {k: (cos_k, sin_k)}."""
        k_max = max(harmonics, default=0)
        cos, sin = np.zeros(k_max), np.zeros(k_max)
        for k, (ck, sk) in harmonics.items():
            if k < 1:
                raise ValueError("harmonic index must be >= 1; use c0 for the mean")
            cos[k - 1] += ck
            sin[k - 1] += sk
        return cls(period, c0, cos, sin)

    @classmethod
    def from_samples(cls, values, period, k_max):
        """Quadrature (trapezoid/FFT) projection of uniform samples on [0, period)."""
        values = np.asarray(values, dtype=float)
        m = values.size
        if 2 * k_max >= m:
            raise ValueError(f"k_max={k_max} needs more than {2 * k_max} samples, got {m}")
        c = np.fft.rfft(values) / m
        return cls(period, c[0].real, 2.0 * c[1 : k_max + 1].real, -2.0 * c[1 : k_max + 1].imag)

    @classmethod
    def from_function(cls, f, period, k_max, nodes=None):
        nodes = nodes or max(8 * k_max, DENSE_GRID)
        t = np.arange(nodes) * (period / nodes)
        return cls.from_samples(f(t), period, k_max)

    def __call__(self, t, order=0):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.c0 if order == 0 else 0.0)
        if self.k_max == 0:
            return out if out.ndim else float(out)
        k = np.arange(1, self.k_max + 1) * self.frequency
        coef = (self.cos - 1j * self.sin) * (1j * k) ** order
        phase = np.exp(1j * np.multiply.outer(t, k))
        out = out + (phase @ coef).real
        return out if out.ndim else float(out)

    def derivative(self, order=1):
        return lambda t: self(t, order)

    def with_period(self, period):
        """Same coefficients, i.e. the same function of the angle t / A, on another period."""
        return DeformationFn(period, self.c0, self.cos, self.sin)

    def shifted(self, angle):
        """m(t) = n(t + angle * period / (2 pi)): a rotation of the angular variable."""
        k = np.arange(1, self.k_max + 1)
        z = (self.cos - 1j * self.sin) * np.exp(1j * k * angle)
        return DeformationFn(self.period, self.c0, z.real, -z.imag)

    def truncated(self, k_max):
        return DeformationFn(self.period, self.c0, self.cos[:k_max], self.sin[:k_max])

    def high_part(self, k_min):
        """Harmonics k >= k_min only."""
        cos, sin = self.cos.copy(), self.sin.copy()
        cos[: k_min - 1] = 0.0
        sin[: k_min - 1] = 0.0
        return DeformationFn(self.period, 0.0 if k_min > 0 else self.c0, cos, sin)

    def _aligned(self, other):
        if not math.isclose(self.period, other.period, rel_tol=1e-12):
            raise GeometryError("deformations have different periods")
        k = max(self.k_max, other.k_max)
        pad = lambda x: np.concatenate([x, np.zeros(k - x.size)])
        return pad(self.cos), pad(self.sin), pad(other.cos), pad(other.sin)

    def __add__(self, other):
        c1, s1, c2, s2 = self._aligned(other)
        return DeformationFn(self.period, self.c0 + other.c0, c1 + c2, s1 + s2)

    def __sub__(self, other):
        c1, s1, c2, s2 = self._aligned(other)
        return DeformationFn(self.period, self.c0 - other.c0, c1 - c2, s1 - s2)

    def __mul__(self, factor):
        factor = float(factor)
        return DeformationFn(self.period, factor * self.c0, factor * self.cos, factor * self.sin)

    __rmul__ = __mul__

    def l2_squared(self):
        """(1/L) int |n|^2 via Parseval."""
        return self.c0**2 + 0.5 * float(np.sum(self.cos**2 + self.sin**2))

    def to_dict(self):
        return {"c0": self.c0, "cos": self.cos.tolist(), "sin": self.sin.tolist()}

    @classmethod
    def from_dict(cls, d, period):
        return cls(period, d.get("c0", 0.0), d.get("cos", []), d.get("sin", []))


@dataclass(frozen=True, eq=False)
class DeformedCurve:
    base: EllipseSpec
    deformation: DeformationFn = None

    def __post_init__(self):
        if self.deformation is None:
            object.__setattr__(self, "deformation", DeformationFn.zero(self.base.period))
        elif not math.isclose(self.deformation.period, self.base.period, rel_tol=1e-10):
            raise GeometryError(
                f"deformation period {self.deformation.period} != 2 pi A = {self.base.period}"
            )

    @classmethod
    def ellipse(cls, a=1.0, b=1.0, tilt=0.0, center=(0.0, 0.0)):
        return cls(EllipseSpec(center, a, b, tilt))

    @classmethod
    def over(cls, base, harmonics=None, c0=0.0):
        """Curve base + n with n given as {k: (cos_k, sin_k)} in the angle t/A."""
        return cls(base, DeformationFn.from_harmonics(base.period, harmonics or {}, c0))

    @property
    def A(self):
        return self.base.A

    @property
    def period(self):
        return self.base.period

    @property
    def scale(self):
        """Typical size of omega(gamma, gamma'); used to scale residual tolerances."""
        return self.base.A ** 2

    def __call__(self, t, order=0):
        return curve_eval(self, t, order)

    def relative(self, t):
        """gamma(t) - center."""
        return curve_eval(self, t, 0) - self.base.center_array

    def grid(self, m=DENSE_GRID):
        return np.arange(m) * (self.period / m)

    def is_embedded(self, m=DENSE_GRID):
        return bool(np.all(1.0 + self.deformation(self.grid(m)) > 0))

    def convexity(self, m=DENSE_GRID):
        """min over a dense grid of omega(gamma', gamma'')."""
        t = self.grid(m)
        return float(np.min(area_form(curve_eval(self, t, 1), curve_eval(self, t, 2))))

    def is_convex(self, m=DENSE_GRID):
        return self.is_embedded(m) and self.convexity(m) > 0

    def validate(self, m=DENSE_GRID):
        if not self.is_embedded(m):
            raise GeometryError("1 + n(t) must stay positive")
        if self.convexity(m) <= 0:
            raise GeometryError("curve is not strictly convex")
        return self

    def with_deformation(self, n):
        return DeformedCurve(self.base, n)

    def to_dict(self):
        return {"ellipse": self.base.to_dict(), "deformation": self.deformation.to_dict()}

    @classmethod
    def from_dict(cls, d):
        base = EllipseSpec.from_dict(d["ellipse"])
        n = DeformationFn.from_dict(d.get("deformation", {}), base.period)
        return cls(base, n)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def curve_eval(curve, t, order=0):
    """gamma(t), gamma'(t) or gamma''(t) with exact derivatives."""
    E, n = curve.base, curve.deformation
    r = np.asarray(1.0 + n(t))[..., None]
    if order == 0:
        return E.center_array + r * E.point(t, 0)
    e0, e1 = E.point(t, 0), E.point(t, 1)
    dn = np.asarray(n(t, 1))[..., None]
    if order == 1:
        return dn * e0 + r * e1
    if order == 2:
        return np.asarray(n(t, 2))[..., None] * e0 + 2.0 * dn * e1 + r * E.point(t, 2)
    raise ValueError("order must be 0, 1 or 2")


def function_norms(f, k=1, grid=DENSE_GRID):
    """(C^k norm, L^2 norm) of a deformation.

    C^k sums the grid maxima of |f^(j)| for j <= k; L^2 is normalized by the
    period and comes from the coefficients.
    """
    t = np.arange(grid) * (f.period / grid)
    ck = sum(float(np.max(np.abs(f(t, j)))) for j in range(k + 1))
    return ck, math.sqrt(f.l2_squared())


def c1_norm(f, grid=DENSE_GRID):
    return function_norms(f, 1, grid)[0]


@dataclass(frozen=True, eq=False)
class AffinePlaneMap:
    linear: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        L = np.array(self.linear, dtype=float).reshape(2, 2)
        b = np.array(self.translation, dtype=float).reshape(2)
        L.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "linear", L)
        object.__setattr__(self, "translation", b)

    @property
    def det(self):
        return float(np.linalg.det(self.linear))

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.linear.T + self.translation


def affine_map_norm(T):
    """Operator norm of the linear part plus Euclidean norm of the translation."""
    return float(np.linalg.norm(T.linear, 2) + np.linalg.norm(T.translation))


def _linear_image(T, E):
    """Image ellipse and the angle shift phi with image parameter s' = s - phi."""
    if np.any(T.translation != 0):
        raise GeometryError("apply_linear expects a map with zero translation")
    if T.det <= 0:
        raise GeometryError(f"linear map must have positive determinant, got {T.det}")
    M = T.linear @ E.frame
    U, sig, Vt = np.linalg.svd(M)
    if np.linalg.det(U) < 0:
        U[:, 1] *= -1
        Vt[1, :] *= -1
    V = Vt.T
    phi = math.atan2(V[1, 0], V[0, 0])
    tilt = math.atan2(U[1, 0], U[0, 0])
    image = EllipseSpec(tuple(T.linear @ E.center_array), sig[0], sig[1], tilt)
    return image, phi


def linear_parameter_map(T, curve):
    """(scale, shift) with t' = scale * t + shift mapping curve parameters to image parameters."""
    image, phi = _linear_image(T, curve.base)
    scale = image.A / curve.A
    return scale, -phi * image.A


def apply_linear(T, curve):
    """Image of a deformed curve under a linear map with positive determinant.

    The affine parameter rescales by det(L)^(1/3); the deformation keeps its
    values (up to the parameter shift reported by ``linear_parameter_map``).
    """
    image, phi = _linear_image(T, curve.base)
    n = curve.deformation.with_period(image.period).shifted(phi)
    return DeformedCurve(image, n)
