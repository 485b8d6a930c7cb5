import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from billiard_lab.errors import GeometryError
from billiard_lab.geometry import (
    AffinePlaneMap,
    DeformationFn,
    DeformedCurve,
    EllipseSpec,
    affine_map_norm,
    apply_linear,
    area_form,
    c1_norm,
    curve_eval,
    function_norms,
    linear_parameter_map,
    normalized_area,
)

from conftest import central_fd, perturbed_circle

finite = st.floats(-10, 10, allow_nan=False)
vec = st.tuples(finite, finite).map(np.array)
angle = st.floats(0, 2 * math.pi)
axes = st.floats(0.3, 3.0)


# ---------------------------------------------------------------- area form


def test_area_form_examples():
    assert area_form(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 1.0
    assert area_form(np.array([2.0, 1.0]), np.array([3.0, 4.0])) == 5.0


@given(vec)
def test_area_form_alternating(u):
    assert area_form(u, u) == 0.0


@given(vec, vec, vec, finite)
def test_area_form_bilinear_antisymmetric(u, v, w, s):
    assert area_form(u, v) == pytest.approx(-area_form(v, u), abs=1e-12)
    lhs = area_form(s * u + w, v)
    assert lhs == pytest.approx(s * area_form(u, v) + area_form(w, v), abs=1e-9)


def test_area_form_broadcasts():
    U = np.random.default_rng(1).normal(size=(5, 2))
    out = area_form(U, U[::-1])
    assert out.shape == (5,)
    assert out[0] == pytest.approx(area_form(U[0], U[4]))


# ------------------------------------------------------------------ ellipses


def test_normalized_area_examples():
    assert normalized_area(EllipseSpec((0, 0), 1, 1)) == 1.0
    assert normalized_area(EllipseSpec((0, 0), 2, 4)) == pytest.approx(2.0, rel=1e-15)
    assert normalized_area(EllipseSpec((0, 0), 2, 1)) == pytest.approx(1.259921, abs=1e-6)


@given(axes, axes)
def test_period_and_area(a, b):
    E = EllipseSpec((0.0, 0.0), a, b)
    assert E.period == pytest.approx(2 * math.pi * E.A)
    assert E.A**3 == pytest.approx(a * b)
    assert E.A == pytest.approx((math.pi * a * b / math.pi) ** (1 / 3))


@pytest.mark.parametrize("a,b", [(0.0, 1.0), (1.0, -2.0), (math.nan, 1.0)])
def test_ellipse_rejects_bad_axes(a, b):
    with pytest.raises(GeometryError):
        EllipseSpec((0, 0), a, b)


@given(axes, axes, angle, angle, angle)
def test_ellipse_generating_identity(a, b, tilt, t, s):
    # omega(e(t), e(t')) about the center equals A^3 sin((t'-t)/A)
    E = EllipseSpec((0.3, -1.0), a, b, tilt)
    T, S = t * E.A, s * E.A
    assert area_form(E.point(T), E.point(S)) == pytest.approx(E.A**3 * math.sin(s - t), abs=1e-12 * max(1, E.A**3))


@given(axes, axes, angle)
def test_shape_matrix_roundtrip(a, b, tilt):
    E = EllipseSpec((0.5, 0.2), a, b, tilt)
    F = EllipseSpec.from_shape(E.center, E.shape_matrix, reference_tilt=tilt)
    assert F.same_set(E)


def test_from_shape_prefers_reference_tilt():
    E = EllipseSpec.from_shape((0, 0), np.diag([1.0, 2.0]), reference_tilt=0.0)
    assert E.same_set(EllipseSpec((0, 0), 1.0, 2.0, 0.0))
    assert abs(E.tilt) < 1e-12


# ------------------------------------------------------------------ curves


def test_curve_eval_examples(circle):
    np.testing.assert_allclose(curve_eval(circle, 0.0, 0), [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(curve_eval(circle, math.pi / 2, 1), [-1.0, 0.0], atol=1e-15)
    scaled = perturbed_circle({}, c0=0.1)
    np.testing.assert_allclose(curve_eval(scaled, 0.0, 0), [1.1, 0.0], atol=1e-15)


@given(st.floats(0, 10))
def test_curve_derivatives_match_finite_differences(t):
    c = DeformedCurve.over(EllipseSpec((0.2, 0.1), 1.5, 0.8, 0.4), {2: (0.01, 0.02), 5: (0.003, -0.004)})
    np.testing.assert_allclose(curve_eval(c, t, 1), central_fd(lambda s: curve_eval(c, s, 0), t), atol=1e-8)
    np.testing.assert_allclose(curve_eval(c, t, 2), central_fd(lambda s: curve_eval(c, s, 1), t), atol=1e-8)


def test_curve_eval_vectorized(ellipse21):
    t = np.linspace(0, ellipse21.period, 7)
    X = curve_eval(ellipse21, t, 0)
    assert X.shape == (7, 2)
    np.testing.assert_allclose(X[0], X[-1], atol=1e-14)
    with pytest.raises(ValueError):
        curve_eval(ellipse21, 0.0, 3)


def test_convexity_check():
    assert perturbed_circle({3: (0.01, 0.0)}).is_convex()
    assert not perturbed_circle({3: (0.5, 0.0)}).is_convex()
    with pytest.raises(GeometryError):
        perturbed_circle({3: (0.5, 0.0)}).validate()
    with pytest.raises(GeometryError):
        perturbed_circle({}, c0=-1.5).validate()


def test_deformation_period_must_match(unit):
    with pytest.raises(GeometryError):
        DeformedCurve(EllipseSpec((0, 0), 2, 1), DeformationFn.zero(2 * math.pi))


def test_curve_json_roundtrip():
    c = DeformedCurve.over(EllipseSpec((0.5, -0.25), 1.5, 0.75, 0.3), {1: (0.01, 0.0), 4: (0.0, 0.002)}, c0=0.001)
    text = c.to_json()
    doc = json.loads(text)
    assert set(doc) == {"ellipse", "deformation"}
    assert set(doc["ellipse"]) == {"center", "a", "b", "tilt"}
    assert set(doc["deformation"]) == {"c0", "cos", "sin"}
    back = DeformedCurve.from_json(text)
    t = np.linspace(0, c.period, 11)
    np.testing.assert_array_equal(back(t), c(t))


# ------------------------------------------------------------ deformations


def test_function_norm_examples():
    f = DeformationFn.from_harmonics(2 * math.pi, {3: (0.1, 0.0)})
    assert function_norms(f, 1)[0] == pytest.approx(0.4, rel=1e-12)
    g = DeformationFn.from_harmonics(2 * math.pi, {1: (0.0, 1.0)})
    assert function_norms(g, 0)[1] == pytest.approx(1 / math.sqrt(2), rel=1e-15)
    z = DeformationFn.zero(2 * math.pi)
    assert function_norms(z, 2) == (0.0, 0.0)


coeffs = st.lists(st.floats(-1, 1), min_size=1, max_size=8)


@given(st.floats(-1, 1), coeffs, coeffs, st.floats(0.5, 10))
def test_parseval_matches_quadrature(c0, cos, sin, period):
    f = DeformationFn(period, c0, cos, sin)
    t = np.arange(256) * (period / 256)
    quad = float(np.mean(f(t) ** 2))
    assert f.l2_squared() == pytest.approx(quad, abs=1e-10)


@given(coeffs, coeffs, st.floats(0.0, 10.0))
def test_deformation_derivatives(cos, sin, t):
    f = DeformationFn(3.0, 0.2, cos, sin)
    assert f(t, 1) == pytest.approx(central_fd(f, t), abs=1e-6)
    assert f(t, 2) == pytest.approx(central_fd(lambda s: f(s, 1), t), abs=1e-6)


def test_deformation_from_samples_is_exact_for_band_limited():
    f = DeformationFn(5.0, 0.3, [0.1, 0.0, -0.2], [0.0, 0.05])
    t = np.arange(64) * (5.0 / 64)
    g = DeformationFn.from_samples(f(t), 5.0, 8)
    np.testing.assert_allclose(g.cos[:3], f.cos, atol=1e-15)
    np.testing.assert_allclose(g.sin[:3], f.sin, atol=1e-15)
    assert g.c0 == pytest.approx(0.3, abs=1e-15)
    with pytest.raises(ValueError):
        DeformationFn.from_samples(f(t), 5.0, 32)


@given(angle, st.floats(0, 7))
def test_shift_rotates_angle(phi, t):
    f = DeformationFn(2 * math.pi, 0.1, [0.2, 0.3], [0.0, -0.1])
    assert f.shifted(phi)(t) == pytest.approx(f(t + phi), abs=1e-12)


def test_deformation_arithmetic():
    f = DeformationFn(1.0, 0.1, [1.0])
    g = DeformationFn(1.0, 0.0, [0.0, 2.0], [1.0])
    t = np.linspace(0, 1, 9)
    np.testing.assert_allclose((f + g)(t), f(t) + g(t), atol=1e-14)
    np.testing.assert_allclose((f - g)(t), f(t) - g(t), atol=1e-14)
    np.testing.assert_allclose((f * 3.0)(t), 3.0 * f(t), atol=1e-14)
    with pytest.raises(GeometryError):
        f + DeformationFn(2.0, 0.0)
    with pytest.raises(GeometryError):
        DeformationFn(1.0, math.inf)


# ------------------------------------------------------------- affine maps


def test_affine_map_norm_examples():
    assert affine_map_norm(AffinePlaneMap(np.eye(2))) == pytest.approx(1.0)
    assert affine_map_norm(AffinePlaneMap(np.diag([2.0, 1.0]), [1.0, 0.0])) == pytest.approx(3.0)
    assert affine_map_norm(AffinePlaneMap(np.zeros((2, 2)), [3.0, 4.0])) == pytest.approx(5.0)


def test_apply_linear_identity():
    c = perturbed_circle({3: (0.01, 0.002)})
    img = apply_linear(AffinePlaneMap(np.eye(2)), c)
    t = np.linspace(0, c.period, 13)
    np.testing.assert_allclose(img(t), c(t), atol=1e-14)


def test_apply_linear_diag(circle):
    img = apply_linear(AffinePlaneMap(np.diag([2.0, 1.0])), circle)
    assert img.base.same_set(EllipseSpec((0, 0), 2.0, 1.0, 0.0))
    assert img.A == pytest.approx(2 ** (1 / 3))


def test_apply_linear_rejects_bad_maps(circle):
    with pytest.raises(GeometryError):
        apply_linear(AffinePlaneMap(np.diag([1.0, -1.0])), circle)
    with pytest.raises(GeometryError):
        apply_linear(AffinePlaneMap(np.eye(2), [1.0, 0.0]), circle)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 7))
def test_apply_linear_maps_points(p, r, s, t):
    L = np.array([[1.5 + 0.3 * p, 0.4 * r], [0.2 * s, 0.8]])
    c = DeformedCurve.over(EllipseSpec((0, 0), 1.2, 0.9, 0.3), {2: (0.01, 0.0), 3: (0.0, 0.01)})
    T = AffinePlaneMap(L)
    img = apply_linear(T, c)
    scale, shift = linear_parameter_map(T, c)
    assert scale == pytest.approx(abs(np.linalg.det(L)) ** (1 / 3), rel=1e-12)
    np.testing.assert_allclose(img(scale * t + shift), T(c(t)), atol=1e-12)
    assert c1_norm(img.deformation) == pytest.approx(c1_norm(c.deformation.with_period(img.period)), rel=1e-6)
