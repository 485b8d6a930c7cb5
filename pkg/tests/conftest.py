import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from billiard_lab.geometry import DeformationFn, DeformedCurve, EllipseSpec

settings.register_profile(
    "default", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ELLIPSES = [(1.0, 1.0), (2.0, 1.0), (3.0, 0.5)]


@pytest.fixture
def circle():
    return DeformedCurve.ellipse()


@pytest.fixture
def ellipse21():
    return DeformedCurve.ellipse(2.0, 1.0)


@pytest.fixture
def unit():
    return EllipseSpec((0.0, 0.0), 1.0, 1.0, 0.0)


def perturbed_circle(harmonics, c0=0.0):
    return DeformedCurve.over(EllipseSpec((0.0, 0.0), 1.0, 1.0, 0.0), harmonics, c0)


def central_fd(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2 * h)
