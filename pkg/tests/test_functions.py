"""Initial-condition families: derivatives, scaling, serialization hooks."""

import math

import numpy as np
import pytest

from branchflow.functions import (BoundaryData, Constant, Gaussian, Polynomial,
                                  Scaled, SeparableField, Sine,
                                  initial_condition_from_dict)

FAMILIES = [
    Gaussian(a=1.3, sigma=0.8, x0=0.2),
    Sine(a=0.7, omega=2.0),
    Polynomial((1.0, -0.5, 0.25, 0.125)),
    Constant(0.4),
    Scaled(Gaussian(a=1.0, sigma=1.2, x0=-0.3), 0.6),
]
PROBES = [-1.3, -0.4, 0.0, 0.7, 2.1]


@pytest.mark.parametrize("f", FAMILIES, ids=lambda f: type(f).__name__)
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_derivatives_match_finite_differences(f, n):
    """f^(n) agrees with a central difference of f^(n-1) to O(delta^2)."""
    delta = 1e-5
    for x in PROBES:
        fd = (f.derivative(x + delta, n - 1)
              - f.derivative(x - delta, n - 1)) / (2 * delta)
        scale = max(1.0, abs(f.derivative(x, n)))
        assert f.derivative(x, n) == pytest.approx(fd, abs=5e-8 * scale)


@pytest.mark.parametrize("f", FAMILIES, ids=lambda f: type(f).__name__)
def test_order_zero_derivative_is_the_function(f):
    for x in PROBES:
        assert f.derivative(x, 0) == pytest.approx(f(x), abs=0)


@pytest.mark.parametrize("f", FAMILIES, ids=lambda f: type(f).__name__)
def test_derivatives_broadcast_over_arrays(f):
    xs = np.array(PROBES)
    for n in range(3):
        vals = f.derivative(xs, n)
        assert np.shape(vals) == xs.shape
        for x, v in zip(PROBES, np.asarray(vals, dtype=float)):
            assert v == pytest.approx(f.derivative(x, n))


def test_gaussian_known_values():
    f = Gaussian(a=2.0, sigma=0.5, x0=1.0)
    assert f(1.0) == pytest.approx(2.0)
    assert f(1.5) == pytest.approx(2.0 * math.exp(-0.5))
    assert f.derivative(1.0, 1) == pytest.approx(0.0, abs=1e-15)
    # f'' at the peak: -a/sigma^2
    assert f.derivative(1.0, 2) == pytest.approx(-2.0 / 0.25)


def test_sine_derivative_cycle():
    f = Sine(a=1.0, omega=3.0)
    x = 0.37
    assert f.derivative(x, 4) == pytest.approx(3.0 ** 4 * f(x))
    assert f.derivative(0.0, 0) == 0.0
    assert f.derivative(0.0, 1) == pytest.approx(3.0)


def test_polynomial_exhausts_to_zero():
    f = Polynomial((1.0, 2.0, 3.0))      # 1 + 2x + 3x^2
    assert f.derivative(0.7, 2) == pytest.approx(6.0)
    assert f.derivative(0.7, 3) == 0.0
    assert f.derivative(0.7, 9) == 0.0


def test_scaled_propagates_to_all_derivatives():
    base = Gaussian(a=1.0, sigma=1.0, x0=0.0)
    f = Scaled(base, -2.5)
    for n in range(4):
        assert f.derivative(0.3, n) == pytest.approx(
            -2.5 * base.derivative(0.3, n))


def test_constant_has_zero_derivatives():
    f = Constant(3.0)
    assert f(10.0) == 3.0
    assert f.derivative(10.0, 1) == 0.0
    assert f.derivative(10.0, 5) == 0.0


# ------------------------------------------------------------- construction


def test_from_dict_round_trips_families():
    f = initial_condition_from_dict(
        {"family": "gaussian", "a": 0.5, "sigma": 2.0, "x0": 1.0})
    assert f(1.0) == pytest.approx(0.5)
    g = initial_condition_from_dict({"family": "sine", "a": 1.0, "omega": 2.0,
                                     "scale": 0.25})
    assert g(math.pi / 4) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        initial_condition_from_dict({"family": "unknown"})


def test_polynomial_from_dict_coerces_coefficients():
    f = initial_condition_from_dict({"family": "polynomial",
                                     "coeffs": [1, 0, -1]})
    assert f(2.0) == pytest.approx(-3.0)


# ------------------------------------------------------------- time fields


def test_separable_field_factors():
    phi = SeparableField(Gaussian(a=1.0, sigma=1.0, x0=0.0),
                         decay=1.5, power=2)
    x, t = 0.4, 0.3
    want = math.exp(-0.08) * math.exp(-1.5 * t) * t ** 2
    assert phi(x, t) == pytest.approx(want)
    assert phi(x, 0.0) == 0.0                 # positive power vanishes at t=0
    assert phi.time_factor(t) == pytest.approx(math.exp(-1.5 * t) * t ** 2)


def test_separable_field_pure_decay():
    phi = SeparableField(Constant(2.0), decay=0.7)
    assert phi(5.0, 1.0) == pytest.approx(2.0 * math.exp(-0.7))
    assert phi(5.0, 0.0) == pytest.approx(2.0)


def test_boundary_data_is_callable_in_t_and_x():
    g = BoundaryData(lambda t, x: t + 10 * x)
    assert g(0.5, -1.0) == pytest.approx(-9.5)
