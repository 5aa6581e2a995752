"""Finite-difference reference solver and the path-integral identity check."""

import math

import numpy as np
import pytest

from branchflow.calculus import PDEDescriptor, ScalingMode, target_pde
from branchflow.errors import BlowUpDetected, StabilityViolation
from branchflow.functions import Constant, Gaussian, Polynomial, Scaled, Sine
from branchflow.pde import (Grid1D, heat_boundary, heat_closed_form,
                            heat_quadrature, integral_residual,
                            padded_interval, self_convergence_order,
                            solve_cauchy, solve_semilinear)
from branchflow.rules import (built_in_rule, derivative_mix_rule, kpp_rule,
                              rule_from_power, sign_flip_rule)

S1, S2, UNIT = ScalingMode.SCALING1, ScalingMode.SCALING2, ScalingMode.UNIT

ZERO_PSI = PDEDescriptor.from_map({})
KPP_PSI = target_pde(kpp_rule(), UNIT)                 # u^2 - u
SQUARE_PSI = target_pde(rule_from_power(2), S1)        # u^2
MIX_PSI = target_pde(derivative_mix_rule(), S1)        # 2u^2 + u_x^2
CUBIC_PSI = target_pde(sign_flip_rule(), S2)           # -u^3


# ------------------------------------------------------------ heat solutions


def test_gaussian_heat_closed_form_matches_quadrature():
    f = Gaussian(a=1.2, sigma=0.9, x0=0.4)
    for x in (-1.0, 0.0, 0.8):
        for t in (0.05, 0.5, 2.0):
            assert heat_closed_form(x, t, f) == pytest.approx(
                heat_quadrature(x, t, f), abs=1e-10)


def test_sine_heat_closed_form_matches_quadrature():
    f = Sine(a=0.8, omega=1.5)
    for x in (-0.7, 0.3):
        assert heat_closed_form(x, 0.4, f) == pytest.approx(
            heat_quadrature(x, 0.4, f), abs=1e-8)


def test_scaled_and_constant_dispatch():
    f = Scaled(Gaussian(a=1.0, sigma=1.0, x0=0.0), 0.5)
    assert heat_closed_form(0.3, 0.7, f) == pytest.approx(
        0.5 * heat_closed_form(0.3, 0.7, Gaussian(a=1.0, sigma=1.0, x0=0.0)))
    assert heat_closed_form(5.0, 3.0, Constant(2.0)) == pytest.approx(2.0)


def test_polynomial_falls_back_to_quadrature():
    f = Polynomial((0.0, 0.0, 1.0))     # x^2; heat evolution adds t
    assert heat_closed_form(0.5, 0.3, f) == pytest.approx(0.25 + 0.3,
                                                          abs=1e-8)


def test_heat_closed_form_requires_positive_time():
    with pytest.raises(ValueError):
        heat_closed_form(0.0, 0.0, Gaussian())


def test_heat_boundary_agrees_with_initial_data_at_zero():
    f = Gaussian(a=1.0, sigma=1.0, x0=0.0)
    g = heat_boundary(f)
    assert g(0.0, 0.7) == pytest.approx(f(0.7))
    assert g(0.4, 0.7) == pytest.approx(heat_closed_form(0.7, 0.4, f))


def test_padded_interval_adds_four_root_t():
    a, b = padded_interval([-1.0, 1.0], 0.25)
    assert a == pytest.approx(-3.0)
    assert b == pytest.approx(3.0)


# ------------------------------------------------------------------- grids


def test_grid_shape_and_spacing():
    grid = Grid1D((-1.0, 1.0), 0.5, nx=41, nt=100)
    assert grid.dx == pytest.approx(0.05)
    assert grid.dt == pytest.approx(0.005)
    assert len(grid.xs) == 41
    assert grid.ts[-1] == pytest.approx(0.5)


def test_grid_rejects_violent_time_steps():
    with pytest.raises(StabilityViolation):
        Grid1D((-1.0, 1.0), 1.0, nx=101, nt=10, stability_ratio=16.0)


# ------------------------------------------------------------- semilinear


def test_zero_reaction_reproduces_heat_flow():
    f = Gaussian(a=1.0, sigma=1.0, x0=0.0)
    sol = solve_cauchy(ZERO_PSI, f, 0.5, [-1.0, 0.0, 1.0], dx=0.0125)
    for x in (-1.0, 0.0, 1.0):
        assert sol.final(x) == pytest.approx(heat_closed_form(x, 0.5, f),
                                             abs=5e-5)


def test_kpp_fixed_points_are_preserved():
    grid = Grid1D((-2.0, 2.0), 0.5, nx=81, nt=250)
    for level in (0.0, 1.0):
        f = Constant(level)
        sol = solve_semilinear(KPP_PSI, f, None, grid)
        assert np.max(np.abs(sol.values - level)) < 1e-10


def test_kpp_solution_respects_comparison_bounds():
    f = Gaussian(a=0.8, sigma=0.7, x0=0.0)      # 0 <= f <= 0.8 < 1
    grid = Grid1D((-3.0, 3.0), 0.6, nx=121, nt=300)
    sol = solve_semilinear(KPP_PSI, f, None, grid)
    assert sol.values.min() >= -1e-9
    assert sol.values.max() <= 1.0 + 1e-9
    # logistic growth pushes the maximum up over time
    assert sol.final(0.0) > heat_closed_form(0.6, 0.6, f)


@pytest.mark.parametrize("psi,label", [
    (KPP_PSI, "quadratic-logistic"),
    (SQUARE_PSI, "quadratic"),
    (MIX_PSI, "gradient-quadratic"),
    (CUBIC_PSI, "cubic"),
], ids=lambda v: v if isinstance(v, str) else "")
def test_solver_is_second_order(psi, label):
    f = Gaussian(a=0.8, sigma=1.0, x0=0.0)
    orders = self_convergence_order(psi, f, (-2.5, 2.5), 0.25, nx0=33,
                                    levels=3)
    assert min(orders) >= 1.9
    assert max(orders) <= 2.1


def test_blow_up_is_detected():
    f = Gaussian(a=3.0, sigma=1.0, x0=0.0)
    with pytest.raises(BlowUpDetected) as exc:
        solve_cauchy(CUBIC_PSI, f, 0.5, [0.0], dx=0.025,
                     amplitude_bound=50.0)
    assert exc.value.amplitude >= 50.0
    assert 0.0 < exc.value.time <= 0.5


def test_solution_sampling_and_csv(tmp_path):
    f = Gaussian(a=1.0, sigma=1.0, x0=0.0)
    grid = Grid1D((-1.0, 1.0), 0.2, nx=21, nt=40)
    sol = solve_semilinear(ZERO_PSI, f, None, grid)
    # bilinear sampling hits nodes exactly
    assert sol.sample(grid.ts[13], grid.xs[7]) == pytest.approx(
        sol.values[13, 7])
    assert sol.final(grid.xs[7]) == pytest.approx(sol.values[-1, 7])
    path = tmp_path / "solution.csv"
    sol.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "t,x,u"


def test_dirichlet_boundary_values_are_applied():
    f = Gaussian(a=1.0, sigma=1.0, x0=0.0)
    grid = Grid1D((-1.0, 1.0), 0.3, nx=41, nt=80)
    from branchflow.functions import BoundaryData
    g = BoundaryData(lambda t, x: 0.25)
    sol = solve_semilinear(ZERO_PSI, f, g, grid)
    assert sol.values[-1, 0] == pytest.approx(0.25)
    assert sol.values[-1, -1] == pytest.approx(0.25)


# ------------------------------------------------------- integral identity


def test_integral_residual_vanishes_for_heat_flow():
    f = Gaussian(a=1.0, sigma=1.0, x0=0.0)
    sol = solve_cauchy(ZERO_PSI, f, 0.3, [0.0, 0.5], dx=0.025)
    report = integral_residual(sol, ZERO_PSI, f, 20_000, probes=[0.0, 0.5])
    for row in report.rows:
        assert row.green == 0.0
        assert row.residual <= 4 * row.stderr + 5e-4


def test_integral_residual_balances_kpp_reaction():
    f = Gaussian(a=0.5, sigma=1.0, x0=0.0)
    sol = solve_cauchy(KPP_PSI, f, 0.3, [0.0, 0.5], dx=0.025)
    report = integral_residual(sol, KPP_PSI, f, 20_000, probes=[0.0, 0.5])
    assert report.n_paths == 20_000
    for row in report.rows:
        assert abs(row.green) > 1e-3          # the reaction term is active
        assert row.residual <= 4 * row.stderr + 2e-3
    assert report.max_residual == max(r.residual for r in report.rows)


def test_integral_residual_report_renders():
    f = Gaussian(a=0.5, sigma=1.0, x0=0.0)
    sol = solve_cauchy(KPP_PSI, f, 0.2, [0.0], dx=0.05)
    report = integral_residual(sol, KPP_PSI, f, 2000, probes=[0.0])
    text = str(report)
    assert "residual" in text
    assert "0" in text
