"""Rule -> nonlinearity calculus.

Every transition acts on the moment variable z by a symbolic factor:

* offspring (+1, 0)  ->  z
* offspring (-1, 0)  ->  1/z
* offspring (s, 1)   ->  exp(-s * d/dx log z)   (single offspring only)

and a multi-offspring transition acts by the product of its factors.  A scaling
mode substitutes a truncated beta-series for z, and

* scaling1:  psi_beta = (k_beta/beta) * (phi(z) - 1 + beta u),  z = 1 - beta u
* scaling2:  psi_beta = k_beta * ((phi(z) - phi(1/z))/(2 beta) - u), with the
  substitutions z -> 2(-beta u + sqrt(1 + beta^2 u^2)) = 2 - 2 beta u + beta^2 u^2 + ...
  and 1/z -> 2(+beta u + sqrt(1 + beta^2 u^2)); phi(1/z) swaps the two series
* unit:      beta fixed at 1, psi = k * (phi(1 - u) - 1 + u)

The scaling2 substitution series are the doubled expansions that make the
sign-flip construction close (the u^1 coefficient of the sign-flip rule
cancels exactly and the limit is -u^3); see the validation notes for the
derivation.

All arithmetic is exact (Fraction coefficients, explicit truncation cutoffs).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .errors import DivergentLimit, UnsupportedCombination
from .series import (
    BetaSeries,
    FormalSeries,
    binomial_series,
    exp_series,
    log1p_series,
    mono_str,
    polynomial_str,
)
from .rules import require_valid


class ScalingMode(Enum):
    UNIT = "unit"
    SCALING1 = "scaling1"
    SCALING2 = "scaling2"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        try:
            return cls(str(text).lower())
        except ValueError:
            raise ValueError(
                f"unknown scaling mode {text!r}; use unit, scaling1 or scaling2"
            ) from None


_BETA_U = FormalSeries.monomial(1, 0, BetaSeries({Fraction(1): Fraction(1)}))
_U = FormalSeries.monomial(1, 0, BetaSeries.constant(1))


def _derivative_action(sign, cutoff):
    """exp(-sign * d/dx log(1 - beta u)), expanded exactly to the cutoff."""
    log_z = log1p_series(-_BETA_U, cutoff)
    return exp_series(log_z.dx().scale(-sign), cutoff)


def _scaling1_inverse(cutoff):
    return binomial_series(-_BETA_U, Fraction(-1), cutoff)


def _scaling2_pair(cutoff):
    root = binomial_series(_BETA_U * _BETA_U, Fraction(1, 2), cutoff)
    z = (root - _BETA_U).scale(2)
    z_inv = (root + _BETA_U).scale(2)
    return z, z_inv


def _transition_action_scaling1(transition, cutoff):
    action = FormalSeries.one()
    for sign, dderiv in transition.offspring:
        if dderiv == 1:
            factor = _derivative_action(sign, cutoff)
        elif sign == 1:
            factor = FormalSeries.one() - _BETA_U
        else:
            factor = _scaling1_inverse(cutoff)
        action = (action * factor).truncate(cutoff)
    return action


def _transition_action_unit(transition):
    z = FormalSeries.one() - _BETA_U
    action = FormalSeries.one()
    for sign, dderiv in transition.offspring:
        if dderiv == 1:
            raise UnsupportedCombination(
                "derivative transition has no exact beta=1 substitution (unit scaling)"
            )
        if sign == -1:
            raise UnsupportedCombination(
                "sign-flip transition has no exact beta=1 substitution (unit scaling)"
            )
        action = action * z
    return action


def _transition_action_scaling2(transition, z, z_inv, orientation, cutoff):
    action = FormalSeries.one()
    for sign, dderiv in transition.offspring:
        if dderiv == 1:
            raise UnsupportedCombination(
                "derivative transition under scaling2 (only sign marks allowed)"
            )
        if sign == 1:
            factor = z if orientation > 0 else z_inv
        else:
            factor = z_inv if orientation > 0 else z
        action = (action * factor).truncate(cutoff)
    return action


def psi_series(rule, scaling, order=4):
    """Exact truncated beta-series of the rule's nonlinearity psi_beta(u, u_x)."""
    require_valid(rule)
    scaling = scaling if isinstance(scaling, ScalingMode) else ScalingMode.parse(scaling)
    order = Fraction(order)
    if order <= 0:
        raise ValueError("truncation order must be positive")
    c = rule.intensity.c
    gamma = rule.intensity.gamma

    if scaling is ScalingMode.UNIT:
        phi = FormalSeries.zero()
        for t in rule.transitions:
            phi = phi + _transition_action_unit(t).scale(t.weight)
        core = phi - FormalSeries.one() + _BETA_U
        return core.scale(c).substitute_beta_one()

    if scaling is ScalingMode.SCALING1:
        work = order + gamma + 1
        phi = FormalSeries.zero()
        for t in rule.transitions:
            phi = phi + _transition_action_scaling1(t, work).scale(t.weight)
        core = (phi - FormalSeries.one() + _BETA_U).truncate(work)
        return core.shift(-gamma - 1, c)

    work = order + gamma + 1
    z, z_inv = _scaling2_pair(work)
    diff = FormalSeries.zero()
    for t in rule.transitions:
        plus = _transition_action_scaling2(t, z, z_inv, +1, work)
        minus = _transition_action_scaling2(t, z, z_inv, -1, work)
        diff = diff + (plus - minus).scale(t.weight)
    core = diff.truncate(work).shift(-1, Fraction(1, 2)) - _U
    return core.shift(-gamma, c)


@dataclass(frozen=True)
class PDEDescriptor:
    """The limit equation du/dt = 1/2 u_xx - psi(u, u_x) with polynomial psi."""

    psi_coeffs: tuple  # sorted ((a, b), Fraction) pairs

    @classmethod
    def from_map(cls, coeffs):
        items = tuple(sorted((m, c) for m, c in coeffs.items() if c != 0))
        return cls(psi_coeffs=items)

    def as_map(self):
        return dict(self.psi_coeffs)

    @property
    def uses_ux(self):
        return any(b > 0 for (_, b), _ in self.psi_coeffs)

    @property
    def degree(self):
        return max((a + b for (a, b), _ in self.psi_coeffs), default=0)

    def psi_eval(self, u, ux=0.0):
        total = 0.0
        for (a, b), c in self.psi_coeffs:
            term = float(c)
            if a:
                term = term * u**a
            if b:
                term = term * ux**b
            total = total + term
        return total

    def psi_str(self):
        return polynomial_str(self.as_map())

    def equation_str(self):
        negated = {m: -c for m, c in self.psi_coeffs}
        if not negated:
            return "du/dt = 1/2 u_xx"
        body = polynomial_str(negated)
        if body.startswith("-"):
            return f"du/dt = 1/2 u_xx - {body[1:].lstrip()}"
        return f"du/dt = 1/2 u_xx + {body}"

    def __str__(self):
        return self.equation_str()


def psi_limit(series):
    """Extract the beta^0 coefficients; error out if any negative power survives."""
    worst = None
    for mono, s in series.terms.items():
        for e, coeff in s.terms.items():
            if e < 0 and (worst is None or e < worst[1]):
                worst = (mono, e, coeff)
        if s.cutoff is not None and s.cutoff <= 0:
            raise ValueError(
                f"series truncated at beta^{s.cutoff}; beta^0 coefficient of "
                f"{mono_str(mono)} is unknown (raise the order)"
            )
    if worst is not None:
        mono, e, coeff = worst
        raise DivergentLimit(mono_str(mono), e, coeff)
    return PDEDescriptor.from_map(series.coefficient_map(Fraction(0)))


def target_pde(rule, scaling, order=4):
    """The beta -> 0 equation represented by the rule under the given scaling."""
    return psi_limit(psi_series(rule, scaling, order))


def series_lines(series):
    """Human-readable lines, one per beta power, lowest power first."""
    by_exp = {}
    cutoffs = [s.cutoff for s in series.terms.values() if s.cutoff is not None]
    for mono, s in series.terms.items():
        for e, c in s.terms.items():
            by_exp.setdefault(e, {})[mono] = c
    lines = []
    for e in sorted(by_exp):
        label = "beta^0" if e == 0 else f"beta^{e}"
        lines.append(f"{label}: {polynomial_str(by_exp[e])}")
    if not lines:
        lines.append("0")
    if cutoffs:
        lines.append(f"+ O(beta^{min(cutoffs)})")
    return lines
