"""Analytic function families used as initial/boundary data.

Each family evaluates f(x) and its exact n-th derivative for arbitrary n
(derivative-marked exit atoms score f', f'', ...).  Evaluators accept scalars
or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class InitialCondition:
    """Base: value + exact derivatives of any order."""

    def __call__(self, x):
        return self.derivative(x, 0)

    def derivative(self, x, n):
        raise NotImplementedError

    def params(self):
        raise NotImplementedError

    def describe(self):
        name = type(self).__name__.lower()
        args = ", ".join(f"{k}={v}" for k, v in self.params().items())
        return f"{name}({args})"


@dataclass
class Gaussian(InitialCondition):
    """a * exp(-(x - x0)^2 / (2 sigma^2))."""

    a: float = 1.0
    sigma: float = 1.0
    x0: float = 0.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def derivative(self, x, n):
        # d^n/dx^n exp(-z^2) = (-1)^n H_n(z) exp(-z^2), z = (x-x0)/(sigma sqrt 2)
        x = np.asarray(x, dtype=float)
        z = (x - self.x0) / (self.sigma * math.sqrt(2.0))
        core = np.exp(-z * z)
        if n == 0:
            out = self.a * core
        else:
            coeffs = np.zeros(n + 1)
            coeffs[n] = 1.0
            h = np.polynomial.hermite.hermval(z, coeffs)
            scale = self.a * (-1.0 / (self.sigma * math.sqrt(2.0))) ** n
            out = scale * h * core
        return out if out.shape else float(out)

    def params(self):
        return {"a": self.a, "sigma": self.sigma, "x0": self.x0}


@dataclass
class Sine(InitialCondition):
    """a * sin(omega x)."""

    a: float = 1.0
    omega: float = 1.0

    def derivative(self, x, n):
        x = np.asarray(x, dtype=float)
        out = self.a * self.omega**n * np.sin(self.omega * x + n * math.pi / 2.0)
        return out if out.shape else float(out)

    def params(self):
        return {"a": self.a, "omega": self.omega}


@dataclass
class Polynomial(InitialCondition):
    """Sum_k coeffs[k] x^k."""

    coeffs: tuple = (0.0,)

    def __post_init__(self):
        self.coeffs = tuple(float(c) for c in self.coeffs)

    def derivative(self, x, n):
        x = np.asarray(x, dtype=float)
        c = np.polynomial.polynomial.polyder(self.coeffs, n) if n else self.coeffs
        out = np.polynomial.polynomial.polyval(x, c if len(c) else [0.0])
        return out if out.shape else float(out)

    def params(self):
        return {"coeffs": self.coeffs}


@dataclass
class Constant(InitialCondition):
    c: float = 0.0

    def derivative(self, x, n):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, self.c) if n == 0 else np.zeros_like(x)
        return out if out.shape else float(out)

    def params(self):
        return {"c": self.c}


@dataclass
class Scaled(InitialCondition):
    """factor * f(x): keeps exact derivatives of the wrapped family."""

    base: InitialCondition
    factor: float = 1.0

    def derivative(self, x, n):
        return self.factor * self.base.derivative(x, n)

    def params(self):
        return {"base": self.base.describe(), "factor": self.factor}


FAMILIES = {
    "gaussian": Gaussian,
    "sine": Sine,
    "polynomial": Polynomial,
    "constant": Constant,
}


def initial_condition_from_dict(data):
    data = dict(data)
    family = data.pop("family", None)
    if family not in FAMILIES:
        raise ValueError(
            f"unknown function family {family!r}; choose from {sorted(FAMILIES)}"
        )
    factor = data.pop("scale", None)
    if family == "polynomial" and "coeffs" in data:
        data["coeffs"] = tuple(float(c) for c in data["coeffs"])
    f = FAMILIES[family](**data)
    if factor is not None:
        f = Scaled(f, float(factor))
    return f


@dataclass
class BoundaryData:
    """Lateral boundary values g(t, x); order-0 atoms only.

    ``values`` maps the two endpoints to callables of t, or a single callable
    g(t, x) may be supplied."""

    g: object

    def __call__(self, t, x):
        return float(self.g(t, x))

    def check_continuity(self, horizon, a, b, n=200, jump_tol=None):
        """Sampled continuity check along each lateral edge."""
        ts = np.linspace(0.0, horizon, n)
        for edge in (a, b):
            vals = np.array([self(t, edge) for t in ts])
            if not np.all(np.isfinite(vals)):
                raise ValueError(f"boundary data not finite on edge x={edge}")
            jumps = np.abs(np.diff(vals))
            scale = max(1.0, np.max(np.abs(vals)))
            tol = jump_tol if jump_tol is not None else 0.2 * scale
            if np.max(jumps, initial=0.0) > tol:
                raise ValueError(
                    f"boundary data jumps by {np.max(jumps):.3g} on edge x={edge}"
                )
        return True


@dataclass
class SeparableField:
    """Phi(x, t) = spatial(x) * time_factor(t), with exact x-derivatives."""

    spatial: InitialCondition
    decay: float = 0.0      # exp(-decay * t) factor
    power: int = 0          # additional t**power factor

    def __call__(self, x, t):
        return self.time_factor(t) * self.spatial.derivative(x, 0)

    def time_factor(self, t):
        t = np.asarray(t, dtype=float)
        out = np.exp(-self.decay * t)
        if self.power:
            out = out * t**self.power
        return out if out.shape else float(out)

    def describe(self):
        parts = [self.spatial.describe()]
        if self.decay:
            parts.append(f"exp(-{self.decay} t)")
        if self.power:
            parts.append(f"t^{self.power}")
        return " * ".join(parts)
