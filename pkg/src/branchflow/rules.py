"""Branching rules: offspring transitions with exact rational weights.

A rule is a finite list of transitions.  Each transition replaces the parent
particle by a multiset of offspring, every offspring carrying a sign factor
(+1 or -1) and a derivative increment (0 or 1) that compose with the parent's
mark.  Branch events arrive with intensity k_beta = c * beta**(-gamma).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

from .errors import AlphaOutOfRange, NegativeWeight, RuleError, WeightSumMismatch


class Offspring(NamedTuple):
    sign: int
    dderiv: int


def _frac(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, str)):
        return Fraction(x)
    if isinstance(x, float):
        # Binary floats convert exactly; 1.5 becomes 3/2, 0.5 becomes 1/2.
        return Fraction(x)
    raise TypeError(f"exact rational required, got {type(x).__name__}: {x!r}")


@dataclass(frozen=True)
class MarkTransition:
    weight: Fraction
    offspring: tuple

    def __post_init__(self):
        object.__setattr__(self, "weight", _frac(self.weight))
        object.__setattr__(
            self, "offspring", tuple(Offspring(int(s), int(d)) for s, d in self.offspring)
        )

    @property
    def n_offspring(self):
        return len(self.offspring)

    def describe(self):
        if not self.offspring:
            return "death"
        if len(self.offspring) == 1:
            s, d = self.offspring[0]
            if d == 0:
                return "continue" if s == 1 else "sign-flip"
            return f"derivative{'+' if s == 1 else '-'}"
        return f"branch into {len(self.offspring)}"


@dataclass(frozen=True)
class Intensity:
    c: Fraction
    gamma: Fraction

    def __post_init__(self):
        object.__setattr__(self, "c", _frac(self.c))
        object.__setattr__(self, "gamma", _frac(self.gamma))

    def k_beta(self, beta):
        return float(self.c) * float(beta) ** (-float(self.gamma))


@dataclass(frozen=True)
class BranchingRule:
    transitions: tuple
    intensity: Intensity
    name: str = ""
    renormalization_defect: Fraction = field(default=Fraction(0))

    def __post_init__(self):
        object.__setattr__(self, "transitions", tuple(self.transitions))
        object.__setattr__(
            self, "renormalization_defect", _frac(self.renormalization_defect)
        )

    def weight_sum(self):
        return sum((t.weight for t in self.transitions), Fraction(0))

    def mean_offspring(self):
        return sum((t.weight * t.n_offspring for t in self.transitions), Fraction(0))


@dataclass
class RuleReport:
    ok: bool
    problems: list
    weight_sum: Fraction
    mean_offspring: Fraction
    renormalization_defect: Fraction

    def __str__(self):
        lines = [f"valid: {self.ok}"]
        lines.append(f"weight sum: {self.weight_sum}")
        lines.append(f"mean offspring: {self.mean_offspring}")
        if self.renormalization_defect:
            lines.append(f"renormalization mass defect: {self.renormalization_defect}")
        for p in self.problems:
            lines.append(f"problem: {p}")
        return "\n".join(lines)


def validate_rule(rule):
    """Structural checks; returns a RuleReport listing every violation found."""
    problems = []
    if not rule.transitions:
        problems.append(RuleError("rule has no transitions"))
    for i, t in enumerate(rule.transitions):
        if t.weight < 0:
            problems.append(NegativeWeight(i, t.weight))
        for s, d in t.offspring:
            if s not in (1, -1):
                problems.append(RuleError(f"transition {i}: sign factor {s} not in {{+1,-1}}"))
            if d not in (0, 1):
                problems.append(RuleError(f"transition {i}: derivative increment {d} not in {{0,1}}"))
        if t.n_offspring > 1 and any(d != 0 for _, d in t.offspring):
            problems.append(
                RuleError(f"transition {i}: derivative increment in a multi-offspring transition")
            )
    if rule.intensity.c < 0:
        problems.append(RuleError(f"intensity coefficient {rule.intensity.c} is negative"))
    total = rule.weight_sum()
    if rule.transitions and total != 1:
        problems.append(WeightSumMismatch(total))
    return RuleReport(
        ok=not problems,
        problems=problems,
        weight_sum=total,
        mean_offspring=rule.mean_offspring(),
        renormalization_defect=rule.renormalization_defect,
    )


def require_valid(rule):
    report = validate_rule(rule)
    if not report.ok:
        raise report.problems[0]
    return report


def _binomial(alpha, n):
    """Generalized binomial coefficient C(alpha, n) with Fraction alpha."""
    out = Fraction(1)
    for j in range(n):
        out *= (alpha - j)
        out /= j + 1
    return out


def rule_from_power(alpha, truncation=8):
    """Rule whose scaling-1 nonlinearity is the power series of u**alpha.

    Weights p_0 = 1/alpha, p_n = (-1)**n C(alpha, n)/alpha for n >= 2, truncated
    at ``truncation`` and renormalized by their sum; intensity alpha/beta**(alpha-1).
    The dropped tail (the renormalization mass defect) is recorded on the rule
    and reported by validate_rule.
    """
    alpha = _frac(alpha)
    if not (1 < alpha <= 2):
        if alpha > 2:
            n_bad = 3
            p_bad = (-1) ** n_bad * _binomial(alpha, n_bad) / alpha
            raise AlphaOutOfRange(
                f"alpha={alpha} > 2: weight positivity fails (p_{n_bad} = {p_bad} < 0); "
                "only alpha in (1, 2] gives nonnegative weights"
            )
        raise AlphaOutOfRange(f"alpha={alpha} not in (1, 2]")
    if not (isinstance(truncation, int) and truncation >= 2):
        raise ValueError(f"truncation must be an integer >= 2, got {truncation!r}")
    raw = {0: Fraction(1) / alpha}
    for n in range(2, truncation + 1):
        p = (-1) ** n * _binomial(alpha, n) / alpha
        if p != 0:
            raw[n] = p
    total = sum(raw.values(), Fraction(0))
    transitions = [
        MarkTransition(raw[n] / total, tuple(Offspring(1, 0) for _ in range(n)))
        for n in sorted(raw)
    ]
    return BranchingRule(
        transitions=tuple(transitions),
        intensity=Intensity(alpha, alpha - 1),
        name=f"power-alpha[{alpha}]",
        renormalization_defect=1 - total,
    )


def kpp_rule():
    """Certain binary branching at unit rate (the McKean/KPP rule)."""
    return BranchingRule(
        transitions=(MarkTransition(Fraction(1), (Offspring(1, 0), Offspring(1, 0))),),
        intensity=Intensity(Fraction(1), Fraction(0)),
        name="kpp",
    )


def derivative_mix_rule():
    """Quarter-weight derivative transitions of each sign plus half-weight binary."""
    return BranchingRule(
        transitions=(
            MarkTransition(Fraction(1, 4), (Offspring(1, 1),)),
            MarkTransition(Fraction(1, 4), (Offspring(-1, 1),)),
            MarkTransition(Fraction(1, 2), (Offspring(1, 0), Offspring(1, 0))),
        ),
        intensity=Intensity(Fraction(4), Fraction(1)),
        name="derivative-mix",
    )


def sign_flip_rule():
    """Rare binary branching plus frequent sign flips, intensity 5/(2 beta^2)."""
    return BranchingRule(
        transitions=(
            MarkTransition(Fraction(1, 10), (Offspring(1, 0), Offspring(1, 0))),
            MarkTransition(Fraction(9, 10), (Offspring(-1, 0),)),
        ),
        intensity=Intensity(Fraction(5, 2), Fraction(2)),
        name="sign-flip",
    )


def diffusion_rule():
    """Branch-free rule: a single particle diffuses until it exits."""
    return BranchingRule(
        transitions=(MarkTransition(Fraction(1), (Offspring(1, 0),)),),
        intensity=Intensity(Fraction(0), Fraction(0)),
        name="diffusion",
    )


BUILTIN_RULES = {
    "kpp": kpp_rule,
    "derivative-mix": derivative_mix_rule,
    "sign-flip": sign_flip_rule,
    "diffusion": diffusion_rule,
}


def built_in_rule(name, alpha=None, truncation=8):
    if name == "power-alpha":
        if alpha is None:
            raise ValueError("power-alpha requires an alpha parameter")
        return rule_from_power(alpha, truncation)
    try:
        return BUILTIN_RULES[name]()
    except KeyError:
        raise ValueError(
            f"unknown rule {name!r}; built-ins: kpp, power-alpha, "
            "derivative-mix, sign-flip, diffusion"
        ) from None


def rule_to_dict(rule):
    return {
        "name": rule.name,
        "transitions": [
            {
                "weight": str(t.weight),
                "offspring": [{"sign": s, "dderiv": d} for s, d in t.offspring],
            }
            for t in rule.transitions
        ],
        "intensity": {"c": str(rule.intensity.c), "gamma": str(rule.intensity.gamma)},
    }


def rule_from_dict(data):
    try:
        transitions = tuple(
            MarkTransition(
                Fraction(t["weight"]),
                tuple(Offspring(int(o["sign"]), int(o["dderiv"])) for o in t["offspring"]),
            )
            for t in data["transitions"]
        )
        intensity = Intensity(
            Fraction(data["intensity"]["c"]), Fraction(data["intensity"]["gamma"])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RuleError(f"malformed rule data: {exc}") from exc
    return BranchingRule(
        transitions=transitions, intensity=intensity, name=data.get("name", "")
    )


def save_rule(rule, path):
    with open(path, "w") as fh:
        json.dump(rule_to_dict(rule), fh, indent=2)
        fh.write("\n")


def load_rule(path):
    with open(path) as fh:
        return rule_from_dict(json.load(fh))
