"""Exact truncated power series in beta over polynomial symbols (u, u_x).

All coefficients are ``fractions.Fraction``.  Beta exponents are Fractions as
well (intensities k_beta = c*beta^-gamma may have rational gamma), and may be
negative.  Truncation is tracked explicitly: a series with ``cutoff = C`` is
known modulo O(beta^C); ``cutoff = None`` means the series is exact.
"""

from __future__ import annotations

from fractions import Fraction
from math import inf


def _as_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, str)):
        return Fraction(x)
    raise TypeError(f"expected exact rational, got {type(x).__name__}: {x!r}")


def _min_cut(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


class BetaSeries:
    """Truncated Laurent-style series in beta with exact rational coefficients."""

    __slots__ = ("terms", "cutoff")

    def __init__(self, terms=None, cutoff=None):
        self.cutoff = None if cutoff is None else _as_fraction(cutoff)
        clean = {}
        if terms:
            for e, c in terms.items():
                e = _as_fraction(e)
                c = _as_fraction(c)
                if c == 0:
                    continue
                if self.cutoff is not None and e >= self.cutoff:
                    continue
                clean[e] = clean.get(e, Fraction(0)) + c
        self.terms = {e: c for e, c in clean.items() if c != 0}

    @classmethod
    def constant(cls, c):
        return cls({Fraction(0): _as_fraction(c)})

    @classmethod
    def zero(cls):
        return cls({})

    def is_zero(self):
        return not self.terms

    def effective_min(self):
        """Smallest exponent at which this series can carry mass (inf if exact zero)."""
        if self.terms:
            return min(self.terms)
        if self.cutoff is not None:
            return self.cutoff
        return inf

    def __add__(self, other):
        cut = _min_cut(self.cutoff, other.cutoff)
        merged = dict(self.terms)
        for e, c in other.terms.items():
            merged[e] = merged.get(e, Fraction(0)) + c
        return BetaSeries(merged, cut)

    def __sub__(self, other):
        return self + other.scale(Fraction(-1))

    def __neg__(self):
        return self.scale(Fraction(-1))

    def scale(self, c):
        c = _as_fraction(c)
        return BetaSeries({e: c * v for e, v in self.terms.items()}, self.cutoff)

    def shift(self, exponent, coeff=1):
        """Multiply by coeff * beta**exponent."""
        exponent = _as_fraction(exponent)
        coeff = _as_fraction(coeff)
        cut = None if self.cutoff is None else self.cutoff + exponent
        return BetaSeries(
            {e + exponent: coeff * v for e, v in self.terms.items()}, cut
        )

    def __mul__(self, other):
        cuts = []
        if self.cutoff is not None:
            m = other.effective_min()
            if m is not inf:
                cuts.append(self.cutoff + m)
        if other.cutoff is not None:
            m = self.effective_min()
            if m is not inf:
                cuts.append(other.cutoff + m)
        cut = min(cuts) if cuts else None
        prod = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = e1 + e2
                if cut is not None and e >= cut:
                    continue
                prod[e] = prod.get(e, Fraction(0)) + c1 * c2
        return BetaSeries(prod, cut)

    def truncate(self, cutoff):
        cutoff = _as_fraction(cutoff)
        if self.cutoff is None and all(e < cutoff for e in self.terms):
            return self  # exact and nothing dropped: stays exact
        return BetaSeries(self.terms, _min_cut(self.cutoff, cutoff))

    def coefficient(self, exponent):
        return self.terms.get(_as_fraction(exponent), Fraction(0))

    def __eq__(self, other):
        return (
            isinstance(other, BetaSeries)
            and self.terms == other.terms
            and self.cutoff == other.cutoff
        )

    def __hash__(self):
        return hash((frozenset(self.terms.items()), self.cutoff))

    def __repr__(self):
        if not self.terms:
            body = "0"
        else:
            parts = []
            for e in sorted(self.terms):
                c = self.terms[e]
                if e == 0:
                    parts.append(f"{c}")
                else:
                    parts.append(f"{c}*b^{e}")
            body = " + ".join(parts)
        tail = "" if self.cutoff is None else f" + O(b^{self.cutoff})"
        return f"BetaSeries({body}{tail})"


class FormalSeries:
    """Polynomial in the symbols u, u_x with BetaSeries coefficients.

    Keys are monomials (a, b) meaning u**a * u_x**b.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {}
        if terms:
            for mono, s in terms.items():
                a, b = mono
                if not (isinstance(a, int) and isinstance(b, int) and a >= 0 and b >= 0):
                    raise ValueError(f"bad monomial {mono}")
                if not isinstance(s, BetaSeries):
                    s = BetaSeries(s)
                if s.is_zero() and s.cutoff is None:
                    continue
                if mono in self.terms:
                    s = self.terms[mono] + s
                self.terms[mono] = s

    @classmethod
    def constant(cls, c):
        return cls({(0, 0): BetaSeries.constant(c)})

    @classmethod
    def one(cls):
        return cls.constant(1)

    @classmethod
    def zero(cls):
        return cls({})

    @classmethod
    def monomial(cls, a, b, series):
        return cls({(a, b): series})

    def __add__(self, other):
        merged = dict(self.terms)
        for mono, s in other.terms.items():
            merged[mono] = merged[mono] + s if mono in merged else s
        return FormalSeries(merged)

    def __sub__(self, other):
        return self + other.scale(Fraction(-1))

    def __neg__(self):
        return self.scale(Fraction(-1))

    def scale(self, c):
        return FormalSeries({m: s.scale(c) for m, s in self.terms.items()})

    def shift(self, exponent, coeff=1):
        return FormalSeries(
            {m: s.shift(exponent, coeff) for m, s in self.terms.items()}
        )

    def __mul__(self, other):
        out = {}
        for (a1, b1), s1 in self.terms.items():
            for (a2, b2), s2 in other.terms.items():
                mono = (a1 + a2, b1 + b2)
                prod = s1 * s2
                out[mono] = out[mono] + prod if mono in out else prod
        return FormalSeries(out)

    def __pow__(self, n):
        if not (isinstance(n, int) and n >= 0):
            raise ValueError("integer power >= 0 only")
        result = FormalSeries.one()
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def truncate(self, cutoff):
        return FormalSeries({m: s.truncate(cutoff) for m, s in self.terms.items()})

    def beta_min(self):
        """Smallest beta exponent carrying a nonzero coefficient (inf if zero)."""
        m = inf
        for s in self.terms.values():
            if s.terms:
                m = min(m, min(s.terms))
        return m

    def dx(self):
        """Formal spatial derivative, with d/dx u**a = a u**(a-1) u_x.

        Only defined for series that are free of u_x (a second derivative
        symbol would otherwise be needed)."""
        out = FormalSeries.zero()
        for (a, b), s in self.terms.items():
            if b != 0:
                raise ValueError("formal dx would introduce u_xx; series has u_x")
            if a == 0:
                continue
            out = out + FormalSeries.monomial(a - 1, 1, s.scale(a))
        return out

    def cutoff_min(self):
        cuts = [s.cutoff for s in self.terms.values() if s.cutoff is not None]
        return min(cuts) if cuts else None

    def coefficient(self, a, b, exponent=0):
        s = self.terms.get((a, b))
        return s.coefficient(exponent) if s is not None else Fraction(0)

    def coefficient_map(self, exponent=0):
        """Monomial -> coefficient at a fixed beta power (zero entries dropped)."""
        out = {}
        for mono, s in self.terms.items():
            c = s.coefficient(exponent)
            if c != 0:
                out[mono] = c
        return out

    def compact(self):
        """Drop monomials whose series are identically zero (keeping cutoffs is moot)."""
        return FormalSeries(
            {m: s for m, s in self.terms.items() if not s.is_zero()}
        )

    def substitute_beta_one(self):
        """Collapse beta -> 1; requires every coefficient series to be exact."""
        out = {}
        for mono, s in self.terms.items():
            if s.cutoff is not None:
                raise ValueError("cannot substitute beta=1 into a truncated series")
            total = sum(s.terms.values(), Fraction(0))
            if total != 0:
                out[mono] = BetaSeries.constant(total)
        return FormalSeries(out)

    def __eq__(self, other):
        if not isinstance(other, FormalSeries):
            return NotImplemented
        a = {m: s for m, s in self.compact().terms.items()}
        b = {m: s for m, s in other.compact().terms.items()}
        if set(a) != set(b):
            return False
        return all(a[m].terms == b[m].terms for m in a)

    def __repr__(self):
        if not self.terms:
            return "FormalSeries(0)"
        parts = [
            f"{mono_str(m)}: {s!r}" for m, s in sorted(self.terms.items())
        ]
        return "FormalSeries({" + ", ".join(parts) + "})"


def mono_str(mono):
    a, b = mono
    pieces = []
    if a == 1:
        pieces.append("u")
    elif a > 1:
        pieces.append(f"u^{a}")
    if b == 1:
        pieces.append("u_x")
    elif b > 1:
        pieces.append(f"u_x^{b}")
    return "*".join(pieces) if pieces else "1"


def polynomial_str(coeffs):
    """Render {monomial: Fraction} as e.g. 'u^2 - u'; highest degree first."""
    if not coeffs:
        return "0"
    keys = sorted(coeffs, key=lambda m: (m[0] + m[1], m[0]), reverse=True)
    out = []
    for m in keys:
        c = coeffs[m]
        mag = abs(c)
        body = mono_str(m)
        if body == "1":
            piece = f"{mag}"
        elif mag == 1:
            piece = body
        else:
            piece = f"{mag} {body}" if mag.denominator > 1 else f"{mag}*{body}"
        if not out:
            out.append(piece if c > 0 else f"-{piece}")
        else:
            out.append(f"+ {piece}" if c > 0 else f"- {piece}")
    return " ".join(out)


def exp_series(s, cutoff):
    """exp of a FormalSeries whose beta-valuation is strictly positive.

    The expansion Sum s^k / k! terminates once k * beta_min(s) >= cutoff."""
    m = s.beta_min()
    if m is inf:
        return FormalSeries.one().truncate(cutoff)
    if m <= 0:
        raise ValueError("exp_series needs strictly positive beta valuation")
    s = s.truncate(cutoff)
    result = FormalSeries.one()
    power = FormalSeries.one()
    k = 0
    fact = Fraction(1)
    while (k + 1) * m < cutoff:
        k += 1
        fact *= k
        power = (power * s).truncate(cutoff)
        result = result + power.scale(Fraction(1) / fact)
    return result.truncate(cutoff)


def binomial_series(s, alpha, cutoff):
    """(1 + s)**alpha for rational alpha; s needs positive beta-valuation."""
    alpha = _as_fraction(alpha)
    m = s.beta_min()
    if m is inf:
        return FormalSeries.one().truncate(cutoff)
    if m <= 0:
        raise ValueError("binomial_series needs strictly positive beta valuation")
    s = s.truncate(cutoff)
    result = FormalSeries.one()
    power = FormalSeries.one()
    k = 0
    coeff = Fraction(1)
    while (k + 1) * m < cutoff:
        k += 1
        coeff *= (alpha - (k - 1)) / k
        power = (power * s).truncate(cutoff)
        if coeff != 0:
            result = result + power.scale(coeff)
    return result.truncate(cutoff)


def log1p_series(s, cutoff):
    """log(1 + s) for a FormalSeries with positive beta-valuation."""
    m = s.beta_min()
    if m is inf:
        return FormalSeries.zero().truncate(cutoff)
    if m <= 0:
        raise ValueError("log1p_series needs strictly positive beta valuation")
    s = s.truncate(cutoff)
    result = FormalSeries.zero()
    power = FormalSeries.one()
    k = 0
    while (k + 1) * m < cutoff:
        k += 1
        power = (power * s).truncate(cutoff)
        result = result + power.scale(Fraction((-1) ** (k + 1), k))
    return result.truncate(cutoff)
