"""Symbolic scale germs ``sum c * exp(a*n) * n^b * log(n)^k`` ordered by eventual dominance.

This fragment is totally ordered: a germ is eventually dominated by its
leading term, and leading terms compare lexicographically on
``(exp_rate, poly_power, log_power)``.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .errors import DomainError, ParseError, UnsupportedGermError

# (exp_rate, poly_power, log_power)
Triple = tuple[Fraction, Fraction, Fraction]
Term = tuple[Fraction, Fraction, Fraction, Fraction]

_ZERO = Fraction(0)


@dataclass(frozen=True)
class GermExpr:
    """Normalized germ: terms sorted by decreasing dominance, no zero coefficients."""

    terms: tuple[Term, ...] = ()

    @classmethod
    def from_terms(cls, terms: Iterable[Iterable]) -> "GermExpr":
        acc: dict[Triple, Fraction] = {}
        for c, e, p, k in terms:
            key = (Fraction(e), Fraction(p), Fraction(k))
            if key[0] < 0:
                raise UnsupportedGermError(f"negative exponential rate {key[0]}")
            acc[key] = acc.get(key, _ZERO) + Fraction(c)
        ordered = sorted((k for k, c in acc.items() if c != 0), reverse=True)
        return cls(tuple((acc[k],) + k for k in ordered))

    @classmethod
    def constant(cls, c) -> "GermExpr":
        return cls.from_terms([(c, 0, 0, 0)])

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def leading(self) -> Term:
        if not self.terms:
            raise DomainError("zero germ has no leading term")
        return self.terms[0]

    @property
    def leading_triple(self) -> Triple:
        return self.leading[1:]

    def __add__(self, other: "GermExpr") -> "GermExpr":
        return GermExpr.from_terms(self.terms + other.terms)

    def __neg__(self) -> "GermExpr":
        return GermExpr(tuple((-c, e, p, k) for c, e, p, k in self.terms))

    def __sub__(self, other: "GermExpr") -> "GermExpr":
        return self + (-other)

    def __mul__(self, other: "GermExpr") -> "GermExpr":
        return GermExpr.from_terms(
            (c1 * c2, e1 + e2, p1 + p2, k1 + k2)
            for c1, e1, p1, k1 in self.terms
            for c2, e2, p2, k2 in other.terms
        )

    def scaled(self, factor) -> "GermExpr":
        return self * GermExpr.constant(factor)

    def log_abs_at(self, n: float) -> tuple[int, float]:
        """``(sign, log|g(n)|)`` evaluated in log space (safe for huge ``n``)."""
        import mpmath

        with mpmath.workdps(60):
            N = mpmath.mpf(n)
            total = mpmath.mpf(0)
            for c, e, p, k in self.terms:
                total += (
                    mpmath.mpf(c.numerator) / c.denominator
                    * mpmath.exp(mpmath.mpf(e.numerator) / e.denominator * N)
                    * mpmath.power(N, mpmath.mpf(p.numerator) / p.denominator)
                    * mpmath.power(mpmath.log(N), mpmath.mpf(k.numerator) / k.denominator)
                )
            if total == 0:
                return 0, -math.inf
            return (1 if total > 0 else -1), float(mpmath.log(abs(total)))

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for c, e, p, k in self.terms:
            factors = []
            if e:
                factors.append("exp(n)" if e == 1 else f"exp({e}*n)")
            if p:
                factors.append("n" if p == 1 else f"n^{_fmt_exp(p)}")
            if k:
                factors.append("log(n)" if k == 1 else f"log(n)^{_fmt_exp(k)}")
            if not factors:
                parts.append(str(c))
            elif c == 1:
                parts.append("*".join(factors))
            elif c == -1:
                parts.append("-" + "*".join(factors))
            else:
                parts.append(f"{_fmt_coef(c)}*" + "*".join(factors))
        text = " + ".join(parts)
        return text.replace("+ -", "- ")


def _fmt_exp(q: Fraction) -> str:
    return str(q) if q.denominator == 1 and q >= 0 else f"({q})"


def _fmt_coef(q: Fraction) -> str:
    return str(q) if q.denominator == 1 else f"({q})"


# ----------------------------------------------------------------------
# parser

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d+)?)|(log|exp|n)|(\*\*|[-+*/^()]))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            bad = len(text) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", text, bad)
        start = m.start(m.lastindex)
        if m.group(1):
            tokens.append(("num", m.group(1), start))
        elif m.group(2):
            tokens.append(("name", m.group(2), start))
        else:
            op = "^" if m.group(3) == "**" else m.group(3)
            tokens.append(("op", op, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self, kind: str | None = None, value: str | None = None) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        if (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            want = value or kind
            got = tok[1] or "end of input"
            raise ParseError(f"expected {want!r}, got {got!r}", self.text, tok[2])
        self.i += 1
        return tok

    def parse(self) -> GermExpr:
        g = self.expr()
        self.take("end")
        return g

    def expr(self) -> GermExpr:
        g = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            g = g + rhs if op == "+" else g - rhs
        return g

    def term(self) -> GermExpr:
        g = self.unary()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            op, pos = self.take()[1:]
            rhs = self.unary()
            if op == "*":
                g = g * rhs
            else:
                g = g * _reciprocal(rhs, self.text, pos)
        return g

    def unary(self) -> GermExpr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return -self.unary()
        if self.peek()[:2] == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> GermExpr:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            pos = self.take()[2]
            exponent = self.exponent()
            return _power(base, exponent, self.text, pos)
        return base

    def exponent(self) -> Fraction:
        sign = 1
        while self.peek()[:2] in (("op", "-"), ("op", "+")):
            if self.take()[1] == "-":
                sign = -sign
        if self.peek()[:2] == ("op", "("):
            pos = self.take()[2]
            inner = self.expr()
            self.take("op", ")")
            if len(inner.terms) > 1 or (inner.terms and inner.leading_triple != (0, 0, 0)):
                raise ParseError("exponent must be a rational constant", self.text, pos)
            value = inner.terms[0][0] if inner.terms else _ZERO
            return sign * value
        tok = self.take("num")
        return sign * Fraction(tok[1])

    def atom(self) -> GermExpr:
        kind, value, pos = self.peek()
        if kind == "num":
            self.take()
            return GermExpr.constant(Fraction(value))
        if kind == "name" and value == "n":
            self.take()
            return GermExpr.from_terms([(1, 0, 1, 0)])
        if kind == "name" and value == "log":
            self.take()
            self.take("op", "(")
            self.take("name", "n")
            self.take("op", ")")
            return GermExpr.from_terms([(1, 0, 0, 1)])
        if kind == "name" and value == "exp":
            self.take()
            self.take("op", "(")
            arg_pos = self.peek()[2]
            arg = self.expr()
            self.take("op", ")")
            return _exponential(arg, self.text, arg_pos)
        if kind == "op" and value == "(":
            self.take()
            g = self.expr()
            self.take("op", ")")
            return g
        raise ParseError(f"unexpected {value or 'end of input'!r}", self.text, pos)


def _reciprocal(g: GermExpr, text: str, pos: int) -> GermExpr:
    if len(g.terms) != 1:
        raise ParseError("can only divide by a single term", text, pos)
    c, e, p, k = g.terms[0]
    if e:
        raise UnsupportedGermError("division by an exponential would need a negative rate")
    return GermExpr.from_terms([(1 / c, 0, -p, -k)])


def _power(g: GermExpr, exponent: Fraction, text: str, pos: int) -> GermExpr:
    if len(g.terms) == 1:
        c, e, p, k = g.terms[0]
        if exponent.denominator == 1:
            coef = c ** int(exponent)
        elif c == 1:
            coef = Fraction(1)
        else:
            raise ParseError("fractional power of a non-unit coefficient", text, pos)
        if e * exponent < 0:
            raise UnsupportedGermError("negative exponential rate")
        return GermExpr.from_terms([(coef, e * exponent, p * exponent, k * exponent)])
    if g.is_zero:
        if exponent <= 0:
            raise DomainError("zero raised to a non-positive power")
        return g
    if exponent.denominator != 1 or exponent < 0:
        raise ParseError("sums may only be raised to nonnegative integer powers", text, pos)
    out = GermExpr.constant(1)
    for _ in range(int(exponent)):
        out = out * g
    return out


def _exponential(arg: GermExpr, text: str, pos: int) -> GermExpr:
    if arg.is_zero:
        return GermExpr.constant(1)
    if len(arg.terms) != 1 or arg.leading_triple != (0, 1, 0):
        raise ParseError("exp() argument must be c*n for a rational c", text, pos)
    rate = arg.terms[0][0]
    if rate < 0:
        raise UnsupportedGermError(f"negative exponential rate {rate}")
    return GermExpr.from_terms([(1, rate, 0, 0)])


def parse_germ(text: str) -> GermExpr:
    """Parse ``text`` into a normalized germ.

    >>> parse_germ("n^2 + n").terms == ((1, 0, 2, 0), (1, 0, 1, 0))
    True
    """
    return _Parser(text).parse()


# ----------------------------------------------------------------------
# order


class Ordering(enum.Enum):
    MUCH_LESS = "<<"
    COMPARABLE = "~"
    MUCH_GREATER = ">>"


@dataclass(frozen=True)
class RatioClass:
    tag: str  # "infinitesimal" | "finite" | "infinite"
    standard_part: Fraction | None = None

    def __str__(self) -> str:
        return self.tag if self.standard_part is None else f"{self.tag} (st={self.standard_part})"


def _require_positive(g: GermExpr, name: str) -> None:
    if g.is_zero:
        raise DomainError(f"{name} is the zero germ")
    if g.leading[0] < 0:
        raise DomainError(f"{name} is eventually negative")


def compare(g1: GermExpr, g2: GermExpr) -> Ordering:
    """Eventual-dominance comparison of two eventually positive germs."""
    _require_positive(g1, "first germ")
    _require_positive(g2, "second germ")
    t1, t2 = g1.leading_triple, g2.leading_triple
    if t1 < t2:
        return Ordering.MUCH_LESS
    if t1 > t2:
        return Ordering.MUCH_GREATER
    return Ordering.COMPARABLE


def ratio_class(num: GermExpr, den: GermExpr) -> RatioClass:
    """Classify ``num/den`` as infinitesimal, finite (with standard part) or infinite."""
    order = compare(num, den)
    if order is Ordering.MUCH_LESS:
        return RatioClass("infinitesimal")
    if order is Ordering.MUCH_GREATER:
        return RatioClass("infinite")
    return RatioClass("finite", num.leading[0] / den.leading[0])


def is_admissible_scale(g: GermExpr) -> bool:
    """True iff ``g >> 1``."""
    return compare(g, GermExpr.constant(1)) is Ordering.MUCH_GREATER


def format_comparison(g1: GermExpr, g2: GermExpr) -> str:
    """CLI rendering: ``"<<"``, ``">>"`` or ``"~ (st=p/q)"``."""
    order = compare(g1, g2)
    if order is Ordering.COMPARABLE:
        st = ratio_class(g1, g2).standard_part
        return f"~ (st={st.numerator}/{st.denominator})"
    return order.value
