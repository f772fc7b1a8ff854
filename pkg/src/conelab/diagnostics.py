"""Properness, separability and box-counting diagnostics across scale schedules.

A cone is probed through finite scales ``nu``: the packing count
``F(p, 0, R*nu, eps*nu)`` on the unscaled source (equal to ``F(p, 0, R, eps)``
on the view rescaled by ``nu``) either settles or keeps growing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np

from .cayley import BallSpace, CayleyBall, GroupFamily, ball
from .errors import InputError
from .germ import GermExpr
from .metric import Rational, as_rational, format_rational, rescale
from .packing import (
    DEFAULT_EXACT_CAP,
    PackingQuery,
    PackingResult,
    _farthest_first,
    canonical_rank,
    packing_number,
    verify_test_set,
)


@dataclass(frozen=True)
class ScaleSchedule:
    scales: tuple[Rational, ...]
    germ_label: GermExpr | None = None

    def __post_init__(self):
        scales = tuple(as_rational(s) for s in self.scales)
        if not scales:
            raise InputError("a scale schedule needs at least one scale")
        if scales[0] <= 0:
            raise InputError("scales must be positive")
        if any(a >= b for a, b in zip(scales, scales[1:])):
            raise InputError("scales must be strictly increasing")
        object.__setattr__(self, "scales", scales)

    @classmethod
    def parse(cls, text: str, germ_label: GermExpr | None = None) -> "ScaleSchedule":
        items = [t.strip() for t in text.split(",") if t.strip()]
        return cls(tuple(as_rational(t) for t in items), germ_label)

    def __iter__(self):
        return iter(self.scales)

    def __len__(self) -> int:
        return len(self.scales)

    def to_json(self) -> dict[str, Any]:
        return {
            "scales": [format_rational(s) for s in self.scales],
            "germ_label": None if self.germ_label is None else str(self.germ_label),
        }


# ----------------------------------------------------------------------
# sources


def _sources(source, schedule: ScaleSchedule, R: Rational, cap: int | None):
    """One space per scale, each covering the radius ``R * nu`` around the basepoint.

    ``source`` may be a group family (one ball of the largest needed radius
    is built and restricted), a single ``CayleyBall``, a mapping from scale
    to space, or any space used unchanged at every scale.
    """
    needed = [math.ceil(R * nu) for nu in schedule]
    if isinstance(source, GroupFamily):
        kwargs = {} if cap is None else {"cap": cap}
        big = ball(source, max(needed), **kwargs)
        return [BallSpace(big.restrict(r)) for r in needed]
    if isinstance(source, CayleyBall):
        for nu, r in zip(schedule, needed):
            if source.radius < r:
                raise InputError(
                    f"scale {format_rational(nu)} needs a ball of radius {r}, "
                    f"source has radius {source.radius}"
                )
        return [BallSpace(source.restrict(r)) for r in needed]
    if isinstance(source, Mapping):
        out = []
        for nu in schedule:
            space = source.get(nu)
            if space is None:
                raise InputError(f"no source space for scale {format_rational(nu)}")
            if isinstance(space, CayleyBall):
                r = math.ceil(R * nu)
                if space.radius < r:
                    raise InputError(
                        f"scale {format_rational(nu)} needs a ball of radius {r}, "
                        f"source has radius {space.radius}"
                    )
                space = BallSpace(space)
            out.append(space)
        return out
    return [source] * len(schedule)


def _basepoint(space, p: str | None) -> str:
    if p is not None:
        return str(p)
    if isinstance(space, BallSpace):
        return space.labels[0]
    raise InputError("a basepoint is required for metric sources")


# ----------------------------------------------------------------------
# properness


@dataclass(frozen=True)
class ScaleRecord:
    scale: Rational
    query: PackingQuery
    result: PackingResult

    def to_json(self) -> dict[str, Any]:
        r = self.result
        return {
            "scale": format_rational(self.scale),
            "query": self.query.to_json(),
            "lower": r.lower,
            "upper": r.upper,
            "exact": r.exact,
            "annulus_size": r.annulus_size,
            "witness_size": len(r.witness),
        }


def properness_verdict(results: Sequence[PackingResult]) -> str:
    """``bounded-evidence``: the two largest scales are solved exactly with equal values.
    ``unbounded-evidence``: lower bounds strictly increase over the last three scales.
    """
    if len(results) >= 3:
        a, b, c = (r.lower for r in results[-3:])
        if a < b < c:
            return "unbounded-evidence"
    tail = results[-2:]
    if all(r.exact for r in tail) and len({r.lower for r in tail}) == 1:
        return "bounded-evidence"
    return "inconclusive"


@dataclass(frozen=True)
class PropernessReport:
    schedule: ScaleSchedule
    R: Rational
    eps: Rational
    records: tuple[ScaleRecord, ...]
    verdict: str

    def to_json(self) -> dict[str, Any]:
        return {
            "schedule": self.schedule.to_json(),
            "R": format_rational(self.R),
            "eps": format_rational(self.eps),
            "records": [r.to_json() for r in self.records],
            "verdict": self.verdict,
        }


def _check_R_eps(R, eps, allow_equal: bool = False) -> tuple[Rational, Rational]:
    R, eps = as_rational(R), as_rational(eps)
    if not (0 < eps <= R if allow_equal else 0 < eps < R):
        bound = "<=" if allow_equal else "<"
        raise InputError(f"need 0 < eps {bound} R, got eps={eps}, R={R}")
    return R, eps


def properness_diagnostic(
    source,
    schedule: ScaleSchedule | Sequence,
    p: str | None = None,
    R: Rational = 1,
    eps: Rational = Fraction(1, 4),
    exact_cap: int = DEFAULT_EXACT_CAP,
    cap: int | None = None,
    executor=None,
) -> PropernessReport:
    """Packing bounds for ``F(p, 0, R*nu, eps*nu)`` at every scale ``nu`` of the schedule.

    ``executor`` (a ``concurrent.futures`` executor) runs the scales
    concurrently; the report does not depend on it.
    """
    R, eps = _check_R_eps(R, eps)
    if not isinstance(schedule, ScaleSchedule):
        schedule = ScaleSchedule(tuple(schedule))
    spaces = _sources(source, schedule, R, cap)
    queries = [
        PackingQuery(_basepoint(sp, p), 0, R * nu, eps * nu) for sp, nu in zip(spaces, schedule)
    ]

    def run(k: int) -> PackingResult:
        return packing_number(spaces[k], queries[k], exact_cap)

    if executor is None:
        results = [run(k) for k in range(len(spaces))]
    else:
        results = list(executor.map(run, range(len(spaces))))
    records = tuple(ScaleRecord(nu, q, r) for nu, q, r in zip(schedule, queries, results))
    return PropernessReport(schedule, R, eps, records, properness_verdict(results))


# ----------------------------------------------------------------------
# separability


@dataclass(frozen=True)
class SeparabilityReport:
    lower: int
    upper: int
    exact: bool
    disjoint_balls: int
    flag: str

    def to_json(self) -> dict[str, Any]:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "exact": self.exact,
            "disjoint_balls": self.disjoint_balls,
            "flag": self.flag,
        }


def separability_evidence(
    m, p: str, R: Rational, eps: Rational, exact_cap: int = DEFAULT_EXACT_CAP
) -> SeparabilityReport:
    """An ``eps``-separated family in ``B(p, R)`` gives as many disjoint open ``eps/2``-balls.

    ``eps = R`` is allowed here: it counts branch directions of the ball.
    """
    R, eps = _check_R_eps(R, eps, allow_equal=True)
    res = packing_number(m, PackingQuery(p, 0, R, eps), exact_cap)
    flag = "separability-consistent" if res.exact else "anti-separability-evidence at this scale"
    return SeparabilityReport(res.lower, res.upper, res.exact, res.lower, flag)


# ----------------------------------------------------------------------
# covering


def greedy_cover(space, p: str, radius: Rational, within: Rational | None = None) -> list[int]:
    """Centres of a greedy closed-ball cover of ``B(p, within)``.

    Farthest-from-``p`` points are seeded first, ties in canonical order;
    every still-uncovered point becomes a centre, so centres are pairwise
    more than ``radius`` apart.
    """
    pi = space.index(p)
    ds = space.dists_from(pi)
    members = range(len(ds)) if within is None else [i for i, d in enumerate(ds) if d <= within]
    inside = set(members)
    covered: set[int] = set()
    centres = []
    for i in _farthest_first(list(members), ds, canonical_rank(space)):
        if i in covered:
            continue
        centres.append(i)
        covered.update(j for j in space.within(i, radius) if j in inside)
    return centres


def _next_distance_above(space, members: Sequence[int], t: Rational) -> Rational | None:
    best = None
    inside = set(members)
    for i in members:
        for j, d in enumerate(space.dists_from(i)):
            if d > t and j in inside and (best is None or d < best):
                best = d
    return best


@dataclass(frozen=True)
class SandwichRecord:
    eps: Rational
    cover: int
    pack_double: PackingResult | None  # separation strictly above 2*eps
    separation_above_eps: Rational | None
    centres_separated: bool

    @property
    def holds(self) -> bool:
        lower_ok = self.pack_double is None or self.pack_double.lower <= self.cover
        return lower_ok and self.centres_separated

    def to_json(self) -> dict[str, Any]:
        pd = self.pack_double
        return {
            "eps": format_rational(self.eps),
            "cover": self.cover,
            "pack_above_2eps": None if pd is None else pd.to_json(),
            "separation_above_eps": None
            if self.separation_above_eps is None
            else format_rational(self.separation_above_eps),
            "centres_separated": self.centres_separated,
            "holds": self.holds,
        }


def covering_sandwich(
    m, p: str, R: Rational, eps: Rational, exact_cap: int = DEFAULT_EXACT_CAP
) -> SandwichRecord:
    """``pack(>2 eps) <= cover(eps) <= pack(>eps)`` on ``B(p, R)``.

    Two points in one closed ``eps``-ball are at most ``2 eps`` apart, which
    gives the left inequality; greedy centres are more than ``eps`` apart and
    themselves witness the right one. Strict separation ``> t`` is expressed
    as ``>= `` the next distance value above ``t``.
    """
    R, eps = as_rational(R), as_rational(eps)
    pi = m.index(p)
    members = [i for i, d in enumerate(m.dists_from(pi)) if d <= R]
    centres = greedy_cover(m, p, eps, R)
    l2 = _next_distance_above(m, members, 2 * eps)
    pack2 = None if l2 is None else packing_number(m, PackingQuery(p, 0, R, l2), exact_cap)
    l1 = _next_distance_above(m, members, eps)
    if l1 is None:
        separated = len(centres) <= 1
    else:
        separated = verify_test_set(m, PackingQuery(p, 0, R, l1), [m.labels[i] for i in centres])
    return SandwichRecord(eps, len(centres), pack2, l1, separated)


# ----------------------------------------------------------------------
# box counting


@dataclass(frozen=True)
class MinkowskiEstimate:
    exponent: float
    pairs: tuple[tuple[Rational, int], ...]
    fit_residual: float

    @property
    def monotone(self) -> bool:
        """Covering counts never drop as the radius shrinks."""
        ks = [k for _, k in self.pairs]
        return all(a <= b for a, b in zip(ks, ks[1:]))

    def to_json(self) -> dict[str, Any]:
        return {
            "exponent": round(self.exponent, 12),
            "pairs": [[format_rational(r), k] for r, k in self.pairs],
            "fit_residual": round(self.fit_residual, 12),
            "monotone": self.monotone,
        }


def minkowski_estimate(m, p: str, radii: Sequence) -> MinkowskiEstimate:
    """Box-counting exponent of the closed unit ball ``B(p, 1)`` of ``m``.

    For each radius a greedy cover count ``k`` is taken; the exponent is the
    least-squares slope of ``log k`` against ``log(1/r)``.
    """
    rs = [as_rational(r) for r in radii]
    if not rs:
        raise InputError("radii list is empty")
    if any(not 0 < r <= 1 for r in rs):
        raise InputError("radii must lie in (0, 1]")
    if any(a <= b for a, b in zip(rs, rs[1:])):
        raise InputError("radii must be strictly decreasing")
    pairs = tuple((r, len(greedy_cover(m, p, r, 1))) for r in rs)
    ks = [k for _, k in pairs]
    if len(set(ks)) == 1 or len(rs) == 1:
        return MinkowskiEstimate(0.0, pairs, 0.0)
    x = np.log([1 / float(r) for r in rs])
    y = np.log(np.array(ks, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return MinkowskiEstimate(float(slope), pairs, residual)


def group_minkowski(g: GroupFamily, nu: int, radii: Sequence, cap: int | None = None) -> MinkowskiEstimate:
    """Box-counting exponent of the radius-``nu`` Cayley ball rescaled to a unit ball."""
    kwargs = {} if cap is None else {"cap": cap}
    sp = BallSpace(ball(g, nu, **kwargs))
    return minkowski_estimate(rescale(sp, nu), sp.labels[0], radii)
