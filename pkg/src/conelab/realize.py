"""A space ``Y`` built from ``X`` so that ``X`` reappears as an asymptotic cone of ``Y``.

Points of ``Y`` are pairs ``(x, t)`` with ``x`` in ``X`` and a level
``t >= 1``. Within a level distances are ``t * d(x, x')``, so the slice at
level ``n`` rescaled by ``n`` is an isometric copy of ``X``. Across levels
the path runs through basepoints:

* unbounded variant: ``t*d(x, p_t) + t'*d(p_t', x') + |t - t'|`` with a
  basepoint sequence ``p_t`` escaping to infinity;
* bounded variant: ``n*d(x, p) + n'*d(p, x') + |n^2 - n'^2|`` with one fixed ``p``.

Level 0 is left out: there every distance would vanish.
The interpolating segments that would make ``Y`` geodesic are not modelled.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, InputError, OutOfRangeError
from .metric import (
    FiniteMetric,
    Rational,
    ValidationReport,
    Violation,
    as_rational,
    format_rational,
    labeled_distortion,
    rescale,
    validate_metric,
)

VARIANTS = ("unbounded", "bounded")
DEFAULT_LEVEL_CAP = 1000


@dataclass(frozen=True)
class RealizationPoint:
    x: str
    level: int

    def __str__(self) -> str:
        return f"({self.x},{self.level})"


@dataclass(frozen=True, eq=False)
class RealizationSpace:
    base: FiniteMetric
    variant: str
    basepoints: tuple[str, ...]  # p_0..p_cap (unbounded) or (p,) (bounded)
    level_cap: int

    def basepoint(self, level: int) -> str:
        return self.basepoints[0] if self.variant == "bounded" else self.basepoints[level]

    def point(self, x: str, level: int) -> RealizationPoint:
        self.base.index(x)
        self._check_level(level)
        return RealizationPoint(str(x), int(level))

    def _check_level(self, level: int) -> None:
        if not 1 <= level <= self.level_cap:
            raise OutOfRangeError(f"level {level} outside 1..{self.level_cap}")

    def to_json(self) -> dict[str, Any]:
        bp = list(self.basepoints)
        return {
            "variant": self.variant,
            "level_cap": self.level_cap,
            "base_size": len(self.base),
            "basepoints": bp if len(bp) <= 20 else bp[:10] + ["..."] + bp[-5:],
        }


def build_realization(
    x: FiniteMetric,
    variant: str,
    basepoints: Sequence[str] | Mapping[int, str] | str,
    level_cap: int = DEFAULT_LEVEL_CAP,
) -> RealizationSpace:
    """Validate the base and the basepoint data, then return the distance oracle's space.

    The unbounded variant needs ``p_0 .. p_cap``; the prefix is screened by
    requiring ``d(p_0, p_n)`` to increase strictly with ``n`` (a bounded
    base can pass this only up to a finite level).
    """
    if variant not in VARIANTS:
        raise InputError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if level_cap < 1:
        raise InputError("level_cap must be at least 1")
    report = validate_metric(x)
    if not report.ok:
        v = report.violations[0]
        raise InputError(f"base is not a metric: {v.kind} at {list(v.witness)}")
    if variant == "bounded":
        p = basepoints if isinstance(basepoints, str) else _single(basepoints)
        x.index(p)
        return RealizationSpace(x, variant, (str(p),), level_cap)
    if isinstance(basepoints, str):
        raise InputError("the unbounded variant needs a basepoint sequence p_0, p_1, ...")
    if isinstance(basepoints, Mapping):
        try:
            seq = [str(basepoints[n]) for n in range(level_cap + 1)]
        except KeyError as exc:
            raise InputError(f"no basepoint for level {exc.args[0]}") from None
    else:
        seq = [str(b) for b in basepoints]
    if len(seq) < level_cap + 1:
        raise InputError(f"need basepoints for levels 0..{level_cap}, got {len(seq)}")
    seq = seq[: level_cap + 1]
    i0 = x.index(seq[0])
    prev = None
    for n, lab in enumerate(seq):
        d = x.dist(i0, x.index(lab))
        if prev is not None and d <= prev:
            raise InputError(
                f"d(p_0, p_n) must increase strictly along the prefix; "
                f"level {n} gives {format_rational(d)} after {format_rational(prev)}"
            )
        prev = d
    return RealizationSpace(x, variant, tuple(seq), level_cap)


def _single(basepoints) -> str:
    items = list(basepoints.values()) if isinstance(basepoints, Mapping) else list(basepoints)
    if len(set(items)) != 1:
        raise InputError("the bounded variant takes a single basepoint")
    return str(items[0])


def realization_distance(y: RealizationSpace, u: RealizationPoint, v: RealizationPoint) -> Rational:
    m = y.base
    y._check_level(u.level)
    y._check_level(v.level)
    i, j = m.index(u.x), m.index(v.x)
    t, s = u.level, v.level
    if t == s:
        return as_rational(t * m.dist(i, j))
    if y.variant == "unbounded":
        pt, ps = m.index(y.basepoints[t]), m.index(y.basepoints[s])
        return as_rational(t * m.dist(i, pt) + s * m.dist(ps, j) + abs(t - s))
    p = m.index(y.basepoints[0])
    return as_rational(t * m.dist(i, p) + s * m.dist(p, j) + abs(t * t - s * s))


Distance = Callable[[RealizationSpace, RealizationPoint, RealizationPoint], Rational]


# ----------------------------------------------------------------------
# axiom checks


def _check_triple(y, dist: Distance, a, b, c, out: list[Violation]) -> None:
    pts = (a, b, c)
    d = {}
    for u in pts:
        for v in pts:
            d[u, v] = dist(y, u, v)
    for u in pts:
        if d[u, u] != 0:
            out.append(Violation("self-distance", (str(u),), d[u, u]))
    for u, v in ((a, b), (b, c), (a, c)):
        if d[u, v] != d[v, u]:
            out.append(Violation("asymmetry", (str(u), str(v)), abs(d[u, v] - d[v, u])))
        if d[u, v] < 0:
            out.append(Violation("negative", (str(u), str(v)), -d[u, v]))
        elif u != v and d[u, v] == 0:
            out.append(Violation("zero-distance", (str(u), str(v)), 0))
    for u, v, w in ((a, b, c), (b, c, a), (c, a, b)):
        # d(u, w) <= d(u, v) + d(v, w)
        excess = d[u, w] - d[u, v] - d[v, w]
        if excess > 0:
            out.append(Violation("triangle", (str(u), str(v), str(w)), as_rational(excess)))


def _dedup(violations: list[Violation], limit: int | None = None) -> tuple[Violation, ...]:
    seen = set()
    out = []
    for v in violations:
        key = (v.kind, v.witness)
        if key not in seen:
            seen.add(key)
            out.append(v)
            if limit is not None and len(out) >= limit:
                break
    return tuple(out)


def check_metric_axioms(
    y: RealizationSpace,
    triple_count: int = 10_000,
    seed: int = 42,
    distance: Distance | None = None,
    max_violations: int = 100,
) -> ValidationReport:
    """Seeded random triples checked for symmetry, identity and the triangle inequality.

    Half of the sampled points sit on the basepoint of their level, where
    the cross-level formula is most delicate. At most ``max_violations``
    distinct witnesses are kept, in sampling order.
    """
    if triple_count < 1:
        raise InputError("triple_count must be at least 1")
    dist = distance or realization_distance
    rng = np.random.default_rng(seed)
    labels = y.base.labels
    levels = rng.integers(1, y.level_cap + 1, size=(triple_count, 3))
    on_base = rng.random(size=(triple_count, 3)) < 0.5
    picks = rng.integers(0, len(labels), size=(triple_count, 3))
    found: list[Violation] = []
    for k in range(triple_count):
        pts = []
        for c in range(3):
            t = int(levels[k, c])
            x = y.basepoint(t) if on_base[k, c] else labels[int(picks[k, c])]
            pts.append(RealizationPoint(x, t))
        _check_triple(y, dist, *pts, found)
    return ValidationReport(_dedup(found, max_violations))


def exhaustive_axiom_check(
    y: RealizationSpace, max_level: int | None = None, distance: Distance | None = None
) -> ValidationReport:
    """Every triple of points with levels ``1..max_level`` (default: the cap)."""
    top = y.level_cap if max_level is None else min(max_level, y.level_cap)
    dist = distance or realization_distance
    pts = [RealizationPoint(x, t) for t in range(1, top + 1) for x in y.base.labels]
    n = len(pts)
    table = [[dist(y, pts[i], pts[j]) for j in range(n)] for i in range(n)]
    m = FiniteMetric([str(p) for p in pts], table)
    return validate_metric(m)


# ----------------------------------------------------------------------
# slices and cone recovery


def level_slice(y: RealizationSpace, n: int) -> FiniteMetric:
    """The level-``n`` copy of the base with the realized distances, labelled as the base."""
    y._check_level(n)
    labels = y.base.labels
    pts = [RealizationPoint(x, n) for x in labels]
    return FiniteMetric(labels, [[realization_distance(y, u, v) for v in pts] for u in pts])


def slice_isometry_check(y: RealizationSpace, n: int) -> Rational:
    """Distortion between the level-``n`` slice rescaled by ``n`` and the base (always 0)."""
    if n < 1:
        raise InputError("slice level must be at least 1")
    return labeled_distortion(rescale(level_slice(y, n), n), y.base)


@dataclass(frozen=True)
class OffSliceReport:
    n: int
    bound: Rational  # n * d(p_0, p_n), or n for the bounded variant
    min_ratio: Rational
    witness: tuple[str, int]
    samples: int
    ok: bool

    def to_json(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "bound": format_rational(self.bound),
            "min_ratio": format_rational(self.min_ratio),
            "witness": [self.witness[0], self.witness[1]],
            "samples": self.samples,
            "ok": self.ok,
        }


def _off_slice(y: RealizationSpace, n: int, sample_count: int, seed: int) -> OffSliceReport:
    y._check_level(n)
    if y.level_cap < 2:
        raise InputError("off-slice sampling needs at least two levels")
    if sample_count < 1:
        raise InputError("sample_count must be at least 1")
    m = y.base
    p0 = y.basepoints[0]
    if y.variant == "unbounded":
        bound = as_rational(n * m.dist(m.index(p0), m.index(y.basepoints[n])))
    else:
        bound = n
    rng = np.random.default_rng(seed)
    # levels 1..cap without n
    ts = rng.integers(1, y.level_cap, size=sample_count)
    ts = ts + (ts >= n)
    xs = rng.integers(0, len(m), size=sample_count)
    centre = RealizationPoint(p0, n)
    best = None
    for t, xi in zip(ts.tolist(), xs.tolist()):
        u = RealizationPoint(m.labels[xi], t)
        ratio = Fraction(realization_distance(y, centre, u)) / bound
        if best is None or ratio < best[0]:
            best = (ratio, (u.x, t))
    ratio, witness = best
    ok = ratio >= 1 if y.variant == "unbounded" else True
    return OffSliceReport(n, bound, as_rational(ratio), witness, sample_count, ok)


def off_slice_bound_check(
    y: RealizationSpace, n: int, sample_count: int = 10_000, seed: int = 42
) -> OffSliceReport:
    """Sampled ``(x, t)``, ``t != n``: ``d((p_0, n), (x, t)) >= n * d(p_0, p_n)``."""
    if y.variant != "unbounded":
        raise DomainError("the off-slice bound applies to the unbounded variant only")
    return _off_slice(y, n, sample_count, seed)


def escape_profile(y: RealizationSpace, n: int, levels: Iterable[int]) -> list[tuple[int, Rational]]:
    """``min_x d((p_0, n), (x, t))`` for each level ``t``."""
    centre = RealizationPoint(y.basepoints[0], n)
    out = []
    for t in levels:
        best = min(realization_distance(y, centre, RealizationPoint(x, t)) for x in y.base.labels)
        out.append((t, best))
    return out


@dataclass(frozen=True)
class RecoveryRecord:
    n: int
    distortion: Rational
    off_slice: OffSliceReport | None

    @property
    def ok(self) -> bool:
        return self.distortion == 0 and (self.off_slice is None or self.off_slice.ok)

    def to_json(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "distortion": format_rational(self.distortion),
            "off_slice": None if self.off_slice is None else self.off_slice.to_json(),
            "ok": self.ok,
        }


@dataclass(frozen=True)
class RecoveryReport:
    records: tuple[RecoveryRecord, ...]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.records)

    def to_json(self) -> dict[str, Any]:
        return {"records": [r.to_json() for r in self.records], "ok": self.ok}


def cone_recovery_check(
    y: RealizationSpace, schedule: Iterable[int], sample_count: int = 1000, seed: int = 42
) -> RecoveryReport:
    """Per level ``n``: slice distortion (must be 0) and the off-slice escape.

    For the unbounded variant the escape ratio must be at least 1; for the
    bounded variant the ratio ``d / n`` is reported without a pass/fail bar.
    """
    records = []
    for n in schedule:
        n = int(n)
        distortion = slice_isometry_check(y, n)
        off = _off_slice(y, n, sample_count, seed) if y.level_cap >= 2 and len(y.base) else None
        records.append(RecoveryRecord(n, distortion, off))
    return RecoveryReport(tuple(records))


def drop_level_gap(y: RealizationSpace, u: RealizationPoint, v: RealizationPoint) -> Rational:
    """The unbounded formula without its ``|t - t'|`` term (a deliberately broken oracle)."""
    m = y.base
    t, s = u.level, v.level
    i, j = m.index(u.x), m.index(v.x)
    if t == s:
        return as_rational(t * m.dist(i, j))
    pt, ps = m.index(y.basepoint(t)), m.index(y.basepoint(s))
    return as_rational(t * m.dist(i, pt) + s * m.dist(ps, j))
