"""Real-tree diagnostics: four-point delta, valency profiles, branch isolation.

A metric is a tree metric iff every quadruple satisfies the four-point
condition with ``delta = 0``. Valency at ``p`` is read off as the packing
count ``F(p, r, r, 2r)``; lowering the separation slightly below ``2r``
exposes branch points near ``p``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .cayley import GroupFamily, ball, export_ball_metric
from .errors import InputError
from .metric import FiniteMetric, Rational, as_rational, format_rational
from .packing import DEFAULT_EXACT_CAP, PackingQuery, PackingResult, packing_number


def _delta_of_sums(a, b, c):
    s = sorted((a, b, c))
    return Fraction(s[2] - s[1]) / 2


def four_point_delta(m, w: str, x: str, y: str, z: str) -> Rational:
    """(largest - second largest) of the three pair sums, halved."""
    i, j, k, l = (m.index(v) for v in (w, x, y, z))
    d = m.dist
    return as_rational(
        _delta_of_sums(d(i, j) + d(k, l), d(i, k) + d(j, l), d(i, l) + d(j, k))
    )


@dataclass(frozen=True)
class DeltaEstimate:
    max_delta: Rational
    witness_quadruple: tuple[str, str, str, str]
    samples_used: int
    exhaustive: bool

    def to_json(self) -> dict[str, Any]:
        return {
            "max_delta": format_rational(self.max_delta),
            "witness_quadruple": list(self.witness_quadruple),
            "samples_used": self.samples_used,
            "exhaustive": self.exhaustive,
        }


def _quad_deltas(D: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Twice the four-point delta (in table units) for each row of ``q``."""
    w, x, y, z = q.T
    s = np.stack([D[w, x] + D[y, z], D[w, y] + D[x, z], D[w, z] + D[x, y]], axis=1)
    s.sort(axis=1)
    return s[:, 2] - s[:, 1]


def _all_quadruples(n: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(n), 4)), dtype=np.int64).reshape(-1, 4)


def _climb(D: np.ndarray, quad: np.ndarray, best: int) -> tuple[np.ndarray, int, int]:
    """Coordinate ascent: swap one corner at a time for the best replacement."""
    n = D.shape[0]
    evaluated = 0
    improved = True
    while improved:
        improved = False
        for pos in range(4):
            cand = np.repeat(quad[None, :], n, axis=0)
            cand[:, pos] = np.arange(n)
            vals = _quad_deltas(D, cand)
            evaluated += n
            j = int(np.argmax(vals))  # first maximum: lowest replacement index
            if vals[j] > best:
                best = int(vals[j])
                quad = cand[j].copy()
                improved = True
    return quad, best, evaluated


def _far_pair_sweep(D: np.ndarray, budget: int) -> tuple[int, tuple[int, int, int, int] | None, int]:
    """Fix each of the farthest pairs ``(w, z)`` in turn and maximize over all ``(x, y)``.

    Pairs are taken by decreasing distance, ties by index, as many as
    ``budget`` quadruple evaluations allow.
    """
    n = D.shape[0]
    iu, ju = np.triu_indices(n, 1)
    dv = D[iu, ju]
    order = np.lexsort((ju, iu, -dv))
    best, quad, used = -1, None, 0
    for t in order[: max(1, budget // (n * n))]:
        w, z = int(iu[t]), int(ju[t])
        s2 = D[w][:, None] + D[z][None, :]
        s = np.stack([D[w, z] + D, s2, s2.T])
        s.sort(axis=0)
        vals = s[2] - s[1]
        j = int(np.argmax(vals))
        used += n * n
        if vals.flat[j] > best:
            best, quad = int(vals.flat[j]), (w, z, j // n, j % n)
    return best, quad, used


def delta_estimate(
    m: FiniteMetric,
    sample_count: int = 20000,
    seed: int = 42,
    refine: int = 8,
    sweep_budget: int = 2 * 10**7,
) -> DeltaEstimate:
    """Largest four-point delta over all quadruples, or a lower estimate of it.

    When ``C(n, 4)`` exceeds ``sample_count``, quadruples are drawn
    uniformly with a generator seeded by ``seed``; the ``refine`` best
    samples are then improved by single-corner swaps, and a sweep over the
    farthest pairs adds candidates independent of the seed. Every step is
    deterministic for a fixed seed.
    """
    n = len(m)
    if n < 4:
        raise InputError(f"need at least 4 points, got {n}")
    D, denom = m.int_table()
    if math.comb(n, 4) <= sample_count:
        quads = _all_quadruples(n)
        vals = _quad_deltas(D, quads)
        k = int(np.argmax(vals))
        best_quad, best = quads[k], int(vals[k])
        used, exhaustive = len(quads), True
    else:
        rng = np.random.default_rng(seed)
        quads = np.empty((sample_count, 4), dtype=np.int64)
        filled = 0
        while filled < sample_count:
            draw = rng.integers(0, n, size=(sample_count, 4))
            srt = np.sort(draw, axis=1)
            ok = np.all(srt[:, 1:] != srt[:, :-1], axis=1)
            draw = draw[ok][: sample_count - filled]
            quads[filled : filled + len(draw)] = draw
            filled += len(draw)
        vals = _quad_deltas(D, quads)
        order = np.argsort(-vals, kind="stable")
        k = int(order[0])
        best_quad, best = quads[k], int(vals[k])
        used, exhaustive = sample_count, False
        for k in order[: max(refine, 0)]:
            quad, val, ev = _climb(D, quads[k].copy(), int(vals[k]))
            used += ev
            if val > best:
                best_quad, best = quad, val
        if sweep_budget > 0:
            val, quad, ev = _far_pair_sweep(D, sweep_budget)
            used += ev
            if val > best:
                best_quad, best = np.array(quad), val
    labels = m.labels
    witness = tuple(labels[int(i)] for i in best_quad)
    value = as_rational(Fraction(best, 2 * denom))
    return DeltaEstimate(value, witness, used, exhaustive)


# ----------------------------------------------------------------------
# valency


def default_slack(m) -> Rational:
    """Half the smallest positive distance, so graph spheres are populated."""
    d = m.min_positive_distance()
    return 0 if d is None else as_rational(Fraction(d) / 2)


@dataclass(frozen=True)
class ValencyProfile:
    p: str
    r: Rational
    slack: Rational
    values: tuple[tuple[Rational, PackingResult], ...]  # by decreasing l, l = 2r first

    @property
    def valency(self) -> PackingResult:
        return self.values[0][1]

    def exact_monotone(self) -> bool:
        """Exact entries never decrease as ``l`` decreases."""
        exact = [res.lower for _, res in self.values if res.exact]
        return all(a <= b for a, b in zip(exact, exact[1:]))

    def to_json(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "r": format_rational(self.r),
            "slack": format_rational(self.slack),
            "values": [{"l": format_rational(l), **res.to_json()} for l, res in self.values],
        }


def valency_profile(
    m,
    p: str,
    r: Rational,
    k_grid: Sequence[int] = (2, 4, 8, 16),
    slack: Rational | None = None,
    exact_cap: int = DEFAULT_EXACT_CAP,
) -> ValencyProfile:
    """``F(p, r, r, 2r)`` followed by ``F(p, r, r, 2r - 1/k)`` for ``k`` from largest to smallest."""
    r = as_rational(r)
    if r <= 0:
        raise InputError("radius must be positive")
    slack = default_slack(m) if slack is None else as_rational(slack)
    ks = sorted({int(k) for k in k_grid}, reverse=True)
    if any(k <= 0 for k in ks):
        raise InputError("k-grid entries must be positive")
    ls = [2 * r] + [as_rational(2 * r - Fraction(1, k)) for k in ks]
    if ls[-1] <= 0:
        raise InputError(f"2r - 1/k must stay positive; k must exceed {Fraction(1, 2) / r}")
    values = tuple((l, packing_number(m, PackingQuery(p, r, r, l, slack), exact_cap)) for l in ls)
    return ValencyProfile(str(p), r, slack, values)


@dataclass(frozen=True)
class IsolationReport:
    verdict: str
    profile: ValencyProfile

    def to_json(self) -> dict[str, Any]:
        return {"verdict": self.verdict, "profile": self.profile.to_json()}


def isolation_verdict(profile: ValencyProfile) -> str:
    results = [res for _, res in profile.values]
    if all(res.exact for res in results) and len({res.lower for res in results}) == 1:
        return "isolated-evidence"
    if len(results) >= 3:
        a, b, c = (res.lower for res in results[-3:])
        if a < b < c:
            return "non-isolated-evidence"
    return "inconclusive"


def branch_isolation(
    m,
    p: str,
    r: Rational,
    k_grid: Sequence[int] = (2, 4, 8, 16),
    slack: Rational | None = None,
    exact_cap: int = DEFAULT_EXACT_CAP,
) -> IsolationReport:
    profile = valency_profile(m, p, r, k_grid, slack, exact_cap)
    return IsolationReport(isolation_verdict(profile), profile)


# ----------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class Thresholds:
    delta_ratio: Fraction = Fraction(1, 10)  # not-a-tree above this delta/scale
    point_diameter: Fraction = Fraction(1, 4)  # point when diameter/scale is at most this


@dataclass(frozen=True)
class ScaleEvidence:
    scale: Rational
    diameter: Rational
    delta: DeltaEstimate
    profile: ValencyProfile
    source: str = ""

    def to_json(self) -> dict[str, Any]:
        return {
            "scale": format_rational(self.scale),
            "diameter": format_rational(self.diameter),
            "delta_ratio": format_rational(as_rational(Fraction(self.delta.max_delta) / self.scale)),
            "delta": self.delta.to_json(),
            "profile": self.profile.to_json(),
        }


@dataclass(frozen=True)
class ConeClassEvidence:
    verdict: str  # point | line | continuum-branching-tree | not-a-tree | inconclusive
    evidence: tuple[ScaleEvidence, ...]
    growth: Any = None
    reason: str = ""

    def to_json(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "reason": self.reason,
            "scales": [e.to_json() for e in self.evidence],
            "growth": None if self.growth is None else self.growth.to_json(),
        }


def _branch_count(profile: ValencyProfile) -> int:
    """Separated directions seen at the smallest separation of the profile."""
    return profile.values[-1][1].lower


def classify_cone_evidence(
    evidence: Sequence[ScaleEvidence],
    growth=None,
    thresholds: Thresholds = Thresholds(),
) -> ConeClassEvidence:
    """Decision ladder over per-scale evidence (scales in increasing order).

    point: diameter/scale small at the largest scale; line: delta 0 and
    every profile entry 2; continuum-branching-tree: delta 0 and branch
    counts strictly increasing over the last three scales; not-a-tree:
    delta/scale above threshold at some scale.
    """
    ev = tuple(evidence)
    if not ev:
        raise InputError("no evidence supplied")
    sources = {e.source for e in ev}
    if len(sources) > 1:
        raise InputError(f"evidence comes from different sources: {sorted(sources)}")
    if any(a.scale >= b.scale for a, b in zip(ev, ev[1:])):
        raise InputError("evidence must be ordered by increasing scale")
    last = ev[-1]
    if Fraction(last.diameter) / last.scale <= thresholds.point_diameter:
        return ConeClassEvidence("point", ev, growth, "diameter/scale below threshold")
    tree = all(e.delta.max_delta == 0 for e in ev)
    if tree and all(
        res.exact and res.lower == 2 for e in ev for _, res in e.profile.values
    ):
        return ConeClassEvidence("line", ev, growth, "delta 0 and valency 2 at every scale")
    if tree and len(ev) >= 3:
        a, b, c = (_branch_count(e.profile) for e in ev[-3:])
        if a < b < c:
            return ConeClassEvidence(
                "continuum-branching-tree", ev, growth, "delta 0 and branch counts keep growing"
            )
    ratios = [Fraction(e.delta.max_delta) / e.scale for e in ev]
    if max(ratios) > thresholds.delta_ratio:
        return ConeClassEvidence("not-a-tree", ev, growth, "delta/scale above threshold")
    return ConeClassEvidence("inconclusive", ev, growth, "no rung of the ladder applies")


def scale_evidence(
    m: FiniteMetric,
    p: str,
    scale: Rational,
    r: Rational,
    k_grid: Sequence[int],
    samples: int,
    seed: int,
    slack: Rational | None = None,
    exact_cap: int = DEFAULT_EXACT_CAP,
    source: str = "",
) -> ScaleEvidence:
    """Evidence for one scale, computed on the unscaled metric ``m``.

    The valency profile is taken at radius ``r * scale`` with separations
    ``(2r - 1/k) * scale``, which is the profile of the rescaled view.
    """
    scale = as_rational(scale)
    r = as_rational(r)
    if len(m) >= 4:
        delta = delta_estimate(m, samples, seed)
    else:
        delta = DeltaEstimate(0, tuple([m.labels[0]] * 4), 0, True)
    rs = as_rational(r * scale)
    ks = sorted({int(k) for k in k_grid}, reverse=True)
    ls = [2 * rs] + [as_rational((2 * r - Fraction(1, k)) * scale) for k in ks]
    if min(ls) <= 0:
        raise InputError(f"2r - 1/k must stay positive; k must exceed {Fraction(1, 2) / r}")
    slack = default_slack(m) if slack is None else as_rational(slack)
    values = tuple(
        (as_rational(Fraction(l) / scale), packing_number(m, PackingQuery(p, rs, rs, l, slack), exact_cap))
        for l in ls
    )
    profile = ValencyProfile(str(p), r, as_rational(Fraction(slack) / scale), values)
    return ScaleEvidence(scale, m.diameter(), delta, profile, source)


def classify_group(
    g: GroupFamily,
    scales: Sequence[int],
    r: Rational = 1,
    k_grid: Sequence[int] = (2, 4, 8, 16),
    samples: int = 20000,
    seed: int = 42,
    max_points: int = 800,
    exact_cap: int = DEFAULT_EXACT_CAP,
    cap: int | None = None,
    with_growth: bool = False,
    executor=None,
) -> ConeClassEvidence:
    """Pipeline for a group: at scale ``nu`` the radius-``nu`` region is exported
    (seeded sampling above ``max_points``) from a ball of radius ``2 nu``, or
    of radius ``nu`` when the family has closed-form word lengths.
    """
    scales = sorted({int(s) for s in scales})
    if not scales or scales[0] < 1:
        raise InputError("scales must be positive integers")
    kwargs = {} if cap is None else {"cap": cap}
    # closed-form word lengths make the outer margin unnecessary
    factor = 1 if g.length(g.identity()) is not None else 2
    big = ball(g, factor * scales[-1], **kwargs)
    e = g.format(g.identity())

    def run(nu: int) -> ScaleEvidence:
        m = export_ball_metric(big.restrict(factor * nu), max_points, "auto", seed, region_radius=nu)
        return scale_evidence(m, e, nu, r, k_grid, samples, seed, None, exact_cap, g.name)

    ev = [run(nu) for nu in scales] if executor is None else list(executor.map(run, scales))
    growth = None
    if with_growth:
        from .cayley import classify_growth

        growth = classify_growth(list(enumerate(big.sizes())))
    return classify_cone_evidence(ev, growth)


def classify_space(
    m: FiniteMetric,
    p: str,
    scales: Sequence,
    r: Rational = 1,
    k_grid: Sequence[int] = (2, 4, 8, 16),
    samples: int = 20000,
    seed: int = 42,
    slack: Rational | None = None,
    exact_cap: int = DEFAULT_EXACT_CAP,
) -> ConeClassEvidence:
    """Pipeline for a fixed metric sample viewed at several scales."""
    ev = [
        scale_evidence(m, p, nu, r, k_grid, samples, seed, slack, exact_cap, "space")
        for nu in sorted(as_rational(s) for s in scales)
    ]
    return classify_cone_evidence(ev)
