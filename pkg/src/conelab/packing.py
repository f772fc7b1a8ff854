"""The packing function: the largest ``l``-separated subset of an annulus.

``F(p, r1, r2, l)`` is the maximum cardinality of a set ``M`` with
``r1 <= d(x, p) <= r2`` for all ``x`` in ``M`` and ``d(x, y) >= l`` for
distinct ``x, y`` in ``M``. On small annuli it is solved exactly as a
maximum independent set of the conflict graph (pairs closer than ``l``);
otherwise a greedy separated set and a greedy cover by sets of diameter
below ``l`` bracket it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

from .errors import DomainError, InputError
from .metric import Rational, annulus_indices, as_rational, format_rational

DEFAULT_EXACT_CAP = 40


@dataclass(frozen=True)
class PackingQuery:
    p: str
    r1: Rational
    r2: Rational
    l: Rational
    slack: Rational = 0

    def __post_init__(self):
        for name in ("r1", "r2", "l", "slack"):
            object.__setattr__(self, name, as_rational(getattr(self, name)))
        object.__setattr__(self, "p", str(self.p))
        if self.l <= 0:
            raise DomainError(f"separation l must be positive, got {self.l}")
        if self.r1 < 0 or self.r2 < 0 or self.slack < 0:
            raise InputError("r1, r2 and slack must be nonnegative")

    @property
    def lo(self) -> Rational:
        return self.r1 - self.slack

    @property
    def hi(self) -> Rational:
        return self.r2 + self.slack

    def scaled(self, factor: Rational) -> "PackingQuery":
        f = as_rational(factor)
        return PackingQuery(self.p, self.r1 * f, self.r2 * f, self.l * f, self.slack * f)

    def nested_in(self, other: "PackingQuery") -> bool:
        """Annulus contained in ``other``'s and separation at least ``other``'s."""
        return (
            self.p == other.p
            and self.l >= other.l
            and (self.lo > self.hi or (self.lo >= other.lo and self.hi <= other.hi))
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "r1": format_rational(self.r1),
            "r2": format_rational(self.r2),
            "l": format_rational(self.l),
            "slack": format_rational(self.slack),
        }


@dataclass(frozen=True)
class PackingResult:
    lower: int
    upper: int
    exact: bool
    witness: tuple[str, ...]
    annulus_size: int = 0
    method: str = "empty"  # "empty" | "branch-and-bound" | "bounds"

    def __post_init__(self):
        assert self.lower <= self.upper
        assert not self.exact or self.lower == self.upper

    @property
    def value(self) -> int | None:
        return self.lower if self.exact else None

    def to_json(self) -> dict[str, Any]:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "exact": self.exact,
            "witness": list(self.witness),
        }


def verify_test_set(m, q: PackingQuery, M: Iterable[str]) -> bool:
    """Is ``M`` a test set for the query (annulus membership and ``l``-separation)?"""
    idx = [m.index(x) for x in M]
    if len(set(idx)) != len(idx):
        return False
    p = m.index(q.p)
    lo, hi = q.lo, q.hi
    for i in idx:
        if not lo <= m.dist(p, i) <= hi:
            return False
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            if m.dist(idx[a], idx[b]) < q.l:
                return False
    return True


# ----------------------------------------------------------------------
# greedy bounds


def _annulus(space, q: PackingQuery) -> tuple[list[int], list[Rational]]:
    p = space.index(q.p)
    ds = space.dists_from(p)
    return annulus_indices(space, p, q.r1, q.r2, q.slack), ds


def canonical_rank(space) -> list[int]:
    """Rank of every point in the space's canonical order.

    Spaces may define ``order_key(i)`` (Cayley balls use the normal form);
    otherwise labels are compared.
    """
    key = getattr(space, "order_key", None)
    n = len(space)
    order = sorted(range(n), key=key if key is not None else space.labels.__getitem__)
    rank = [0] * n
    for r, i in enumerate(order):
        rank[i] = r
    return rank


def _farthest_first(members: Sequence[int], ds: Sequence[Rational], rank: Sequence[int]) -> list[int]:
    return sorted(members, key=lambda i: (-ds[i], rank[i]))


def _greedy_separated(space, A: Sequence[int], order: Iterable[int], l: Rational) -> list[int]:
    inside = set(A)
    blocked: set[int] = set()
    chosen = []
    for i in order:
        if i in blocked:
            continue
        chosen.append(i)
        blocked.update(j for j in space.within(i, l, strict=True) if j in inside)
    return chosen


def greedy_packing(space, q: PackingQuery) -> list[str]:
    """A maximal ``l``-separated subset of the annulus, as sorted labels.

    Two passes are made, farthest-from-``p`` first and in canonical order;
    the larger set wins (the first on a tie).
    """
    A, ds = _annulus(space, q)
    rank = canonical_rank(space)
    best = _greedy_separated(space, A, _farthest_first(A, ds, rank), q.l)
    scan = _greedy_separated(space, A, sorted(A, key=rank.__getitem__), q.l)
    if len(scan) > len(best):
        best = scan
    return sorted(space.labels[i] for i in best)


def greedy_cover_count(space, q: PackingQuery) -> int:
    """Size of a greedy cover of the annulus by sets of diameter below ``l``.

    Any ``l``-separated set meets each such set at most once, so this bounds
    ``F`` from above. Two covers are tried and the smaller count returned:
    open ``l/2``-balls seeded farthest-first, and cliques of the conflict
    graph grown nearest-first from seeds taken in canonical order.
    """
    A, ds = _annulus(space, q)
    rank = canonical_rank(space)
    return min(_ball_cover(space, A, ds, rank, q.l), _clique_cover(space, A, rank, q.l))


def _ball_cover(space, A, ds, rank, l) -> int:
    inside = set(A)
    covered: set[int] = set()
    radius = Fraction(l) / 2
    count = 0
    for i in _farthest_first(A, ds, rank):
        if i in covered:
            continue
        count += 1
        covered.update(j for j in space.within(i, radius, strict=True) if j in inside)
    return count


def _clique_cover(space, A, rank, l) -> int:
    inside = set(A)
    covered: set[int] = set()
    count = 0
    for s in sorted(A, key=rank.__getitem__):
        if s in covered:
            continue
        compat = {j for j in space.within(s, l, strict=True) if j in inside and j not in covered}
        compat.discard(s)
        members = [s]
        for c in sorted(compat, key=lambda j: (space.dist(s, j), rank[j])):
            if c in compat:
                members.append(c)
                compat.intersection_update(space.within(c, l, strict=True))
        covered.update(members)
        count += 1
    return count


# ----------------------------------------------------------------------
# exact maximum independent set on bitmask graphs


def _clique_cover_bound(adj: Sequence[int], cand: int) -> int:
    cliques = 0
    rest = cand
    while rest:
        v = (rest & -rest).bit_length() - 1
        rest &= ~(1 << v)
        common = rest & adj[v]
        while common:
            u = (common & -common).bit_length() - 1
            rest &= ~(1 << u)
            common &= adj[u] & ~(1 << u)
        cliques += 1
    return cliques


def max_independent_set(adj: Sequence[int], cand: int | None = None) -> tuple[int, int]:
    """Maximum independent set of the graph given by neighbour bitmasks.

    Branch and bound: branch on the vertex of largest degree (ties to the
    lowest index), include-first; vertices with no neighbour left are taken
    outright; prune with a greedy clique-cover bound. Returns
    ``(size, member_mask)``.
    """
    n = len(adj)
    if cand is None:
        cand = (1 << n) - 1
    best = [0, 0]

    def rec(cand: int, size: int, members: int) -> None:
        # vertices with at most one remaining neighbour belong to some maximum set
        changed = True
        while changed and cand:
            changed = False
            scan = cand
            while scan:
                low = scan & -scan
                v = low.bit_length() - 1
                scan ^= low
                if not cand >> v & 1:
                    continue
                if (adj[v] & cand).bit_count() <= 1:
                    members |= low
                    size += 1
                    cand &= ~(adj[v] | low)
                    changed = True
        if not cand:
            if size > best[0]:
                best[0], best[1] = size, members
            return
        if size + _clique_cover_bound(adj, cand) <= best[0]:
            return
        v, top = -1, -1
        scan = cand
        while scan:
            low = scan & -scan
            u = low.bit_length() - 1
            scan ^= low
            deg = (adj[u] & cand).bit_count()
            if deg > top:
                v, top = u, deg
        bit = 1 << v
        rec(cand & ~(adj[v] | bit), size + 1, members | bit)
        rec(cand & ~bit, size, members)

    rec(cand, 0, 0)
    return best[0], best[1]


def lex_least_maximum_set(adj: Sequence[int], size: int) -> int:
    """The maximum independent set that is lexicographically least by vertex index."""
    n = len(adj)
    allowed = (1 << n) - 1
    members = 0
    count = 0
    for v in range(n):
        bit = 1 << v
        if not allowed & bit:
            continue
        allowed &= ~bit
        if count == size:
            break
        rest = allowed & ~adj[v]
        if count + 1 + max_independent_set(adj, rest)[0] == size:
            members |= bit
            count += 1
            allowed = rest
    return members


def _conflict_masks(space, A: Sequence[int], l: Rational) -> list[int]:
    n = len(A)
    adj = [0] * n
    for a in range(n):
        for b in range(a + 1, n):
            if space.dist(A[a], A[b]) < l:
                adj[a] |= 1 << b
                adj[b] |= 1 << a
    return adj


def packing_number(space, q: PackingQuery, exact_cap: int = DEFAULT_EXACT_CAP) -> PackingResult:
    """``F(p, r1, r2, l)``: exact when the annulus has at most ``exact_cap`` points.

    Above the cap the result carries the greedy lower bound and the greedy
    cover upper bound, and is still flagged exact when the two meet. The
    exact witness is the lexicographically least maximum set.
    """
    A, _ = _annulus(space, q)
    if not A:
        return PackingResult(0, 0, True, (), 0, "empty")
    labels = space.labels
    if len(A) <= exact_cap:
        A = sorted(A, key=lambda i: labels[i])
        adj = _conflict_masks(space, A, q.l)
        size, _ = max_independent_set(adj)
        mask = lex_least_maximum_set(adj, size)
        witness = tuple(labels[A[v]] for v in range(len(A)) if mask >> v & 1)
        return PackingResult(size, size, True, witness, len(A), "branch-and-bound")
    witness = tuple(greedy_packing(space, q))
    upper = greedy_cover_count(space, q)
    lower = len(witness)
    return PackingResult(lower, upper, lower == upper, witness, len(A), "bounds")


# ----------------------------------------------------------------------
# batches


def dichotomy(results: Sequence[PackingResult]) -> str:
    """Finite shadow of "finite or uncountable": does a schedule of results stabilize or keep growing?

    ``"stabilized"`` when the last three are exact and equal,
    ``"unbounded-growth"`` when the last three lower bounds strictly increase,
    ``"undetermined"`` otherwise.
    """
    if len(results) < 3:
        return "undetermined"
    tail = results[-3:]
    if all(r.exact for r in tail) and len({r.lower for r in tail}) == 1:
        return "stabilized"
    if tail[0].lower < tail[1].lower < tail[2].lower:
        return "unbounded-growth"
    return "undetermined"


@dataclass(frozen=True)
class ProfileReport:
    queries: tuple[PackingQuery, ...]
    results: tuple[PackingResult, ...]
    violations: tuple[tuple[int, int], ...] = field(default_factory=tuple)
    regime: str = "undetermined"

    def to_json(self) -> dict[str, Any]:
        return {
            "records": [
                {"query": q.to_json(), "result": r.to_json()}
                for q, r in zip(self.queries, self.results)
            ],
            "monotonicity_violations": [list(v) for v in self.violations],
            "regime": self.regime,
        }


def monotonicity_violations(
    queries: Sequence[PackingQuery], results: Sequence[PackingResult]
) -> list[tuple[int, int]]:
    """Pairs ``(i, j)`` with query ``i`` nested in query ``j`` but ``F_i > F_j`` (both exact)."""
    out = []
    for i, (qi, ri) in enumerate(zip(queries, results)):
        if not ri.exact:
            continue
        for j, (qj, rj) in enumerate(zip(queries, results)):
            if i != j and rj.exact and qi.nested_in(qj) and ri.lower > rj.lower:
                out.append((i, j))
    return out


def packing_profile(
    space, p: str, queries: Sequence[PackingQuery], exact_cap: int = DEFAULT_EXACT_CAP
) -> ProfileReport:
    if any(q.p != str(p) for q in queries):
        raise InputError("all queries in a profile must share the basepoint")
    results = [packing_number(space, q, exact_cap) for q in queries]
    return ProfileReport(
        tuple(queries),
        tuple(results),
        tuple(monotonicity_violations(queries, results)),
        dichotomy(results),
    )


@dataclass(frozen=True)
class ScaledConsistency:
    scale: Rational
    query: PackingQuery
    on_rescaled: PackingResult
    on_base: PackingResult

    @property
    def equal(self) -> bool:
        a, b = self.on_rescaled, self.on_base
        return (a.lower, a.upper, a.exact, a.witness) == (b.lower, b.upper, b.exact, b.witness)

    def to_json(self) -> dict[str, Any]:
        return {
            "scale": format_rational(self.scale),
            "query": self.query.to_json(),
            "on_rescaled": self.on_rescaled.to_json(),
            "on_base": self.on_base.to_json(),
            "equal": self.equal,
        }


def scaled_packing_consistency(
    m, scale: Rational, q: PackingQuery, exact_cap: int = DEFAULT_EXACT_CAP
) -> ScaledConsistency:
    """``F`` of ``q`` on ``m`` rescaled by ``scale`` versus ``F`` of the scaled-up query on ``m``."""
    from .metric import rescale

    scale = as_rational(scale)
    on_rescaled = packing_number(rescale(m, scale), q, exact_cap)
    on_base = packing_number(m, q.scaled(scale), exact_cap)
    return ScaledConsistency(scale, q, on_rescaled, on_base)
