"""Finite metric spaces with exact rational distance tables.

Every diagnostic in the package runs on a *space*: an object exposing

* ``labels``: tuple of point labels (opaque strings), indexed ``0..n-1``
* ``index(label) -> int``
* ``dist(i, j) -> Rational``
* ``dists_from(i) -> list[Rational]``
* ``within(i, radius, strict=False) -> list[int]``

``FiniteMetric`` and ``RescaledView`` implement it here;
``conelab.cayley.BallSpace`` implements it for Cayley balls without a
materialized table.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import InputError

Rational = Union[int, Fraction]


def as_rational(value: Any) -> Rational:
    """Convert ``value`` to an exact rational (``int`` when integral).

    Strings may be ``"p/q"`` or decimal literals; floats are read through
    their shortest decimal representation.
    """
    if isinstance(value, bool):
        raise InputError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, Fraction):
        q = value
    elif isinstance(value, str):
        try:
            q = Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"not a rational literal: {value!r}") from exc
    elif isinstance(value, float):
        if not math.isfinite(value):
            raise InputError(f"not a finite rational: {value!r}")
        q = Fraction(repr(value))
    else:
        try:
            q = Fraction(value)
        except (TypeError, ValueError) as exc:
            raise InputError(f"not a rational: {value!r}") from exc
    return q.numerator if q.denominator == 1 else q


def format_rational(q: Rational) -> str:
    """Serialize as ``"p/q"`` (or ``"p"`` for integers)."""
    return str(Fraction(q))


class FiniteMetric:
    """A finite point set with an exact pairwise distance table.

    Construction only checks the *shape* of the input (square table,
    unique labels, rational entries); use :func:`validate_metric` to check
    the metric axioms.
    """

    __slots__ = ("labels", "_rows", "_index", "_int_table")

    def __init__(self, points: Sequence[str], dist: Sequence[Sequence[Any]]):
        labels = tuple(str(p) for p in points)
        if len(set(labels)) != len(labels):
            raise InputError("duplicate point labels")
        n = len(labels)
        if len(dist) != n:
            raise InputError(f"distance table has {len(dist)} rows for {n} points")
        rows = []
        for i, row in enumerate(dist):
            if len(row) != n:
                raise InputError(f"row {i} has {len(row)} entries, expected {n}")
            rows.append(tuple(as_rational(v) for v in row))
        self.labels = labels
        self._rows = tuple(rows)
        self._index = {lab: i for i, lab in enumerate(labels)}
        self._int_table = None

    # -- space protocol -------------------------------------------------
    def __len__(self) -> int:
        return len(self.labels)

    def __repr__(self) -> str:
        return f"FiniteMetric({len(self)} points)"

    def index(self, label: str) -> int:
        try:
            return self._index[str(label)]
        except KeyError:
            raise InputError(f"unknown point {label!r}") from None

    def dist(self, i: int, j: int) -> Rational:
        return self._rows[i][j]

    def row(self, i: int) -> tuple[Rational, ...]:
        return self._rows[i]

    def dists_from(self, i: int) -> list[Rational]:
        return list(self._rows[i])

    def within(self, i: int, radius: Rational, strict: bool = False) -> list[int]:
        row = self._rows[i]
        if strict:
            return [j for j, d in enumerate(row) if d < radius]
        return [j for j, d in enumerate(row) if d <= radius]

    # -- constructors ---------------------------------------------------
    @classmethod
    def from_function(cls, points: Sequence[str], fn) -> "FiniteMetric":
        pts = list(points)
        return cls(pts, [[fn(a, b) for b in pts] for a in pts])

    @classmethod
    def from_graph(
        cls,
        vertices: Sequence[str],
        edges: Iterable[Sequence[Any]],
    ) -> "FiniteMetric":
        """Shortest-path metric of a weighted undirected graph.

        Raises ``InputError`` for unknown endpoints, non-positive lengths
        or a disconnected graph.
        """
        labels = [str(v) for v in vertices]
        index = {v: i for i, v in enumerate(labels)}
        if len(index) != len(labels):
            raise InputError("duplicate vertex labels")
        adj: list[list[tuple[int, Rational]]] = [[] for _ in labels]
        for edge in edges:
            if len(edge) != 3:
                raise InputError(f"edge must be [u, v, length]: {edge!r}")
            u, v, length = str(edge[0]), str(edge[1]), as_rational(edge[2])
            if u not in index or v not in index:
                raise InputError(f"edge references unknown vertex: {edge!r}")
            if length <= 0:
                raise InputError(f"edge length must be positive: {edge!r}")
            adj[index[u]].append((index[v], length))
            adj[index[v]].append((index[u], length))
        rows = [_dijkstra(adj, s) for s in range(len(labels))]
        for s, row in enumerate(rows):
            if any(d is None for d in row):
                raise InputError(f"graph is disconnected (from {labels[s]!r})")
        return cls(labels, rows)

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "FiniteMetric":
        """Read either the metric format or the graph format."""
        if "distances" in data:
            if "points" not in data:
                raise InputError("metric JSON needs 'points'")
            return cls(data["points"], data["distances"])
        if "vertices" in data:
            return cls.from_graph(data["vertices"], data.get("edges", []))
        raise InputError("expected {'points','distances'} or {'vertices','edges'}")

    @classmethod
    def load(cls, path: str | Path) -> "FiniteMetric":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc}") from exc
        try:
            data = json.loads(text, parse_float=str, parse_int=int)
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_json(data)

    def to_json(self) -> dict[str, Any]:
        return {
            "points": list(self.labels),
            "distances": [[format_rational(d) for d in row] for row in self._rows],
        }

    # -- derived quantities ----------------------------------------------
    def submetric(self, labels: Iterable[str]) -> "FiniteMetric":
        idx = [self.index(lab) for lab in labels]
        return FiniteMetric(
            [self.labels[i] for i in idx],
            [[self._rows[i][j] for j in idx] for i in idx],
        )

    def diameter(self) -> Rational:
        return max((max(row) for row in self._rows), default=0)

    def min_positive_distance(self) -> Rational | None:
        best = None
        for row in self._rows:
            for d in row:
                if d > 0 and (best is None or d < best):
                    best = d
        return best

    def int_table(self) -> tuple[np.ndarray, int]:
        """Distances scaled to integers: ``(table, denom)`` with ``dist = table/denom``.

        Used by the vectorized validation and four-point routines; the
        dtype falls back to ``object`` when int64 could overflow.
        """
        if self._int_table is None:
            denom = 1
            for row in self._rows:
                for d in row:
                    if isinstance(d, Fraction):
                        denom = math.lcm(denom, d.denominator)
            scaled = [[int(d * denom) for d in row] for row in self._rows]
            peak = max((abs(v) for row in scaled for v in row), default=0)
            dtype = np.int64 if 4 * peak < 2**62 else object
            self._int_table = (np.array(scaled, dtype=dtype).reshape(len(self), len(self)), denom)
        return self._int_table


def _dijkstra(adj: list[list[tuple[int, Rational]]], source: int) -> list[Rational | None]:
    dist: list[Rational | None] = [None] * len(adj)
    dist[source] = 0
    heap: list[tuple[Rational, int]] = [(0, source)]
    done = [False] * len(adj)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, w in adj[u]:
            nd = d + w
            if dist[v] is None or nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


class RescaledView:
    """``base`` with every distance divided by ``scale`` (exactly)."""

    __slots__ = ("base", "scale")

    def __init__(self, base, scale: Rational):
        scale = as_rational(scale)
        if scale <= 0:
            raise InputError(f"scale must be positive, got {scale}")
        self.base = base
        self.scale = scale

    @property
    def labels(self) -> tuple[str, ...]:
        return self.base.labels

    def __len__(self) -> int:
        return len(self.base)

    def __repr__(self) -> str:
        return f"RescaledView({self.base!r}, scale={self.scale})"

    def index(self, label: str) -> int:
        return self.base.index(label)

    @property
    def order_key(self):
        return getattr(self.base, "order_key", None)

    def dist(self, i: int, j: int) -> Rational:
        return as_rational(Fraction(self.base.dist(i, j)) / self.scale)

    def dists_from(self, i: int) -> list[Rational]:
        s = self.scale
        return [as_rational(Fraction(d) / s) for d in self.base.dists_from(i)]

    def within(self, i: int, radius: Rational, strict: bool = False) -> list[int]:
        return self.base.within(i, radius * self.scale, strict)

    def min_positive_distance(self) -> Rational | None:
        d = self.base.min_positive_distance()
        return None if d is None else as_rational(Fraction(d) / self.scale)

    def materialize(self) -> FiniteMetric:
        n = len(self)
        return FiniteMetric(self.labels, [self.dists_from(i) for i in range(n)])


def rescale(m, scale: Rational) -> RescaledView:
    """View of ``m`` with distances divided by ``scale``; nested views collapse."""
    scale = as_rational(scale)
    if scale <= 0:
        raise InputError(f"scale must be positive, got {scale}")
    if isinstance(m, RescaledView):
        return RescaledView(m.base, m.scale * scale)
    return RescaledView(m, scale)


# ----------------------------------------------------------------------
# validation

VIOLATION_KINDS = ("asymmetry", "negative", "self-distance", "zero-distance", "triangle")


@dataclass(frozen=True)
class Violation:
    kind: str
    witness: tuple[str, ...]
    slack: Rational

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "witness": list(self.witness), "slack": format_rational(self.slack)}


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict[str, Any]:
        return {"ok": self.ok, "violations": [v.to_json() for v in self.violations]}


def validate_metric(m) -> ValidationReport:
    """Every metric-axiom violation of ``m``, with witnesses and exact slack.

    Triangle witnesses are ``(x, y, z)`` with ``d(x,z) > d(x,y) + d(y,z)``,
    reported once per unordered endpoint pair (``x < z`` by index).
    """
    if isinstance(m, RescaledView):
        m = m.materialize()
    if not isinstance(m, FiniteMetric):
        raise InputError(f"cannot validate {type(m).__name__}")
    table, denom = m.int_table()
    labels = m.labels
    n = len(labels)
    out: list[Violation] = []

    def q(v) -> Rational:
        return as_rational(Fraction(int(v), denom))

    for i in range(n):
        if table[i, i] != 0:
            out.append(Violation("self-distance", (labels[i],), q(abs(table[i, i]))))
    for i, j in zip(*np.nonzero(table < 0)):
        out.append(Violation("negative", (labels[i], labels[j]), q(-table[i, j])))
    for i, j in zip(*np.nonzero(table != table.T)):
        if i < j:
            out.append(Violation("asymmetry", (labels[i], labels[j]), q(abs(table[i, j] - table[j, i]))))
    zero = table == 0
    np.fill_diagonal(zero, False)
    for i, j in zip(*np.nonzero(zero)):
        if i < j:
            out.append(Violation("zero-distance", (labels[i], labels[j]), 0))
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    for y in range(n):
        excess = table - (table[:, y][:, None] + table[y, :][None, :])
        bad = (excess > 0) & upper
        bad[y, :] = False
        bad[:, y] = False
        for x, z in zip(*np.nonzero(bad)):
            out.append(Violation("triangle", (labels[x], labels[y], labels[z]), q(excess[x, z])))
    out.sort(key=lambda v: (VIOLATION_KINDS.index(v.kind), v.witness))
    return ValidationReport(tuple(out))


# ----------------------------------------------------------------------
# balls and annuli


def annulus_indices(space, p: int, r1: Rational, r2: Rational, slack: Rational = 0) -> list[int]:
    lo, hi = r1 - slack, r2 + slack
    if lo > hi:
        return []
    return [j for j, d in enumerate(space.dists_from(p)) if lo <= d <= hi]


def ball_points(m, p: str, r: Rational) -> set[str]:
    """Closed ball ``{x : d(p,x) <= r}``."""
    r = as_rational(r)
    if r < 0:
        raise InputError("radius must be nonnegative")
    i = m.index(p)
    return {m.labels[j] for j, d in enumerate(m.dists_from(i)) if d <= r}


def annulus(m, p: str, r1: Rational, r2: Rational, slack: Rational = 0) -> set[str]:
    """``{x : r1 - slack <= d(p,x) <= r2 + slack}``."""
    r1, r2, slack = as_rational(r1), as_rational(r2), as_rational(slack)
    if r1 < 0 or slack < 0:
        raise InputError("r1 and slack must be nonnegative")
    i = m.index(p)
    return {m.labels[j] for j in annulus_indices(m, i, r1, r2, slack)}


# ----------------------------------------------------------------------
# comparison of spaces


def _label_permutation(a, b) -> list[int]:
    if set(a.labels) != set(b.labels) or len(a.labels) != len(b.labels):
        raise InputError("spaces do not share the same point labels")
    return [b.index(lab) for lab in a.labels]


def labeled_distortion(a, b) -> Rational:
    """``max |d_a(x,y) - d_b(x,y)|`` over label pairs (identity correspondence)."""
    perm = _label_permutation(a, b)
    worst: Rational = 0
    for i in range(len(a)):
        ra = a.dists_from(i)
        rb = b.dists_from(perm[i])
        for j in range(i + 1, len(a)):
            diff = abs(ra[j] - rb[perm[j]])
            if diff > worst:
                worst = diff
    return as_rational(worst)


def _table(m) -> list[list[Rational]]:
    return [m.dists_from(i) for i in range(len(m))]


def _correspondence_exists(da, db, bound: Rational) -> bool:
    """Is there a correspondence between the two tables with distortion <= bound?"""
    na, nb = len(da), len(db)
    pairs = [(a, b) for a in range(na) for b in range(nb)]
    compat = []
    for a, b in pairs:
        mask = 0
        for k, (a2, b2) in enumerate(pairs):
            if abs(da[a][a2] - db[b][b2]) <= bound:
                mask |= 1 << k
        compat.append(mask)
    by_a = [sum(1 << (a * nb + b) for b in range(nb)) for a in range(na)]
    by_b = [sum(1 << (a * nb + b) for a in range(na)) for b in range(nb)]
    full = (1 << len(pairs)) - 1

    def cover_b(allowed: int, covered_b: int, b: int) -> bool:
        while b < nb and covered_b >> b & 1:
            b += 1
        if b == nb:
            return True
        options = allowed & by_b[b]
        while options:
            low = options & -options
            k = low.bit_length() - 1
            if cover_b(allowed & compat[k], covered_b | (1 << b), b + 1):
                return True
            options ^= low
        return False

    def cover_a(allowed: int, covered_b: int, a: int) -> bool:
        if a == na:
            return cover_b(allowed, covered_b, 0)
        for later in range(a + 1, na):
            if not allowed & by_a[later]:
                return False
        options = allowed & by_a[a]
        while options:
            low = options & -options
            k = low.bit_length() - 1
            if cover_a(allowed & compat[k], covered_b | (1 << (k % nb)), a + 1):
                return True
            options ^= low
        return False

    return cover_a(full, 0, 0)


def gh_lower_bound(a, b, exact_cap: int = 8) -> tuple[Rational, bool]:
    """Gromov-Hausdorff distance (exact up to ``exact_cap`` points per side).

    Exact mode binary-searches the optimal distortion over the finite set of
    candidate values ``|d_a - d_b|`` with a backtracking correspondence
    search. Above the cap a first-order lower bound is returned (diameter
    gap, plus the pigeonhole bound when the cardinalities differ).
    """
    if len(a) == 0 or len(b) == 0:
        raise InputError("spaces must be nonempty")
    da, db = _table(a), _table(b)
    if max(len(a), len(b)) <= exact_cap:
        values = sorted({abs(x - y) for ra in da for x in ra for rb in db for y in rb})
        lo, hi = 0, len(values) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if _correspondence_exists(da, db, values[mid]):
                hi = mid
            else:
                lo = mid + 1
        return as_rational(Fraction(values[lo]) / 2), True
    diam_a = max(max(r) for r in da)
    diam_b = max(max(r) for r in db)
    bound = Fraction(abs(diam_a - diam_b)) / 2
    if len(a) != len(b):
        big = da if len(a) > len(b) else db
        sep = min((d for row in big for d in row if d > 0), default=0)
        bound = max(bound, Fraction(sep) / 2)
    return as_rational(bound), False


def line_metric(n: int, start: int = 0) -> FiniteMetric:
    """Integer points ``start..start+n-1`` with ``|i - j|``."""
    pts = list(range(start, start + n))
    return FiniteMetric([str(i) for i in pts], [[abs(i - j) for j in pts] for i in pts])


def all_pairs_bfs(labels: Sequence[str], edges: Iterable[tuple[str, str]]) -> FiniteMetric:
    """Unit-length graph metric by breadth-first search from every vertex."""
    return FiniteMetric.from_graph(labels, [(u, v, 1) for u, v in edges])


def star_metric(legs: int, length: Rational = 1, pieces: int = 1) -> FiniteMetric:
    """A star: ``legs`` segments of the given length glued at ``"c"``, each cut into ``pieces``.

    Leg ``i`` carries points ``"i.1" .. "i.pieces"`` going outward.
    """
    if legs < 0 or pieces < 1:
        raise InputError("a star needs legs >= 0 and pieces >= 1")
    step = as_rational(Fraction(as_rational(length)) / pieces)
    vertices = ["c"] + [f"{i}.{j}" for i in range(legs) for j in range(1, pieces + 1)]
    edges = []
    for i in range(legs):
        prev = "c"
        for j in range(1, pieces + 1):
            edges.append((prev, f"{i}.{j}", step))
            prev = f"{i}.{j}"
    return FiniteMetric.from_graph(vertices, edges)


def regular_tree_metric(degree: int, depth: int, edge: Rational = 1) -> FiniteMetric:
    """The ball of the given depth around the root of the ``degree``-regular tree.

    Vertices are labelled by their branch digits from the root (``"r"``), e.g. ``"r.0.1"``.
    """
    if degree < 1 or depth < 0:
        raise InputError("degree must be >= 1 and depth >= 0")
    vertices = ["r"]
    edges = []
    frontier = ["r"]
    for d in range(depth):
        nxt = []
        for v in frontier:
            for c in range(degree if d == 0 else degree - 1):
                w = f"{v}.{c}"
                vertices.append(w)
                edges.append((v, w, edge))
                nxt.append(w)
        frontier = nxt
    return FiniteMetric.from_graph(vertices, edges)
