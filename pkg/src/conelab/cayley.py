"""Groups with solvable word problem, Cayley balls and growth.

Each family stores elements in a canonical normal form, so breadth-first
search can deduplicate by plain hashing:

* ``FreeAbelian(n)``: integer tuple
* ``Free(k)``: freely reduced word, a tuple of nonzero ints (``-i`` is the inverse of ``i``)
* ``Heisenberg3``: ``(a, b, c)`` for the matrix ``[[1, a, c], [0, 1, b], [0, 0, 1]]``
* ``Cyclic(m)``: residue mod ``m``
* ``DirectProduct``: pair of factor normal forms
"""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Sequence

import numpy as np

from .errors import InputError, OutOfRangeError, ParseError, ResourceError
from .metric import FiniteMetric

NormalForm = Hashable

DEFAULT_CAP = 5_000_000

_INVERSE_SUFFIXES = ("^-1", "⁻¹", "'")


class GroupFamily:
    """A finitely generated group with symmetric generating set ``S = S^-1``."""

    name: str
    generators: tuple[tuple[str, Any], ...]

    def identity(self):
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def inv(self, a):
        raise NotImplementedError

    def step_functions(self) -> list[Callable[[Any], Any]]:
        """Right multiplication by each generator (hot path of the BFS)."""
        return [lambda x, s=s: self.mul(x, s) for _, s in self.generators]

    def length(self, a) -> int | None:
        """Exact word length when a closed form is known, else ``None``."""
        return None

    def key(self, a):
        return a

    def format(self, a) -> str:
        return str(a)

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(sym for sym, _ in self.generators)

    def generator(self, symbol: str):
        sym = symbol.strip()
        for name, elem in self.generators:
            if name == sym:
                return elem
        for suffix in _INVERSE_SUFFIXES:
            if sym.endswith(suffix):
                base = sym[: -len(suffix)]
                for name, elem in self.generators:
                    if name == base:
                        return self.inv(elem)
        raise InputError(f"unknown generator symbol {symbol!r} for {self.name}")

    def normal_form(self, word: Sequence[str] | str):
        """Canonical form of the product of ``word`` (empty word -> identity)."""
        if isinstance(word, str):
            word = word.split()
        out = self.identity()
        for sym in word:
            out = self.mul(out, self.generator(sym))
        return out

    def __repr__(self) -> str:
        return self.name

    def __eq__(self, other) -> bool:
        return isinstance(other, GroupFamily) and self.name == other.name

    def __hash__(self) -> int:
        return hash(self.name)


_AXES = "xyzw"


class FreeAbelian(GroupFamily):
    def __init__(self, n: int, vectors: Sequence[Sequence[int]] | None = None):
        if n < 0:
            raise InputError("rank must be nonnegative")
        self.n = n
        self.custom = vectors is not None
        if vectors is None:
            vectors = [tuple(int(i == j) for j in range(n)) for i in range(n)]
            names = list(_AXES[:n]) if n <= len(_AXES) else [f"e{i + 1}" for i in range(n)]
            self.name = f"Z^{n}"
        else:
            vectors = [tuple(int(c) for c in v) for v in vectors]
            if any(len(v) != n for v in vectors):
                raise InputError("generator vectors must have length n")
            names = [f"v{i + 1}" for i in range(len(vectors))]
            self.name = f"Z^{n}<{';'.join(','.join(map(str, v)) for v in vectors)}>"
        gens = []
        for nm, v in zip(names, vectors):
            gens.append((nm, v))
            gens.append((nm + "^-1", tuple(-c for c in v)))
        self.generators = tuple(gens)

    def identity(self):
        return (0,) * self.n

    def mul(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def inv(self, a):
        return tuple(-x for x in a)

    def step_functions(self):
        if self.custom:
            return super().step_functions()
        steps = []
        for i in range(self.n):
            for sign in (1, -1):
                steps.append(lambda x, i=i, sign=sign: x[:i] + (x[i] + sign,) + x[i + 1 :])
        return steps

    def length(self, a):
        return None if self.custom else sum(abs(x) for x in a)

    def format(self, a):
        return "(" + ",".join(map(str, a)) + ")"


class Free(GroupFamily):
    def __init__(self, k: int):
        if k < 1:
            raise InputError("free group rank must be >= 1")
        if k > 26:
            raise InputError("free group rank must be <= 26")
        self.k = k
        self.name = f"F_{k}"
        gens = []
        for i in range(1, k + 1):
            letter = chr(ord("a") + i - 1)
            gens.append((letter, (i,)))
            gens.append((letter + "^-1", (-i,)))
        self.generators = tuple(gens)

    def identity(self):
        return ()

    def mul(self, a, b):
        a = list(a)
        j = 0
        while a and j < len(b) and a[-1] == -b[j]:
            a.pop()
            j += 1
        return tuple(a) + tuple(b[j:])

    def inv(self, a):
        return tuple(-x for x in reversed(a))

    def step_functions(self):
        steps = []
        for i in range(1, self.k + 1):
            for s in (i, -i):
                steps.append(lambda x, s=s: x[:-1] if x and x[-1] == -s else x + (s,))
        return steps

    def length(self, a):
        return len(a)

    def format(self, a):
        if not a:
            return "e"
        return "".join(chr(ord("a") + x - 1) if x > 0 else chr(ord("A") - x - 1) for x in a)


class Heisenberg3(GroupFamily):
    """Integer upper-triangular 3x3 unipotent matrices, generated by x=(1,0,0), y=(0,1,0)."""

    name = "Heis3"
    generators = (
        ("x", (1, 0, 0)),
        ("x^-1", (-1, 0, 0)),
        ("y", (0, 1, 0)),
        ("y^-1", (0, -1, 0)),
    )

    def identity(self):
        return (0, 0, 0)

    def mul(self, p, q):
        return (p[0] + q[0], p[1] + q[1], p[2] + q[2] + p[0] * q[1])

    def inv(self, p):
        return (-p[0], -p[1], p[0] * p[1] - p[2])

    def step_functions(self):
        return [
            lambda p: (p[0] + 1, p[1], p[2]),
            lambda p: (p[0] - 1, p[1], p[2]),
            lambda p: (p[0], p[1] + 1, p[2] + p[0]),
            lambda p: (p[0], p[1] - 1, p[2] - p[0]),
        ]

    def format(self, a):
        return "(" + ",".join(map(str, a)) + ")"


class Cyclic(GroupFamily):
    def __init__(self, m: int):
        if m < 1:
            raise InputError("cyclic order must be >= 1")
        self.m = m
        self.name = f"Z/{m}"
        self.generators = (("t", 1 % m), ("t^-1", (-1) % m))

    def identity(self):
        return 0

    def mul(self, a, b):
        return (a + b) % self.m

    def inv(self, a):
        return (-a) % self.m

    def length(self, a):
        return min(a, self.m - a) if a else 0


class DirectProduct(GroupFamily):
    def __init__(self, left: GroupFamily, right: GroupFamily):
        self.left = left
        self.right = right
        self.name = f"{_wrap(left)} x {_wrap(right)}"
        lsyms, rsyms = set(left.symbols), set(right.symbols)
        clash = bool(lsyms & rsyms)
        e_l, e_r = left.identity(), right.identity()
        gens = []
        for sym, s in left.generators:
            gens.append(("L." + sym if clash else sym, (s, e_r)))
        for sym, s in right.generators:
            gens.append(("R." + sym if clash else sym, (e_l, s)))
        self.generators = tuple(gens)

    def identity(self):
        return (self.left.identity(), self.right.identity())

    def mul(self, a, b):
        return (self.left.mul(a[0], b[0]), self.right.mul(a[1], b[1]))

    def inv(self, a):
        return (self.left.inv(a[0]), self.right.inv(a[1]))

    def step_functions(self):
        steps = []
        for f in self.left.step_functions():
            steps.append(lambda a, f=f: (f(a[0]), a[1]))
        for f in self.right.step_functions():
            steps.append(lambda a, f=f: (a[0], f(a[1])))
        return steps

    def length(self, a):
        la, lb = self.left.length(a[0]), self.right.length(a[1])
        return None if la is None or lb is None else la + lb

    def key(self, a):
        return (self.left.key(a[0]), self.right.key(a[1]))

    def format(self, a):
        return f"[{self.left.format(a[0])};{self.right.format(a[1])}]"


def _wrap(g: GroupFamily) -> str:
    return f"({g.name})" if isinstance(g, DirectProduct) else g.name


_ATOM = re.compile(r"\s*(?:Z\s*\^\s*(\d+)|F_\s*(\d+)|Heis3|Z\s*/\s*(\d+))\s*")


def make_group(spec: str) -> GroupFamily:
    """Parse ``"Z^n"``, ``"F_k"``, ``"Heis3"``, ``"Z/m"`` or ``"A x B"`` (left-associative, parentheses allowed).

    ``Z^0`` is the trivial group.
    """
    text = spec
    pos = 0

    def atom() -> GroupFamily:
        nonlocal pos
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos < len(text) and text[pos] == "(":
            pos += 1
            g = product()
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text) or text[pos] != ")":
                raise ParseError("expected ')'", text, pos)
            pos += 1
            return g
        m = _ATOM.match(text, pos)
        if not m:
            raise ParseError(f"unknown group spec {text[pos:].strip()!r}", text, pos)
        pos = m.end()
        if m.group(1) is not None:
            return FreeAbelian(int(m.group(1)))
        if m.group(2) is not None:
            return Free(int(m.group(2)))
        if m.group(3) is not None:
            return Cyclic(int(m.group(3)))
        return Heisenberg3()

    def product() -> GroupFamily:
        nonlocal pos
        g = atom()
        while True:
            m = re.compile(r"\s*[x×]\s*").match(text, pos)
            if not m or m.end() == pos:
                return g
            pos = m.end()
            g = DirectProduct(g, atom())

    g = product()
    if text[pos:].strip():
        raise ParseError(f"trailing input {text[pos:].strip()!r}", text, pos)
    return g


# ----------------------------------------------------------------------
# balls


@dataclass(frozen=True, eq=False)
class CayleyBall:
    group: GroupFamily
    radius: int
    elements: dict  # normal form -> word distance from the identity
    spheres: tuple[tuple, ...]  # spheres[k] = elements at distance k, canonical order

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, g) -> bool:
        return g in self.elements

    def sizes(self) -> list[int]:
        """``|B(r)|`` for ``r = 0..radius``."""
        return list(np.cumsum([len(s) for s in self.spheres]).tolist())

    def restrict(self, r: int) -> "CayleyBall":
        if r > self.radius:
            raise InputError(f"cannot restrict a radius-{self.radius} ball to radius {r}")
        spheres = self.spheres[: r + 1]
        elements = {g: k for k, sph in enumerate(spheres) for g in sph}
        return CayleyBall(self.group, r, elements, spheres)

    def distance(self, g) -> int:
        try:
            return self.elements[g]
        except KeyError:
            raise OutOfRangeError(
                f"{self.group.format(g)} lies outside the radius-{self.radius} ball"
            ) from None


def ball(g: GroupFamily, r: int, cap: int = DEFAULT_CAP) -> CayleyBall:
    """Breadth-first search from the identity with normal-form deduplication.

    Raises ``ResourceError`` carrying the first radius whose ball would hold
    more than ``cap`` elements.
    """
    if r < 0:
        raise InputError("radius must be nonnegative")
    e = g.identity()
    dist = {e: 0}
    spheres = [(e,)]
    frontier = [e]
    steps = g.step_functions()
    for k in range(1, r + 1):
        layer = []
        for x in frontier:
            for step in steps:
                y = step(x)
                if y not in dist:
                    dist[y] = k
                    layer.append(y)
            if len(dist) > cap:
                raise ResourceError(
                    f"ball of {g.name} exceeds cap {cap} at radius {k}", radius=k
                )
        layer.sort(key=g.key)
        spheres.append(tuple(layer))
        frontier = layer
    return CayleyBall(g, r, dist, tuple(spheres))


def growth_table(g: GroupFamily, rmax: int, cap: int = DEFAULT_CAP) -> list[tuple[int, int]]:
    b = ball(g, rmax, cap)
    return list(enumerate(b.sizes()))


@dataclass(frozen=True)
class FitDiagnostics:
    polynomial_residual: float
    exponential_residual: float
    rows_used: tuple[int, int]


@dataclass(frozen=True)
class GrowthClass:
    verdict: str  # "polynomial" | "exponential" | "inconclusive"
    degree_estimate: float
    rate_estimate: float
    residuals: FitDiagnostics

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "degree_estimate": round(self.degree_estimate, 12),
            "rate_estimate": round(self.rate_estimate, 12),
            "polynomial_residual": round(self.residuals.polynomial_residual, 12),
            "exponential_residual": round(self.residuals.exponential_residual, 12),
            "rows_used": list(self.residuals.rows_used),
        }


RESIDUAL_MARGIN = 0.10


def _fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    rms = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), rms


def classify_growth(table: Sequence[tuple[int, int]]) -> GrowthClass:
    """Polynomial vs exponential least-squares fit over the upper half of the table."""
    rows = sorted((int(r), int(n)) for r, n in table if r > 0)
    if len(rows) < 6:
        raise InputError("growth table needs at least 6 rows beyond r=0")
    rmax = rows[-1][0]
    upper = [(r, n) for r, n in rows if 2 * r >= rmax]
    if len(upper) < 3:
        upper = rows[-3:]
    r = np.array([row[0] for row in upper], dtype=float)
    logn = np.log(np.array([row[1] for row in upper], dtype=float))
    degree, res_p = _fit(np.log(r), logn)
    rate, res_e = _fit(r, logn)
    diag = FitDiagnostics(res_p, res_e, (upper[0][0], upper[-1][0]))
    if abs(res_p - res_e) <= RESIDUAL_MARGIN * max(res_p, res_e):
        verdict = "inconclusive"
    elif res_p < res_e:
        verdict = "polynomial" if degree >= 0 else "inconclusive"
    else:
        verdict = "exponential" if rate > 0 else "inconclusive"
    return GrowthClass(verdict, degree, rate, diag)


def word_distance(b: CayleyBall, g, h) -> int:
    """``|g^-1 h|`` read from the ball; ``OutOfRangeError`` if it lies outside."""
    return b.distance(b.group.mul(b.group.inv(g), h))


# ----------------------------------------------------------------------
# ball as a metric space


class BallSpace:
    """A Cayley ball exposed through the space protocol without a distance table.

    Distances are exact word lengths ``|g^-1 h|``: closed forms where the
    family has one, otherwise a lookup in the ball itself, otherwise a BFS
    restricted to the ball (an upper bound on the true word metric).
    Neighbourhood queries multiply by elements of the identity ball, so they
    are exact for radii up to the ball radius.
    """

    def __init__(self, b: CayleyBall, region_radius: int | None = None):
        self.ball = b
        self.group = b.group
        rr = b.radius if region_radius is None else min(region_radius, b.radius)
        self.region_radius = rr
        self.points = [g for sph in b.spheres[: rr + 1] for g in sph]
        self.labels = tuple(self.group.format(g) for g in self.points)
        self._pos = {g: i for i, g in enumerate(self.points)}
        self._label_pos = {lab: i for i, lab in enumerate(self.labels)}
        self._bfs_cache: dict[int, dict] = {}

    def __len__(self) -> int:
        return len(self.points)

    def __repr__(self) -> str:
        return f"BallSpace({self.group.name}, r={self.region_radius}, {len(self)} points)"

    def index(self, label: str) -> int:
        try:
            return self._label_pos[str(label)]
        except KeyError:
            raise InputError(f"unknown point {label!r}") from None

    def position(self, g) -> int:
        return self._pos[g]

    def order_key(self, i: int):
        return self.group.key(self.points[i])

    def _restricted_bfs(self, i: int) -> dict:
        if i not in self._bfs_cache:
            self._bfs_cache[i] = restricted_bfs(self.ball, self.points[i])
        return self._bfs_cache[i]

    def dist(self, i: int, j: int) -> int:
        if i == j:
            return 0
        G = self.group
        w = G.mul(G.inv(self.points[i]), self.points[j])
        n = G.length(w)
        if n is not None:
            return n
        n = self.ball.elements.get(w)
        if n is not None:
            return n
        return self._restricted_bfs(i)[self.points[j]]

    def dists_from(self, i: int) -> list[int]:
        if self.points[i] == self.group.identity():
            el = self.ball.elements
            return [el[g] for g in self.points]
        return [self.dist(i, j) for j in range(len(self))]

    def within(self, i: int, radius, strict: bool = False) -> list[int]:
        reach = math.ceil(radius) - 1 if strict else math.floor(radius)
        if reach < 0:
            return []
        if reach > self.ball.radius:
            return [j for j, d in enumerate(self.dists_from(i)) if d <= reach]
        g = self.points[i]
        mul = self.group.mul
        pos = self._pos
        out = []
        for sph in self.ball.spheres[: reach + 1]:
            for s in sph:
                j = pos.get(mul(g, s))
                if j is not None:
                    out.append(j)
        out.sort()
        return out

    def min_positive_distance(self):
        return 1 if len(self) > 1 else None


def restricted_bfs(b: CayleyBall, source) -> dict:
    """Graph distances from ``source`` using only edges inside the ball."""
    steps = b.group.step_functions()
    elements = b.elements
    dist = {source: 0}
    queue = deque([source])
    while queue:
        x = queue.popleft()
        d = dist[x] + 1
        for step in steps:
            y = step(x)
            if y in elements and y not in dist:
                dist[y] = d
                queue.append(y)
    return dist


def _stratified_sample(b: CayleyBall, region: int, budget: int, seed: int) -> list:
    spheres = [list(s) for s in b.spheres[: region + 1]]
    sizes = [len(s) for s in spheres]
    total = sum(sizes)
    if total <= budget:
        return [g for s in spheres for g in s]
    quota = [0] * len(spheres)
    quota[0] = 1
    remaining = budget - 1
    # every nonempty sphere gets one point if the budget allows, the rest proportionally
    for k in range(1, len(spheres)):
        if sizes[k] and remaining > 0:
            quota[k] = 1
            remaining -= 1
    rest = [sizes[k] - quota[k] for k in range(len(spheres))]
    pool = sum(rest)
    if remaining > 0 and pool > 0:
        shares = [remaining * r / pool for r in rest]
        extra = [min(rest[k], int(shares[k])) for k in range(len(spheres))]
        left = remaining - sum(extra)
        order = sorted(range(len(spheres)), key=lambda k: (-(shares[k] - int(shares[k])), k))
        for k in order:
            if left <= 0:
                break
            if extra[k] < rest[k]:
                extra[k] += 1
                left -= 1
        quota = [q + e for q, e in zip(quota, extra)]
    rng = np.random.default_rng(seed)
    chosen = []
    for k, sph in enumerate(spheres):
        if quota[k] >= len(sph):
            chosen.extend(sph)
        elif quota[k] > 0:
            idx = np.sort(rng.choice(len(sph), size=quota[k], replace=False))
            chosen.extend(sph[i] for i in idx)
    return chosen


def export_ball_metric(
    b: CayleyBall,
    max_points: int = 500,
    selector: str | Iterable | Callable[[CayleyBall], Iterable] = "auto",
    seed: int = 42,
    region_radius: int | None = None,
) -> FiniteMetric:
    """Finite metric on selected ball elements with exact pairwise word distances.

    ``selector``: ``"auto"`` (whole ball if it has at most ``max_points``
    elements, else sphere-stratified seeded sampling inside
    ``region_radius``, default ``radius // 2``), ``"all"``, ``"sphere"``
    (always sample), an iterable of normal forms, or a callable on the ball.
    """
    G = b.group
    region = b.radius // 2 if region_radius is None else min(region_radius, b.radius)
    if callable(selector):
        chosen = list(selector(b))
    elif selector == "all":
        chosen = [g for sph in b.spheres for g in sph]
    elif selector == "auto":
        if len(b) <= max_points:
            chosen = [g for sph in b.spheres for g in sph]
        else:
            chosen = _stratified_sample(b, region, max_points, seed)
    elif selector == "sphere":
        chosen = _stratified_sample(b, region, max_points, seed)
    elif isinstance(selector, str):
        raise InputError(f"unknown selector {selector!r}")
    else:
        chosen = list(selector)
    if len(chosen) > max_points:
        raise ResourceError(f"selection of {len(chosen)} points exceeds max_points={max_points}")
    for g in chosen:
        if g not in b.elements:
            raise OutOfRangeError(f"{G.format(g)} is not in the ball")
    chosen = sorted(set(chosen), key=lambda g: (b.elements[g], G.key(g)))
    n = len(chosen)
    rows = [[0] * n for _ in range(n)]
    invs = [G.inv(g) for g in chosen]
    for i in range(n):
        bfs = None
        for j in range(i + 1, n):
            w = G.mul(invs[i], chosen[j])
            d = G.length(w)
            if d is None:
                d = b.elements.get(w)
            if d is None:
                if bfs is None:
                    bfs = restricted_bfs(b, chosen[i])
                d = bfs[chosen[j]]
            rows[i][j] = rows[j][i] = d
    return FiniteMetric([G.format(g) for g in chosen], rows)
