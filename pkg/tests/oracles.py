"""Independent reference implementations used to check the library.

Nothing here imports the solvers under test; they share only the
``FiniteMetric`` container.
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from conelab.metric import FiniteMetric


def floyd_warshall(n: int, edges) -> list[list]:
    inf = None
    d = [[0 if i == j else inf for j in range(n)] for i in range(n)]
    for u, v, w in edges:
        if d[u][v] is None or w < d[u][v]:
            d[u][v] = d[v][u] = w
    for k in range(n):
        for i in range(n):
            if d[i][k] is None:
                continue
            for j in range(n):
                if d[k][j] is None:
                    continue
                alt = d[i][k] + d[k][j]
                if d[i][j] is None or alt < d[i][j]:
                    d[i][j] = alt
    return d


def random_graph_metric(rng: random.Random, n: int, extra: float = 0.3, max_len: int = 5) -> FiniteMetric:
    """Connected random graph with integer or half-integer edge lengths."""
    edges = []
    for v in range(1, n):
        edges.append((rng.randrange(v), v, Fraction(rng.randint(1, 2 * max_len), 2)))
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < extra / max(n, 1):
                edges.append((u, v, Fraction(rng.randint(1, 2 * max_len), 2)))
    d = floyd_warshall(n, edges)
    return FiniteMetric([f"v{i:02d}" for i in range(n)], d)


def annulus_labels(m, p, r1, r2, slack=0):
    pi = m.index(p)
    return [m.labels[i] for i in range(len(m)) if r1 - slack <= m.dist(pi, i) <= r2 + slack]


def brute_packing(m, p, r1, r2, l, slack=0) -> tuple[int, tuple[str, ...]]:
    """Largest l-separated subset by exhaustive enumeration; the lexicographically least one.

    Walks every separated subset of the label-sorted annulus (include before
    exclude), cutting only branches that cannot reach the current best size,
    so the first maximum found is the lexicographically least.
    """
    pts = sorted(annulus_labels(m, p, r1, r2, slack))
    idx = [m.index(x) for x in pts]
    best: list = [0, ()]

    def walk(k, chosen):
        if len(chosen) + len(pts) - k <= best[0]:
            return
        if k == len(pts):
            best[:] = [len(chosen), tuple(pts[i] for i in chosen)]
            return
        if all(m.dist(idx[k], idx[i]) >= l for i in chosen):
            walk(k + 1, chosen + [k])
        walk(k + 1, chosen)

    walk(0, [])
    return best[0], best[1]


def brute_packing_small(m, p, r1, r2, l, slack=0) -> int:
    """Plain subset enumeration for tiny annuli (cross-checks ``brute_packing``)."""
    pts = annulus_labels(m, p, r1, r2, slack)
    idx = {x: m.index(x) for x in pts}
    for size in range(len(pts), 0, -1):
        for combo in itertools.combinations(pts, size):
            if all(m.dist(idx[a], idx[b]) >= l for a, b in itertools.combinations(combo, 2)):
                return size
    return 0


def four_point(d, w, x, y, z) -> Fraction:
    s = sorted([d[w][x] + d[y][z], d[w][y] + d[x][z], d[w][z] + d[x][y]])
    return Fraction(s[2] - s[1], 2)


def word_length_by_deepening(group, target, limit: int) -> int | None:
    """Shortest generator word reaching ``target`` by iterative deepening (no BFS dedup)."""
    gens = [group.generator(s) for s in group.symbols]

    def dfs(x, depth):
        if x == target:
            return True
        if depth == 0:
            return False
        return any(dfs(group.mul(x, g), depth - 1) for g in gens)

    for depth in range(limit + 1):
        if dfs(group.identity(), depth):
            return depth
    return None


def tree_edges(degree: int, depth: int) -> tuple[list[str], list[tuple[str, str]]]:
    vertices, edges, frontier = ["root"], [], ["root"]
    count = 0
    for lvl in range(depth):
        nxt = []
        for v in frontier:
            for _ in range(degree if lvl == 0 else degree - 1):
                count += 1
                w = f"t{count}"
                vertices.append(w)
                edges.append((v, w))
                nxt.append(w)
        frontier = nxt
    return vertices, edges


def unit_graph_metric(vertices, edges) -> FiniteMetric:
    index = {v: i for i, v in enumerate(vertices)}
    d = floyd_warshall(len(vertices), [(index[u], index[v], 1) for u, v in edges])
    return FiniteMetric(vertices, d)


# -- germs ------------------------------------------------------------

GERM_EXP_RATES = (Fraction(0), Fraction(1, 2), Fraction(1))
GERM_POLY_POWERS = tuple(Fraction(x, 2) for x in (-2, -1, 0, 1, 2, 3, 4, 6))
GERM_LOG_POWERS = (Fraction(0), Fraction(1), Fraction(2))


def random_germ_terms(rng: random.Random, max_terms: int = 3) -> list[tuple]:
    """Positive-coefficient terms ``(c, e, p, k)`` with distinct triples.

    The universe is chosen so that at n = 2^30 every dominance gap beats
    the coefficient spread (coefficients in 1..10, log n > 20).
    """
    count = rng.randint(1, max_terms)
    triples = set()
    while len(triples) < count:
        triples.add((rng.choice(GERM_EXP_RATES), rng.choice(GERM_POLY_POWERS), rng.choice(GERM_LOG_POWERS)))
    return [(Fraction(rng.randint(1, 10)),) + t for t in triples]


def germ_log_value(terms, n) -> "mpmath.mpf":
    """``log g(n)`` by direct high-precision evaluation of raw terms."""
    import mpmath

    with mpmath.workdps(80):
        N = mpmath.mpf(n)
        total = mpmath.fsum(
            mpmath.mpf(c.numerator) / c.denominator
            * mpmath.exp(mpmath.mpf(e.numerator) / e.denominator * N)
            * N ** (mpmath.mpf(p.numerator) / p.denominator)
            * mpmath.log(N) ** int(k)
            for c, e, p, k in terms
        )
        return mpmath.log(total)


# -- packing queries ----------------------------------------------------


def random_query_params(rng: random.Random, m) -> tuple:
    """``(p, r1, r2, l, slack)`` drawn from the space's own distance values."""
    p = rng.choice(m.labels)
    values = sorted({d for i in range(len(m)) for d in m.dists_from(i)})
    r1, r2 = sorted(rng.choice(values) for _ in range(2))
    if rng.random() < 0.1:
        r1, r2 = r2 + 1, r2  # empty annulus now and then
    l = rng.choice([v for v in values if v > 0] or [1])
    if rng.random() < 0.3:
        l = l - Fraction(1, 4) if l > Fraction(1, 4) else l
    slack = rng.choice([0, 0, 0, Fraction(1, 2), 1])
    return p, r1, r2, l, slack
