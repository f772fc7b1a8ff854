import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conelab.cayley import BallSpace, ball, export_ball_metric, make_group
from conelab.errors import InputError
from conelab.metric import (
    FiniteMetric,
    all_pairs_bfs,
    annulus,
    as_rational,
    ball_points,
    gh_lower_bound,
    labeled_distortion,
    line_metric,
    rescale,
    star_metric,
    validate_metric,
)

from oracles import floyd_warshall, random_graph_metric, tree_edges, unit_graph_metric


def two_point(d):
    return FiniteMetric(["a", "b"], [[0, d], [d, 0]])


class TestRationals:
    @pytest.mark.parametrize(
        "raw, expected",
        [("3/4", Fraction(3, 4)), ("0.25", Fraction(1, 4)), (2, 2), ("6/3", 2), (0.1, Fraction(1, 10))],
    )
    def test_parsing(self, raw, expected):
        assert as_rational(raw) == expected

    def test_integral_values_become_int(self):
        assert type(as_rational("4/2")) is int

    @pytest.mark.parametrize("raw", ["x", "1/0", True, float("nan"), None])
    def test_rejects_garbage(self, raw):
        with pytest.raises(InputError):
            as_rational(raw)


class TestConstruction:
    def test_non_square_table(self):
        with pytest.raises(InputError):
            FiniteMetric(["a", "b"], [[0, 1]])

    def test_short_row(self):
        with pytest.raises(InputError):
            FiniteMetric(["a", "b"], [[0, 1], [1]])

    def test_duplicate_labels(self):
        with pytest.raises(InputError):
            FiniteMetric(["a", "a"], [[0, 1], [1, 0]])

    def test_json_round_trip(self):
        m = FiniteMetric(["a", "b", "c"], [[0, "1/2", 1], ["1/2", 0, "0.5"], [1, "1/2", 0]])
        again = FiniteMetric.from_json(json.loads(json.dumps(m.to_json())))
        assert again.labels == m.labels
        assert labeled_distortion(m, again) == 0
        assert m.to_json()["distances"][0] == ["0", "1/2", "1"]

    def test_graph_format(self):
        m = FiniteMetric.from_json({"vertices": ["a", "b", "c"], "edges": [["a", "b", "1/2"], ["b", "c", 2]]})
        assert m.dist(m.index("a"), m.index("c")) == Fraction(5, 2)

    def test_disconnected_graph(self):
        with pytest.raises(InputError):
            FiniteMetric.from_graph(["a", "b"], [])

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            FiniteMetric.load(tmp_path / "nope.json")

    def test_load_decimal_strings_stay_exact(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text('{"points": ["a", "b"], "distances": [[0, 0.1], [0.1, 0]]}')
        assert FiniteMetric.load(path).dist(0, 1) == Fraction(1, 10)


class TestValidate:
    def test_equilateral_ok(self):
        m = FiniteMetric.from_function("abc", lambda x, y: int(x != y))
        report = validate_metric(m)
        assert report.ok and report.violations == ()

    def test_triangle_witness(self):
        d = {("a", "b"): 3, ("b", "c"): 1, ("a", "c"): 1}
        m = FiniteMetric.from_function("abc", lambda x, y: 0 if x == y else d.get((x, y), d.get((y, x))))
        report = validate_metric(m)
        assert not report.ok
        assert [(v.kind, v.witness, v.slack) for v in report.violations] == [("triangle", ("a", "c", "b"), 1)]

    def test_every_kind_reported(self):
        m = FiniteMetric(["a", "b", "c"], [[1, 2, -1], [3, 0, 0], [-1, 0, 0]])
        kinds = {v.kind for v in validate_metric(m).violations}
        assert {"self-distance", "negative", "asymmetry", "zero-distance", "triangle"} <= kinds

    def test_asymmetry_slack(self):
        m = FiniteMetric(["a", "b"], [[0, 1], [Fraction(3, 2), 0]])
        (v,) = validate_metric(m).violations
        assert v.kind == "asymmetry" and v.witness == ("a", "b") and v.slack == Fraction(1, 2)

    def test_random_graph_metric_ok(self):
        m = random_graph_metric(random.Random(20), 20)
        assert validate_metric(m).ok

    def test_report_json(self):
        m = FiniteMetric(["a", "b"], [[0, 1], [2, 0]])
        assert validate_metric(m).to_json() == {
            "ok": False,
            "violations": [{"kind": "asymmetry", "witness": ["a", "b"], "slack": "1"}],
        }

    def test_rescaled_view_validates(self):
        assert validate_metric(rescale(line_metric(5), 3)).ok


class TestBallsAndAnnuli:
    line = line_metric(11)

    def test_ball(self):
        assert ball_points(self.line, "5", 2) == {"3", "4", "5", "6", "7"}
        assert ball_points(self.line, "5", 0) == {"5"}

    def test_ball_errors(self):
        with pytest.raises(InputError):
            ball_points(self.line, "11", 1)
        with pytest.raises(InputError):
            ball_points(self.line, "5", -1)

    def test_cayley_export_ball(self):
        g = make_group("Z^2")
        m = export_ball_metric(ball(g, 2))
        assert len(ball_points(m, g.format(g.identity()), 1)) == 5

    def test_annulus(self):
        assert annulus(self.line, "5", 3, 3) == {"2", "8"}
        assert annulus(self.line, "5", 4, 3) == set()
        assert annulus(self.line, "5", 3, 3, Fraction(1, 2)) == {"2", "8"}
        assert annulus(self.line, "5", 3, 3, 1) == {"1", "2", "3", "7", "8", "9"}

    def test_annulus_errors(self):
        with pytest.raises(InputError):
            annulus(self.line, "x", 1, 2)
        with pytest.raises(InputError):
            annulus(self.line, "5", -1, 2)

    def test_tree_sphere(self):
        vertices, edges = tree_edges(3, 4)
        m = all_pairs_bfs(vertices, edges)
        assert len(annulus(m, "root", 2, 2)) == 6
        for k in range(1, 5):
            assert len(annulus(m, "root", k, k)) == 3 * 2 ** (k - 1)

    def test_bfs_matches_independent_shortest_paths(self):
        vertices, edges = tree_edges(3, 3)
        assert labeled_distortion(all_pairs_bfs(vertices, edges), unit_graph_metric(vertices, edges)) == 0

    def test_star(self):
        m = star_metric(4, 1, 2)
        assert len(m) == 9
        assert m.dist(m.index("0.2"), m.index("3.2")) == 2
        assert m.dist(m.index("c"), m.index("1.1")) == Fraction(1, 2)


class TestRescale:
    def test_divides(self):
        v = rescale(two_point(6), 3)
        assert v.dist(0, 1) == 2
        assert rescale(two_point(6), 1).dist(0, 1) == 6
        assert rescale(two_point(1), 3).dist(0, 1) == Fraction(1, 3)

    @pytest.mark.parametrize("nu", [0, -2, "-1/3"])
    def test_non_positive_scale(self, nu):
        with pytest.raises(InputError):
            rescale(two_point(1), nu)

    def test_base_untouched(self):
        m = two_point(6)
        rescale(m, 3)
        assert m.dist(0, 1) == 6

    def test_cayley_ball_diameter(self):
        g = make_group("Z^2")
        space = BallSpace(ball(g, 100))
        v = rescale(space, 100)
        east, west = v.index("(100,0)"), v.index("(-100,0)")
        assert v.dist(east, west) == 2
        assert max(v.dists_from(v.index("(0,0)"))) == 1
        north = v.index("(0,100)")
        assert v.dist(east, north) == 2

    def test_within_respects_scale(self):
        v = rescale(line_metric(11), 2)
        assert v.within(5, 1) == [3, 4, 5, 6, 7]
        assert v.within(5, 1, strict=True) == [4, 5, 6]


class TestDistortionAndGH:
    def test_distortion(self):
        assert labeled_distortion(two_point(1), two_point(1)) == 0
        assert labeled_distortion(two_point(1), two_point(2)) == 1

    def test_label_mismatch(self):
        with pytest.raises(InputError):
            labeled_distortion(two_point(1), FiniteMetric(["a", "c"], [[0, 1], [1, 0]]))

    def test_gh_examples(self):
        tri = FiniteMetric.from_function("abc", lambda x, y: int(x != y))
        assert gh_lower_bound(tri, tri) == (0, True)
        assert gh_lower_bound(two_point(1), two_point(2)) == (Fraction(1, 2), True)
        assert gh_lower_bound(FiniteMetric(["o"], [[0]]), two_point(2)) == (1, True)

    def test_gh_inexact_above_cap(self):
        lo, exact = gh_lower_bound(line_metric(10), line_metric(12), exact_cap=8)
        assert not exact
        assert lo == 1

    def test_gh_empty(self):
        with pytest.raises(InputError):
            gh_lower_bound(FiniteMetric([], []), two_point(1))


# -- properties -----------------------------------------------------------

seeds = st.integers(min_value=0, max_value=10**6)
scales = st.fractions(min_value=Fraction(1, 20), max_value=20).filter(lambda q: q > 0)


@given(seeds, st.integers(min_value=1, max_value=12))
def test_graph_metrics_are_valid(seed, n):
    assert validate_metric(random_graph_metric(random.Random(seed), n)).ok


@given(seeds, st.fractions(min_value=0, max_value=12), st.fractions(min_value=0, max_value=12))
def test_annulus_is_ball_difference(seed, r1, r2):
    m = random_graph_metric(random.Random(seed), 10)
    p = m.labels[0]
    strict_inner = {x for x in m.labels if m.dist(0, m.index(x)) < r1}
    assert annulus(m, p, r1, r2) == ball_points(m, p, r2) - strict_inner


@given(seeds, scales, scales)
def test_rescale_composes(seed, a, b):
    m = random_graph_metric(random.Random(seed), 6)
    assert labeled_distortion(rescale(rescale(m, a), b).materialize(), rescale(m, a * b).materialize()) == 0


@given(seeds, seeds)
def test_distortion_symmetric(s1, s2):
    a = random_graph_metric(random.Random(s1), 5)
    b = random_graph_metric(random.Random(s2), 5)
    assert labeled_distortion(a, b) == labeled_distortion(b, a)
    assert labeled_distortion(a, a) == 0


@settings(max_examples=40, deadline=None)
@given(seeds, seeds, st.integers(min_value=1, max_value=5))
def test_gh_bounded_by_identity_correspondence(s1, s2, n):
    a = random_graph_metric(random.Random(s1), n)
    b = random_graph_metric(random.Random(s2), n)
    lo, exact = gh_lower_bound(a, b)
    assert exact
    assert lo <= Fraction(labeled_distortion(a, b), 2)
    assert gh_lower_bound(a, a)[0] == 0


def test_floyd_oracle_agrees_with_dijkstra():
    rng = random.Random(3)
    for _ in range(20):
        n = rng.randint(2, 15)
        edges = [(rng.randrange(v), v, rng.randint(1, 4)) for v in range(1, n)]
        edges += [(rng.randrange(n), rng.randrange(n), rng.randint(1, 4)) for _ in range(n)]
        edges = [(u, v, w) for u, v, w in edges if u != v]
        labels = [str(i) for i in range(n)]
        m = FiniteMetric.from_graph(labels, [(str(u), str(v), w) for u, v, w in edges])
        assert labeled_distortion(m, FiniteMetric(labels, floyd_warshall(n, edges))) == 0
