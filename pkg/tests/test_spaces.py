import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpextend.errors import (
    EmptyHypothesis,
    InvalidHypothesis,
    LengthMismatch,
    SizeMismatch,
    TooLarge,
)
from dpextend.spaces import (
    HypothesisSet,
    LabeledGraph,
    cover_size_table,
    edge_distance,
    enumerate_graphs,
    explicit_space,
    graph_space,
    hamming_space,
    min_vertex_cover_size,
    node_distance,
    validate_metric,
)


def brute_force_cover(g1: LabeledGraph, g2: LabeledGraph) -> int:
    """Smallest vertex set touching every edge of the symmetric difference."""
    diff = set(g1.edges) ^ set(g2.edges)
    for size in range(g1.n + 1):
        for subset in itertools.combinations(range(g1.n), size):
            chosen = set(subset)
            if all(u in chosen or v in chosen for u, v in diff):
                return size
    raise AssertionError


def brute_force_graphs(n, max_degree=None):
    pairs = list(itertools.combinations(range(n), 2))
    out = []
    for bits in range(1 << len(pairs)):
        edges = [p for b, p in enumerate(pairs) if bits >> b & 1]
        deg = [0] * n
        for u, v in edges:
            deg[u] += 1
            deg[v] += 1
        if max_degree is None or max(deg, default=0) <= max_degree:
            out.append(frozenset(edges))
    return out


class TestValidateMetric:
    def test_triangle_violation(self):
        m = explicit_space("abc", [[0, 1, 3], [1, 0, 1], [3, 1, 0]])
        result = validate_metric(m)
        assert not result
        assert result.kind == "TriangleViolation"
        assert result.witness == (0, 1, 2)

    def test_line_metric_ok(self):
        m = explicit_space("abc", [[abs(i - j) for j in range(3)] for i in range(3)])
        assert validate_metric(m).ok

    def test_non_symmetric(self):
        m = explicit_space("ab", [[0, 1], [2, 0]])
        result = validate_metric(m)
        assert (result.kind, result.witness) == ("NonSymmetric", (0, 1))

    def test_negative_and_diagonal(self):
        assert validate_metric(explicit_space("ab", [[0, -1], [-1, 0]])).kind == "NegativeDistance"
        result = validate_metric(explicit_space("ab", [[0, 1], [1, 0.5]]))
        assert (result.kind, result.witness) == ("NonzeroDiagonal", (1, 1))

    def test_duplicate_datasets_rejected(self):
        result = validate_metric(hamming_space(["0", "0"], labels=["x", "y"]))
        assert (result.kind, result.witness) == ("DuplicateDatasets", (0, 1))

    def test_raise_for_error(self):
        from dpextend.errors import MetricError

        with pytest.raises(MetricError) as exc:
            validate_metric(explicit_space("ab", [[0, 1], [2, 0]])).raise_for_error()
        assert exc.value.witness == (0, 1)

    def test_single_point(self):
        assert validate_metric(explicit_space(["only"], [[0]])).ok


class TestHamming:
    def test_distances(self):
        m = hamming_space(["00", "01", "11"])
        assert m.labels == ("00", "01", "11")
        assert m.distance(0, 2) == 2
        assert m.distance(0, 1) == m.distance(1, 2) == 1

    def test_single_vector(self):
        m = hamming_space([[1, 0, 1]])
        assert len(m) == 1
        assert m.matrix().shape == (1, 1)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            hamming_space(["00", "1"])

    @given(st.lists(st.text("abc", min_size=4, max_size=4), min_size=1, max_size=8, unique=True))
    def test_is_metric(self, vectors):
        assert validate_metric(hamming_space(vectors)).ok


class TestGraphs:
    def test_json_round_trip(self):
        g = LabeledGraph.from_edges(4, [(0, 1), (2, 3)])
        assert LabeledGraph.from_json(g.to_json()) == g
        assert g.to_json() == {"n": 4, "edges": [[0, 1], [2, 3]]}

    def test_adjacency(self):
        g = LabeledGraph.from_edges(3, [(0, 2)])
        a = g.adjacency
        assert a[0, 2] and a[2, 0] and a.sum() == 2
        assert LabeledGraph.from_adjacency(a) == g
        with pytest.raises(ValueError):
            LabeledGraph.from_adjacency([[0, 1], [0, 0]])
        with pytest.raises(ValueError):
            LabeledGraph.from_edges(3, [(1, 1)])

    def test_node_distance_examples(self):
        empty = LabeledGraph(3)
        triangle = LabeledGraph.from_edges(3, [(0, 1), (0, 2), (1, 2)])
        assert node_distance(empty, empty) == 0
        assert brute_force_cover(empty, triangle) == 2
        assert node_distance(empty, triangle) == 2
        one_edge = LabeledGraph.from_edges(3, [(0, 1)])
        assert node_distance(empty, one_edge) == 1

    def test_edge_distance_examples(self):
        triangle = LabeledGraph.from_edges(3, [(0, 1), (0, 2), (1, 2)])
        assert edge_distance(triangle, triangle) == 0
        assert edge_distance(LabeledGraph(3), triangle) == 3
        k4 = LabeledGraph(4, (1 << 6) - 1)
        assert edge_distance(LabeledGraph(4), k4) == 6

    def test_size_mismatch(self):
        with pytest.raises(SizeMismatch):
            node_distance(LabeledGraph(3), LabeledGraph(4))
        with pytest.raises(SizeMismatch):
            edge_distance(LabeledGraph(3), LabeledGraph(4))

    def test_enumeration_counts(self):
        assert len(enumerate_graphs(3)) == 8
        assert len(enumerate_graphs(4)) == 64
        assert len(enumerate_graphs(3, max_degree=1)) == len(brute_force_graphs(3, 1)) == 4
        assert len(enumerate_graphs(4, max_degree=1)) == len(brute_force_graphs(4, 1)) == 10

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_enumeration_matches_brute_force(self, n):
        for bound in [None, 1, 2]:
            ours = [frozenset(g.edges) for g in enumerate_graphs(n, bound)]
            assert sorted(ours, key=sorted) == sorted(brute_force_graphs(n, bound), key=sorted)
        assert len(enumerate_graphs(n, max_degree=n - 1)) == 2 ** math.comb(n, 2)

    def test_canonical_order(self):
        masks = [g.mask for g in enumerate_graphs(4)]
        assert masks == sorted(masks) == list(range(64))

    def test_enumeration_cap(self):
        with pytest.raises(TooLarge):
            enumerate_graphs(7)
        assert len(enumerate_graphs(7, max_degree=0, cap=7)) == 1

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_node_distance_matches_oracle(self, n):
        graphs = enumerate_graphs(n)
        table = cover_size_table(n)
        for g1 in graphs:
            for g2 in graphs:
                expected = brute_force_cover(g1, g2)
                assert node_distance(g1, g2) == expected
                assert table[g1.mask ^ g2.mask] == expected

    @pytest.mark.parametrize("n", [3, 4])
    def test_node_distance_metric_axioms(self, n):
        space = graph_space(n)
        assert validate_metric(space).ok

    @pytest.mark.parametrize("n", [3, 4])
    def test_node_at_most_edge_distance(self, n):
        graphs = enumerate_graphs(n)
        for g1 in graphs:
            for g2 in graphs:
                assert node_distance(g1, g2) <= edge_distance(g1, g2)

    def test_cover_cap(self):
        assert min_vertex_cover_size(8, (1 << 28) - 1) == 7
        with pytest.raises(TooLarge):
            min_vertex_cover_size(9, 1)

    def test_graph_space_large_n_uses_direct_search(self):
        graphs = [LabeledGraph(8), LabeledGraph.from_edges(8, [(0, 1), (2, 3), (4, 5)])]
        space = graph_space(8, graphs)
        assert space.distance(0, 1) == 3

    def test_graph_space_block(self):
        space = graph_space(4)
        d = space.matrix()
        assert d.shape == (64, 64)
        assert d[0, 63] == 3  # K4 needs three cover vertices


class TestHypothesisSet:
    def test_sorted_and_base(self):
        space = explicit_space("abc", [[0, 1, 2], [1, 0, 1], [2, 1, 0]])
        h = HypothesisSet.of(space, [2, 0])
        assert h.members == (0, 2)
        assert h.base == 0
        assert HypothesisSet.from_labels(space, ["c"]).members == (2,)

    def test_invalid(self):
        space = explicit_space("ab", [[0, 1], [1, 0]])
        with pytest.raises(EmptyHypothesis):
            HypothesisSet(())
        with pytest.raises(InvalidHypothesis):
            HypothesisSet.of(space, [0, 0])
        with pytest.raises(InvalidHypothesis):
            HypothesisSet.of(space, [5])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dist_to_set(seed):
    rng = np.random.default_rng(seed)
    space = graph_space(4)
    members = sorted(rng.choice(64, size=int(rng.integers(1, 10)), replace=False).tolist())
    expected = space.matrix()[:, members].min(axis=1)
    assert np.array_equal(space.dist_to_set(members), expected)
