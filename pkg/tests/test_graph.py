import itertools

import numpy as np
import pytest

from dbgraph.embeddings import EdgeList
from dbgraph.graph import (
    GraphError,
    build_graph,
    connected_components,
    degree_stats,
    export_distributions,
    louvain,
    modularity,
)


def edge_list(pairs, sims=None, threshold=0.0):
    pairs = list(pairs)
    if sims is None:
        sims = [1.0] * len(pairs)
    src = np.array([a for a, _ in pairs], dtype=np.int64)
    dst = np.array([b for _, b in pairs], dtype=np.int64)
    return EdgeList(src=src, dst=dst, sim=np.array(sims, dtype=np.float64),
                    threshold=threshold)


def barbell():
    """Two 4-cliques joined by a single bridge (nodes 3-4)."""
    edges = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    edges += [(i, j) for i in range(4, 8) for j in range(i + 1, 8)]
    edges += [(3, 4)]
    return build_graph(edge_list(edges), 8)


def exhaustive_best_partition(graph):
    """Oracle: maximum-modularity partition by enumerating all partitions."""
    n = graph.node_count

    def partitions(nodes):
        if not nodes:
            yield []
            return
        head, *rest = nodes
        for p in partitions(rest):
            for i in range(len(p)):
                yield p[:i] + [[head] + p[i]] + p[i + 1:]
            yield [[head]] + p

    best_q, best_p = -1.0, None
    for p in partitions(list(range(n))):
        labels = np.empty(n, dtype=np.int64)
        for c, members in enumerate(p):
            labels[members] = c
        q = modularity(graph, labels)
        if q > best_q:
            best_q, best_p = q, p
    return best_q, best_p


class TestBuildGraph:
    def test_path_plus_isolate(self):
        g = build_graph(edge_list([(0, 1), (1, 2)]), 4)
        assert g.degrees().tolist() == [1, 2, 1, 0]

    def test_empty_edges(self):
        g = build_graph(edge_list([]), 5)
        assert g.degrees().tolist() == [0] * 5

    def test_duplicate_edge_rejected(self):
        with pytest.raises(GraphError, match="duplicate"):
            build_graph(edge_list([(0, 1), (0, 1)]), 3)

    def test_out_of_range_rejected(self):
        with pytest.raises(GraphError, match="out of range"):
            build_graph(edge_list([(0, 5)]), 3)

    def test_symmetry(self):
        g = build_graph(edge_list([(0, 2), (1, 2)], sims=[0.95, 0.97]), 3)
        for v in range(3):
            for u, w in zip(g.neighbors(v), g.weights[g.indptr[v]:g.indptr[v + 1]]):
                back = g.neighbors(u).tolist().index(v)
                assert g.weights[g.indptr[u] + back] == w


class TestConnectedComponents:
    def test_path_of_four(self):
        g = build_graph(edge_list([(0, 1), (1, 2), (2, 3)]), 4)
        labels, sizes = connected_components(g)
        assert sizes == [4]
        assert len(set(labels.tolist())) == 1

    def test_all_isolated(self):
        g = build_graph(edge_list([]), 5)
        labels, sizes = connected_components(g)
        assert sizes == [1] * 5
        assert sorted(set(labels.tolist())) == list(range(5))

    def test_two_triangles_plus_isolates(self):
        edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]
        g = build_graph(edge_list(edges), 8)
        labels, sizes = connected_components(g)
        assert sizes == [3, 3, 1, 1]
        stats = degree_stats(g)
        assert stats.cc_count == 4
        assert stats.isolated_count == 2

    def test_edge_order_invariance(self):
        edges = [(0, 1), (2, 3), (1, 2), (4, 5)]
        for perm in itertools.permutations(edges):
            g = build_graph(edge_list(perm), 6)
            _, sizes = connected_components(g)
            assert sizes == [4, 2]


class TestDegreeStats:
    def test_star(self):
        g = build_graph(edge_list([(0, 1), (0, 2), (0, 3), (0, 4)]), 5)
        stats = degree_stats(g)
        assert (stats.degree_min, stats.degree_max) == (1, 4)
        assert stats.degree_mean == pytest.approx(1.6)
        assert stats.degree_median == 1

    def test_empty(self):
        stats = degree_stats(build_graph(edge_list([]), 3))
        assert stats.degree_min == stats.degree_max == stats.degree_median == 0
        assert stats.degree_mean == 0.0

    def test_handshake_identity(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            n = int(rng.integers(3, 30))
            pairs = sorted(
                {(int(a), int(b)) for a, b in rng.integers(0, n, size=(20, 2)) if a < b}
            )
            g = build_graph(edge_list(pairs), n)
            stats = degree_stats(g)
            assert stats.degree_mean == pytest.approx(2 * stats.edge_count / n, abs=1e-12)

    def test_median_lower_middle(self):
        g = build_graph(edge_list([(0, 1)]), 4)  # degrees 1,1,0,0
        assert degree_stats(g).degree_median == 0


class TestModularity:
    def test_single_community_zero(self):
        g = barbell()
        assert modularity(g, np.zeros(8, dtype=np.int64)) == pytest.approx(0.0, abs=1e-12)

    def test_singletons_negative(self):
        g = barbell()
        assert modularity(g, np.arange(8)) < 0

    def test_barbell_clique_partition_matches_oracle(self):
        g = barbell()
        labels = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        best_q, _ = exhaustive_best_partition(g)
        assert modularity(g, labels) == pytest.approx(best_q, abs=1e-12)

    def test_edgeless_zero(self):
        g = build_graph(edge_list([]), 4)
        assert modularity(g, np.zeros(4, dtype=np.int64)) == 0.0


class TestLouvain:
    def test_barbell_recovers_cliques(self):
        g = barbell()
        part = louvain(g, seed=0)
        best_q, _ = exhaustive_best_partition(g)
        assert part.modularity == pytest.approx(best_q, abs=1e-9)
        assert len(set(part.labels[:4].tolist())) == 1
        assert len(set(part.labels[4:].tolist())) == 1
        assert part.labels[0] != part.labels[7]

    def test_beats_singletons(self):
        rng = np.random.default_rng(4)
        for seed in range(5):
            n = 20
            pairs = sorted(
                {(int(a), int(b)) for a, b in rng.integers(0, n, size=(40, 2)) if a < b}
            )
            if not pairs:
                continue
            g = build_graph(edge_list(pairs), n)
            part = louvain(g, seed=seed)
            assert part.modularity >= modularity(g, np.arange(n)) - 1e-12

    def test_deterministic(self):
        g = barbell()
        a = louvain(g, seed=123)
        b = louvain(g, seed=123)
        assert a.labels.tolist() == b.labels.tolist()
        assert a.modularity == b.modularity

    def test_edgeless_singletons(self):
        g = build_graph(edge_list([]), 5)
        part = louvain(g, seed=0)
        assert part.modularity == 0.0
        assert sorted(part.labels.tolist()) == list(range(5))


class TestExportDistributions:
    def test_barbell_histograms(self, tmp_path):
        import json

        g = barbell()
        part = louvain(g, seed=0)
        export_distributions(g, part, tmp_path)
        comm = json.loads((tmp_path / "community_size_histogram.json").read_text())
        assert comm["linear"] == {"4": 2}
        cc = json.loads((tmp_path / "component_size_histogram.json").read_text())
        assert cc["linear"] == {"8": 1}

    def test_empty_graph_degree_mass_at_zero(self, tmp_path):
        import json

        g = build_graph(edge_list([]), 3)
        part = louvain(g, seed=0)
        export_distributions(g, part, tmp_path)
        deg = json.loads((tmp_path / "degree_histogram.json").read_text())
        assert deg["linear"] == {"0": 3}

    def test_path_of_three_cc(self, tmp_path):
        import json

        g = build_graph(edge_list([(0, 1), (1, 2)]), 3)
        part = louvain(g, seed=0)
        export_distributions(g, part, tmp_path)
        cc = json.loads((tmp_path / "component_size_histogram.json").read_text())
        assert cc["linear"] == {"3": 1}
