import numpy as np
import pytest

from archive_rank.graph import (
    Graph,
    GraphError,
    build_page_graph,
    inlink_count,
    pagerank,
    project_domain_graph,
    read_graph,
    read_ranks,
    write_graph,
    write_ranks,
)
from conftest import link


def dense_pagerank(n: int, edges, damping: float, tol: float = 1e-13, iters: int = 5000):
    """Independent oracle: explicit dense transition matrix, dangling
    columns replaced by uniform distributions, straight power iteration."""
    M = np.zeros((n, n))
    outdeg = np.zeros(n)
    for s, _t in edges:
        outdeg[s] += 1
    for s, t in edges:
        M[t, s] = 1.0 / outdeg[s]
    for j in range(n):
        if outdeg[j] == 0:
            M[:, j] = 1.0 / n
    v = np.full(n, 1.0 / n)
    for _ in range(iters):
        nxt = damping * (M @ v) + (1.0 - damping) / n
        if np.abs(nxt - v).sum() < tol:
            return nxt
        v = nxt
    return v


class TestBuildPageGraph:
    def test_parallel_edges_collapse(self):
        g = build_page_graph(
            [
                link("http://a.de/", "http://b.de/"),
                link("http://a.de/", "http://b.de/"),
                link("http://b.de/", "http://a.de/"),
            ]
        )
        assert g.node_count == 2 and g.edge_count == 2

    def test_empty(self):
        g = build_page_graph([])
        assert g.node_count == 0 and g.edge_count == 0

    def test_core_url_collapse_across_revisions(self):
        links = [
            link("http://a.de/x?r=1", "http://b.de/", when=1),
            link("http://a.de/x?r=2", "http://b.de/", when=2),
            link("http://a.de/x?r=3", "http://b.de/", when=3),
        ]
        g = build_page_graph(links)
        assert g.node_count == 2 and g.edge_count == 1

    def test_self_loops_dropped(self):
        g = build_page_graph([link("http://a.de/x?q=1", "http://a.de/x")])
        assert g.edge_count == 0


class TestDomainProjection:
    def test_cross_domain_edge(self):
        g = Graph.from_edges([("http://a.x.de/1", "http://b.y.de/2")])
        d = project_domain_graph(g, lambda u: ".".join(u.split("//")[1].split("/")[0].split(".")[-2:]))
        assert set(d.names) == {"x.de", "y.de"} and d.edge_count == 1

    def test_intra_domain_collapses_to_isolated_node(self):
        g = Graph.from_edges([("http://a.de/1", "http://a.de/2")])
        d = project_domain_graph(g, lambda u: "a.de")
        assert d.names == ("a.de",) and d.edge_count == 0

    def test_parallel_domain_edges_dedup(self):
        g = Graph.from_edges(
            [("http://a.de/1", "http://b.de/1"), ("http://a.de/2", "http://b.de/2")]
        )
        d = project_domain_graph(g, lambda u: u.split("//")[1].split("/")[0])
        assert d.edge_count == 1


class TestInlinkCount:
    def test_no_links(self):
        assert inlink_count([], "http://t.de/", "all") == 0

    def test_two_distinct_sources_count_in_both_modes(self):
        links = [
            link("http://s1.de/", "http://t.de/", "x", when=1),
            link("http://s2.de/", "http://t.de/", "x", when=2),
        ]
        assert inlink_count(links, "http://t.de/", "all") == 2
        assert inlink_count(links, "http://t.de/", "unique_per_revision") == 2

    def test_repeat_within_one_revision(self):
        links = [
            link("http://s.de/", "http://t.de/", "x", when=1),
            link("http://s.de/", "http://t.de/", "x", when=1),
        ]
        assert inlink_count(links, "http://t.de/", "unique_per_revision") == 1
        assert inlink_count(links, "http://t.de/", "all") == 2


class TestPagerank:
    def test_two_node_cycle_is_uniform(self):
        g = Graph.from_edges([("a", "b"), ("b", "a")])
        for damping in (0.3, 0.85, 0.99):
            rv = pagerank(g, damping=damping)
            np.testing.assert_allclose(rv.scores, [0.5, 0.5], atol=1e-12)

    def test_three_node_cycle_is_uniform(self):
        g = Graph.from_edges([("a", "b"), ("b", "c"), ("c", "a")])
        rv = pagerank(g)
        np.testing.assert_allclose(rv.scores, [1 / 3] * 3, atol=1e-9)

    def test_star_with_dangling_center_matches_dense_oracle(self):
        g = Graph.from_edges([("a", "c"), ("b", "c")])
        rv = pagerank(g, damping=0.85, tolerance=1e-13, max_iterations=500)
        ids = g.ids
        edges = [(ids["a"], ids["c"]), (ids["b"], ids["c"])]
        oracle = dense_pagerank(3, edges, 0.85)
        assert np.abs(rv.scores - oracle).sum() < 1e-9

    def test_empty_graph_raises(self):
        with pytest.raises(GraphError):
            pagerank(Graph.from_edges([]))

    def test_scores_sum_to_one_with_dangling_nodes(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(2, 30))
            edges = {(int(rng.integers(n)), int(rng.integers(n))) for _ in range(n * 2)}
            edges = {(s, t) for s, t in edges if s != t}
            if not edges:
                continue
            names = [f"n{i}" for i in range(n)]
            g = Graph.from_edges([(names[s], names[t]) for s, t in edges])
            rv = pagerank(g)
            assert abs(rv.scores.sum() - 1.0) < 1e-9
            assert (rv.scores >= 0).all()

    def test_permutation_equivariance(self):
        edges = [("a", "b"), ("b", "c"), ("c", "a"), ("a", "c"), ("d", "a")]
        g1 = Graph.from_edges(edges)
        renamed = {"a": "z", "b": "y", "c": "x", "d": "w"}
        g2 = Graph.from_edges([(renamed[s], renamed[t]) for s, t in edges])
        rv1 = pagerank(g1, tolerance=1e-13, max_iterations=500)
        rv2 = pagerank(g2, tolerance=1e-13, max_iterations=500)
        for name in renamed:
            s1 = rv1.scores[g1.ids[name]]
            s2 = rv2.scores[g2.ids[renamed[name]]]
            assert abs(s1 - s2) < 1e-9

    def test_uniform_on_symmetric_regular_graph(self):
        # bidirectional ring: every node has in/out degree 2
        n = 8
        edges = []
        for i in range(n):
            edges.append((f"n{i}", f"n{(i + 1) % n}"))
            edges.append((f"n{(i + 1) % n}", f"n{i}"))
        rv = pagerank(Graph.from_edges(edges), tolerance=1e-12, max_iterations=500)
        np.testing.assert_allclose(rv.scores, np.full(n, 1 / n), atol=1e-9)

    def test_random_graphs_match_dense_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            n = int(rng.integers(2, 51))
            m = int(rng.integers(1, n * 3))
            edges = {(int(rng.integers(n)), int(rng.integers(n))) for _ in range(m)}
            edges = sorted((s, t) for s, t in edges if s != t)
            if not edges:
                continue
            names = [f"node{i:02d}" for i in range(n)]
            g = Graph.from_edges([(names[s], names[t]) for s, t in edges])
            id_edges = [(g.ids[names[s]], g.ids[names[t]]) for s, t in edges]
            rv = pagerank(g, damping=0.85, tolerance=1e-13, max_iterations=2000)
            oracle = dense_pagerank(g.node_count, id_edges, 0.85)
            assert np.abs(rv.scores - oracle).sum() < 1e-9

    def test_reports_iterations_and_residual(self):
        g = Graph.from_edges([("a", "b"), ("b", "a")])
        rv = pagerank(g, tolerance=1e-9, max_iterations=50)
        assert 1 <= rv.iterations_run <= 50
        assert rv.residual < 1e-9


class TestPersistence:
    def test_graph_round_trip(self, tmp_path):
        g = Graph.from_edges([("a", "b"), ("b", "c"), ("c", "a")])
        with open(tmp_path / "graph.tsv", "w") as gf, open(tmp_path / "nodes.tsv", "w") as nf:
            write_graph(g, gf, nf)
        header = (tmp_path / "graph.tsv").read_text().splitlines()[0]
        assert header == f"#nodes {g.node_count} #edges {g.edge_count}"
        with open(tmp_path / "graph.tsv") as gf, open(tmp_path / "nodes.tsv") as nf:
            g2 = read_graph(gf, nf)
        assert g2.names == g.names
        assert np.array_equal(g2.src, g.src) and np.array_equal(g2.dst, g.dst)

    def test_rank_round_trip_full_precision(self, tmp_path):
        g = Graph.from_edges([("a", "b"), ("b", "c"), ("c", "a"), ("a", "c")])
        rv = pagerank(g)
        with open(tmp_path / "ranks.tsv", "w") as fh:
            write_ranks(rv, fh)
        with open(tmp_path / "ranks.tsv") as fh:
            scores = read_ranks(fh)
        assert np.array_equal(scores, rv.scores)
