"""Temporal graph model, parsing, neighborhoods, and the BFS distance oracle."""

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import A1, A2, A3, P1, P2, V1, graph_from_edges
from hthgn.errors import NodeNotFoundError, ParseError, SchemaError
from hthgn.graph import (
    NodeRef,
    Snapshot,
    TypedEdge,
    TypeRegistry,
    khop_oracle,
    neighbors,
    parse_features,
    parse_snapshots,
    write_snapshots,
)


def random_hetero_graph(seed, n_max=60):
    """Seeded random 3-type graph for property tests; returns one snapshot."""
    rng = np.random.default_rng(seed)
    counts = rng.integers(2, max(3, n_max // 3), size=3)
    types = ("X", "Y", "Z")
    edge_lists = []
    nodes = [(t, i) for t, c in zip(types, counts) for i in range(int(c))]
    n_edges = int(rng.integers(1, 3 * len(nodes)))
    for _ in range(n_edges):
        a = nodes[int(rng.integers(len(nodes)))]
        b = nodes[int(rng.integers(len(nodes)))]
        if a == b:
            continue
        rel = "-".join(sorted((a[0], b[0])))
        edge_lists.append((a[0], a[1], rel, b[0], b[1]))
    if not edge_lists:
        edge_lists.append(("X", 0, "X-Y", "Y", 0))
    return graph_from_edges([edge_lists]).snapshots[0]


class TestParsing:
    def test_toy_tsv(self, toy_tsv):
        g = parse_snapshots(toy_tsv)
        assert len(g.snapshots) == 1
        s = g.snapshots[0]
        assert s.nodes == {A1, A2, A3, P1, P2, V1}
        assert len(s.edges) == 5

    def test_comments_and_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "g.tsv"
        path.write_text("# header\n\n0\ta\t0\tr\tb\t1\n", encoding="utf-8")
        g = parse_snapshots(path)
        assert len(g.snapshots[0].edges) == 1

    def test_duplicates_deduplicated(self, tmp_path):
        path = tmp_path / "g.tsv"
        line = "0\ta\t0\tr\tb\t1\n"
        path.write_text(line * 3, encoding="utf-8")
        g = parse_snapshots(path)
        assert len(g.snapshots[0].edges) == 1

    def test_bad_field_count_reports_line(self, tmp_path):
        path = tmp_path / "g.tsv"
        path.write_text("0\ta\t0\tr\tb\t1\n0\ta\t0\tr\n", encoding="utf-8")
        with pytest.raises(ParseError) as err:
            parse_snapshots(path)
        assert err.value.line_no == 2

    def test_non_integer_id(self, tmp_path):
        path = tmp_path / "g.tsv"
        path.write_text("0\ta\tzero\tr\tb\t1\n", encoding="utf-8")
        with pytest.raises(ParseError):
            parse_snapshots(path)

    def test_non_contiguous_snapshots_named(self, tmp_path):
        path = tmp_path / "g.tsv"
        path.write_text("0\ta\t0\tr\tb\t1\n2\ta\t0\tr\tb\t1\n", encoding="utf-8")
        with pytest.raises(SchemaError, match="t=\\[1\\]"):
            parse_snapshots(path)

    def test_relation_endpoint_conflict(self, tmp_path):
        path = tmp_path / "g.tsv"
        path.write_text("0\ta\t0\tr\tb\t1\n0\ta\t0\tr\tc\t1\n", encoding="utf-8")
        with pytest.raises(SchemaError):
            parse_snapshots(path)

    def test_frozen_registry_rejects_new_types(self, toy_tsv, tmp_path):
        g = parse_snapshots(toy_tsv)
        g.registry.freeze()
        path = tmp_path / "extra.tsv"
        path.write_text("0\tlab\t0\thosts\tauthor\t1\n", encoding="utf-8")
        with pytest.raises(SchemaError):
            parse_snapshots(path, registry=g.registry)

    def test_round_trip(self, toy_graph_2t, tmp_path):
        path = tmp_path / "out.tsv"
        write_snapshots(toy_graph_2t, path)
        g = parse_snapshots(path)
        assert len(g.snapshots) == 2
        for orig, back in zip(toy_graph_2t.snapshots, g.snapshots):
            assert back.nodes == orig.nodes
            assert back.edges == orig.edges


class TestFeatures:
    def test_parse_with_headers(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text(
            "type,id,f0,f1\nauthor,1,0.5,1.5\ntype,id,f0,f1\npaper,1,2,3\n",
            encoding="utf-8",
        )
        feats = parse_features(path)
        assert np.allclose(feats[A1], [0.5, 1.5])
        assert np.allclose(feats[P1], [2.0, 3.0])

    def test_first_occurrence_wins(self, tmp_path, caplog):
        path = tmp_path / "f.csv"
        path.write_text("author,1,1.0\nauthor,1,9.0\n", encoding="utf-8")
        feats = parse_features(path)
        assert feats[A1][0] == 1.0

    def test_width_mismatch(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("author,1,1.0\nauthor,2,1.0,2.0\n", encoding="utf-8")
        with pytest.raises(SchemaError):
            parse_features(path)

    def test_non_numeric_value(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("author,1,abc\n", encoding="utf-8")
        with pytest.raises(ParseError):
            parse_features(path)


class TestRegistry:
    def test_canonical_orientation_flips(self):
        reg = TypeRegistry()
        reg.add_relation("writes", "author", "paper")
        e = reg.canonical_edge(NodeRef("paper", 7), NodeRef("author", 2), "writes")
        assert e.src == NodeRef("author", 2)
        assert e.dst == NodeRef("paper", 7)

    def test_same_type_relation_sorts_endpoints(self):
        reg = TypeRegistry()
        reg.add_relation("cites", "paper", "paper")
        e = reg.canonical_edge(NodeRef("paper", 9), NodeRef("paper", 3), "cites")
        assert (e.src.local_id, e.dst.local_id) == (3, 9)

    def test_wrong_endpoint_types_rejected(self):
        reg = TypeRegistry()
        reg.add_relation("writes", "author", "paper")
        with pytest.raises(SchemaError):
            reg.canonical_edge(NodeRef("venue", 0), NodeRef("paper", 1), "writes")

    def test_pair_key_orientation_free(self):
        e1 = TypedEdge(NodeRef("a", 1), NodeRef("b", 2), "r")
        e2 = TypedEdge(NodeRef("b", 2), NodeRef("a", 1), "r")
        assert e1.pair_key() == e2.pair_key()


class TestNeighborhoods:
    def test_neighbors_toy(self, toy_graph):
        s = toy_graph.snapshots[0]
        assert neighbors(s, A1) == {P1, V1}
        assert neighbors(s, A1, rel="attends") == {V1}
        assert neighbors(s, P1) == {A1, A2, A3}

    def test_missing_node(self, toy_graph):
        with pytest.raises(NodeNotFoundError):
            neighbors(toy_graph.snapshots[0], NodeRef("author", 99))

    def test_khop_toy_golden(self, toy_graph):
        s = toy_graph.snapshots[0]
        assert set(khop_oracle(s, A1, 1)) == {P1, V1}
        assert set(khop_oracle(s, A1, 2)) == {P1, V1, A2, A3, P2}
        assert A1 not in khop_oracle(s, A1, 3)

    def test_khop_distances(self, toy_graph):
        dist = khop_oracle(toy_graph.snapshots[0], A1, 2)
        assert dist[P1] == 1 and dist[V1] == 1
        assert dist[A2] == 2 and dist[P2] == 2

    def test_khop_invalid_k(self, toy_graph):
        with pytest.raises(ValueError):
            khop_oracle(toy_graph.snapshots[0], A1, 0)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), k=st.integers(1, 4))
    def test_khop_matches_networkx(self, seed, k):
        s = random_hetero_graph(seed)
        G = nx.Graph()
        G.add_nodes_from(s.nodes)
        G.add_edges_from((e.src, e.dst) for e in s.edges)
        v = sorted(s.nodes)[0]
        expected = {
            u: d
            for u, d in nx.single_source_shortest_path_length(G, v, cutoff=k).items()
            if u != v
        }
        assert khop_oracle(s, v, k) == expected

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), k=st.integers(1, 3))
    def test_khop_monotone_in_k(self, seed, k):
        s = random_hetero_graph(seed)
        v = sorted(s.nodes)[0]
        assert set(khop_oracle(s, v, k)) <= set(khop_oracle(s, v, k + 1))


class TestSnapshot:
    def test_edge_outside_node_set(self):
        e = TypedEdge(NodeRef("a", 0), NodeRef("b", 0), "r")
        with pytest.raises(SchemaError):
            Snapshot(t=0, nodes=frozenset({e.src}), edges=frozenset({e}))

    def test_all_nodes_union(self, toy_graph_2t):
        assert toy_graph_2t.all_nodes() == {A1, A2, A3, P1, P2, V1}

    def test_feature_width_absent(self, toy_graph):
        assert toy_graph.feature_width("author") is None
