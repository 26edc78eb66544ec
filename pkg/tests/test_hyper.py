"""Hyperedge construction, uniform capping, star expansion, and statistics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import A1, A2, A3, P1, P2, V1, graph_from_edges
from hthgn.errors import ContractError
from hthgn.graph import NodeRef, khop_oracle
from hthgn.hyper import (
    Hyperedge,
    build_khop_hyperedge,
    build_kring_hyperedge,
    construct_hthg,
    expand_all,
    hyper_type_label,
    hypergraph_stats,
    is_hyper_type,
    member_rel_label,
    star_expand,
    uniformize,
)
from test_graph import random_hetero_graph


class TestConstruction:
    def test_toy_khop_goldens(self, toy_graph):
        s = toy_graph.snapshots[0]
        e1 = build_khop_hyperedge(s, A1, 1)
        e2 = build_khop_hyperedge(s, A1, 2)
        assert e1.members == {P1, V1}
        assert e2.members == {P1, V1, A2, A3, P2}

    def test_toy_kring(self, toy_graph):
        s = toy_graph.snapshots[0]
        e = build_kring_hyperedge(s, A1, 2)
        assert e.members == {A2, A3, P2}

    def test_anchor_never_member(self, toy_graph):
        s = toy_graph.snapshots[0]
        for k in (1, 2, 3):
            e = build_khop_hyperedge(s, P1, k)
            assert P1 not in e.members

    def test_empty_neighborhood_returns_none(self):
        g = graph_from_edges([[("a", 0, "r", "b", 0), ("a", 1, "r", "b", 1)]])
        s = g.snapshots[0]
        assert build_kring_hyperedge(s, NodeRef("a", 0), 3) is None

    def test_anchor_in_members_rejected(self):
        with pytest.raises(ContractError):
            Hyperedge(anchor=A1, members=frozenset({A1, P1}), kind="k-hop", k=1)

    def test_empty_members_rejected(self):
        with pytest.raises(ContractError):
            Hyperedge(anchor=A1, members=frozenset(), kind="k-hop", k=1)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), k=st.integers(2, 4))
    def test_kring_is_khop_difference(self, seed, k):
        s = random_hetero_graph(seed)
        for v in sorted(s.nodes)[:10]:
            ring = build_kring_hyperedge(s, v, k)
            ring_members = ring.members if ring else frozenset()
            inner = set(khop_oracle(s, v, k - 1))
            outer = set(khop_oracle(s, v, k))
            assert ring_members == outer - inner


class TestUniformize:
    def _edge(self, n):
        members = frozenset(NodeRef("m", i) for i in range(n))
        return Hyperedge(anchor=NodeRef("a", 0), members=members, kind="k-hop", k=1)

    def test_cap_is_min(self):
        rng = np.random.default_rng(0)
        for n, P in [(20, 5), (5, 5), (3, 10)]:
            e = uniformize(self._edge(n), P, rng)
            assert len(e.members) == min(P, n)

    def test_subset_of_original(self):
        e = self._edge(30)
        capped = uniformize(e, 7, np.random.default_rng(1))
        assert capped.members <= e.members

    def test_determinism(self):
        e = self._edge(25)
        a = uniformize(e, 10, np.random.default_rng(42))
        b = uniformize(e, 10, np.random.default_rng(42))
        assert a.members == b.members

    def test_invalid_p(self):
        with pytest.raises(ContractError):
            uniformize(self._edge(5), 0, np.random.default_rng(0))

    def test_inclusion_frequency_uniform(self):
        # Each of 10 members should appear in a P=6 draw with frequency 0.6.
        e = self._edge(10)
        rng = np.random.default_rng(7)
        counts = {m: 0 for m in e.members}
        n_draws = 10_000
        for _ in range(n_draws):
            for m in uniformize(e, 6, rng).members:
                counts[m] += 1
        freqs = np.array(list(counts.values())) / n_draws
        assert np.all(np.abs(freqs - 0.6) < 0.02)


class TestConstructHthg:
    def test_one_hyperedge_per_connected_node(self, toy_graph):
        H = construct_hthg(toy_graph, kind="k-hop", k=2, P=100, seed=0)
        assert len(H.snapshots[0].hyperedges) == 6  # every toy node is connected

    def test_determinism(self, toy_graph_2t):
        a = construct_hthg(toy_graph_2t, kind="k-ring", k=2, P=2, seed=3)
        b = construct_hthg(toy_graph_2t, kind="k-ring", k=2, P=2, seed=3)
        for ha, hb in zip(a.snapshots, b.snapshots):
            assert [e.members for e in ha.hyperedges] == [e.members for e in hb.hyperedges]

    def test_p_none_disables_cap(self, toy_graph):
        H = construct_hthg(toy_graph, kind="k-hop", k=2, P=None, seed=0)
        sizes = {e.anchor: len(e.members) for e in H.snapshots[0].hyperedges}
        assert sizes[A1] == 5

    def test_unknown_kind(self, toy_graph):
        with pytest.raises(ContractError):
            construct_hthg(toy_graph, kind="k-blob", k=2)

    def test_hyper_node_identity_stable_over_time(self, toy_graph_2t):
        H = construct_hthg(toy_graph_2t, kind="k-hop", k=1, P=100, seed=0)
        nodes_t0 = {e.node() for e in H.snapshots[0].hyperedges}
        nodes_t1 = {e.node() for e in H.snapshots[1].hyperedges}
        assert nodes_t0 == nodes_t1


class TestStarExpansion:
    def test_counts(self, toy_graph):
        H = construct_hthg(toy_graph, kind="k-hop", k=2, P=100, seed=0)
        h = H.snapshots[0]
        es = star_expand(h)
        n_members = sum(len(e.members) for e in h.hyperedges)
        assert len(es.nodes) == len(h.base.nodes) + len(h.hyperedges)
        assert len(es.edges) == len(h.base.edges) + n_members

    def test_no_low_drops_base_edges(self, toy_graph):
        H = construct_hthg(toy_graph, kind="k-hop", k=2, P=100, seed=0)
        es = star_expand(H.snapshots[0], keep_low_order=False)
        assert all(is_hyper_type(e.dst.type_id) for e in es.edges)

    def test_membership_edge_shape(self, toy_graph):
        H = construct_hthg(toy_graph, kind="k-ring", k=1, P=100, seed=0)
        es = star_expand(H.snapshots[0])
        member_edges = [e for e in es.edges if is_hyper_type(e.dst.type_id)]
        for e in member_edges:
            assert not is_hyper_type(e.src.type_id)
            assert e.rel_id == member_rel_label(e.src.type_id, e.dst.type_id)

    def test_hyper_type_labels(self):
        label = hyper_type_label("author", "k-ring", 3)
        assert is_hyper_type(label)
        assert "author" in label and "k-ring3" in label

    def test_expand_all_aligned(self, toy_graph_2t):
        H = construct_hthg(toy_graph_2t, kind="k-hop", k=1, P=100, seed=0)
        expanded = expand_all(H)
        assert [es.t for es in expanded] == [0, 1]


class TestStats:
    def test_totals_consistent(self, toy_graph_2t):
        H = construct_hthg(toy_graph_2t, kind="k-hop", k=2, P=3, seed=0)
        stats = hypergraph_stats(H)
        per = stats["per_snapshot"]
        assert stats["total_hyperedges"] == sum(r["n_hyperedges"] for r in per)
        assert stats["total_members"] == sum(r["sum_members"] for r in per)
        for r in per:
            assert sum(k * v for k, v in r["size_histogram"].items()) == r["sum_members"]

    def test_sum_members_monotone_in_p(self, toy_graph):
        totals = [
            hypergraph_stats(construct_hthg(toy_graph, kind="k-hop", k=2, P=P, seed=0))[
                "total_members"
            ]
            for P in (1, 2, 3, 5, 100)
        ]
        assert totals == sorted(totals)

    def test_p_beyond_sizes_identical_to_uncapped(self, toy_graph):
        capped = construct_hthg(toy_graph, kind="k-hop", k=2, P=1000, seed=0)
        raw = construct_hthg(toy_graph, kind="k-hop", k=2, P=None, seed=0)
        for hc, hr in zip(capped.snapshots, raw.snapshots):
            assert [e.members for e in hc.hyperedges] == [e.members for e in hr.hyperedges]
