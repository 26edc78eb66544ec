"""Shared fixtures: the hand-built citation toy graph and small synthetic data."""

import pytest

from hthgn.graph import NodeRef, Snapshot, TemporalGraph, TypeRegistry

# The running example: one author (A1) writing paper P1 with coauthors A2 and
# A3, attending venue V1, which also publishes P2.
TOY_EDGES = [
    ("author", 1, "writes", "paper", 1),
    ("author", 1, "attends", "venue", 1),
    ("author", 2, "writes", "paper", 1),
    ("author", 3, "writes", "paper", 1),
    ("venue", 1, "publishes", "paper", 2),
]

A1 = NodeRef("author", 1)
A2 = NodeRef("author", 2)
A3 = NodeRef("author", 3)
P1 = NodeRef("paper", 1)
P2 = NodeRef("paper", 2)
V1 = NodeRef("venue", 1)


def graph_from_edges(edge_lists):
    """Build a TemporalGraph from per-snapshot (src_type, src_id, rel, dst_type,
    dst_id) tuples."""
    registry = TypeRegistry()
    snapshots = []
    for t, edges in enumerate(edge_lists):
        typed = set()
        for src_type, src_id, rel, dst_type, dst_id in edges:
            registry.add_relation(rel, src_type, dst_type)
            typed.add(
                registry.canonical_edge(
                    NodeRef(src_type, src_id), NodeRef(dst_type, dst_id), rel
                )
            )
        nodes = frozenset(v for e in typed for v in e.endpoints())
        snapshots.append(Snapshot(t=t, nodes=nodes, edges=frozenset(typed)))
    return TemporalGraph(snapshots=snapshots, registry=registry)


@pytest.fixture
def toy_graph():
    return graph_from_edges([TOY_EDGES])


@pytest.fixture
def toy_graph_2t():
    """The toy realization duplicated as snapshots 0 and 1."""
    return graph_from_edges([TOY_EDGES, TOY_EDGES])


@pytest.fixture
def toy_tsv(tmp_path):
    path = tmp_path / "toy.tsv"
    lines = ["# toy snapshot\n"]
    for src_type, src_id, rel, dst_type, dst_id in TOY_EDGES:
        lines.append(f"0\t{src_type}\t{src_id}\t{rel}\t{dst_type}\t{dst_id}\n")
    path.write_text("".join(lines), encoding="utf-8")
    return path
