"""Hyperedge construction, P-uniform sampling, and star expansion.

Around every anchor node a hyperedge collects either all nodes within
shortest-path distance k (``k-hop``) or at exactly distance k (``k-ring``);
the anchor itself is never a member. Oversized hyperedges are capped at P
members by uniform sampling without replacement. Star expansion turns each
hyperedge into a new node of a derived type, linked to every member.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .graph import NodeRef, Snapshot, TemporalGraph, TypedEdge, khop_oracle

KIND_KHOP = "k-hop"
KIND_KRING = "k-ring"
KINDS = (KIND_KHOP, KIND_KRING)

HYPER_PREFIX = "hyper/"
MEMBER_PREFIX = "member/"


def hyper_type_label(anchor_type: str, kind: str, k: int) -> str:
    """Derived hyperedge-node type, a function of (anchor type, kind, k) only."""
    return f"{HYPER_PREFIX}{anchor_type}/{kind}{k}"


def member_rel_label(member_type: str, hyper_type: str) -> str:
    return f"{MEMBER_PREFIX}{member_type}->{hyper_type}"


def is_hyper_type(type_id: str) -> bool:
    return type_id.startswith(HYPER_PREFIX)


@dataclass(frozen=True)
class Hyperedge:
    anchor: NodeRef
    members: frozenset[NodeRef]
    kind: str
    k: int

    def __post_init__(self) -> None:
        if self.anchor in self.members:
            raise ContractError(f"anchor {self.anchor} inside its own hyperedge")
        if not self.members:
            raise ContractError("empty hyperedge")

    @property
    def hyper_type(self) -> str:
        return hyper_type_label(self.anchor.type_id, self.kind, self.k)

    def node(self) -> NodeRef:
        """The star-expansion node representing this hyperedge.

        Stable across snapshots: the hyperedge around one anchor keeps one
        identity over time, so the temporal stage can attend over it.
        """
        return NodeRef(self.hyper_type, self.anchor.local_id)


@dataclass
class HypergraphSnapshot:
    base: Snapshot
    hyperedges: list[Hyperedge]

    def __post_init__(self) -> None:
        seen = set()
        for e in self.hyperedges:
            key = (e.anchor, e.kind, e.k)
            if key in seen:
                raise ContractError(f"duplicate hyperedge for {key}")
            seen.add(key)
            if e.anchor not in self.base.nodes or not e.members <= self.base.nodes:
                raise ContractError(f"hyperedge {key} leaves the base node set")


@dataclass
class TemporalHypergraph:
    snapshots: list[HypergraphSnapshot]
    kind: str
    k: int
    P: int | None
    seed: int


@dataclass
class ExpandedSnapshot:
    """Star-expanded heterogeneous graph: base nodes plus one node per hyperedge.

    ``edges`` holds the original edges followed by the membership edges, each
    joining one entity node and one hyperedge node under a derived relation.
    """

    t: int
    nodes: list[NodeRef]
    edges: list[TypedEdge]
    node_kinds: dict[NodeRef, str] = field(repr=False)  # "entity" | "hyper"
    base: Snapshot = field(repr=False, default=None)


def build_khop_hyperedge(s: Snapshot, v: NodeRef, k: int) -> Hyperedge | None:
    """Hyperedge of all nodes within distance 1..k of v; None when empty."""
    members = frozenset(khop_oracle(s, v, k))
    if not members:
        return None
    return Hyperedge(anchor=v, members=members, kind=KIND_KHOP, k=k)


def build_kring_hyperedge(s: Snapshot, v: NodeRef, k: int) -> Hyperedge | None:
    """Hyperedge of all nodes at exactly distance k from v; None when empty."""
    members = frozenset(u for u, d in khop_oracle(s, v, k).items() if d == k)
    if not members:
        return None
    return Hyperedge(anchor=v, members=members, kind=KIND_KRING, k=k)


def uniformize(e: Hyperedge, P: int, rng: np.random.Generator) -> Hyperedge:
    """Cap the member set at P by uniform sampling without replacement.

    Members are put in canonical (type, id) order before drawing, so the result
    depends only on the rng state, not on set iteration order. Undersized edges
    pass through unchanged.
    """
    if P < 1:
        raise ContractError(f"P must be >= 1, got {P}")
    if len(e.members) <= P:
        return e
    ordered = sorted(e.members)
    picked = rng.choice(len(ordered), size=P, replace=False)
    members = frozenset(ordered[int(i)] for i in picked)
    return Hyperedge(anchor=e.anchor, members=members, kind=e.kind, k=e.k)


def _anchor_rng(seed: int, t: int, anchor: NodeRef, type_index: dict[str, int]):
    # Independent sub-stream per (seed, t, anchor): scheduling-order free.
    return np.random.default_rng([seed, t, type_index[anchor.type_id], anchor.local_id])


def construct_hthg(
    graph: TemporalGraph,
    kind: str = KIND_KRING,
    k: int = 3,
    P: int | None = 100,
    seed: int = 0,
) -> TemporalHypergraph:
    """One uniformized hyperedge per (snapshot, node with nonempty candidate set).

    ``P=None`` disables the cardinality cap (the no-uniform ablation).
    """
    if kind not in KINDS:
        raise ContractError(f"unknown hyperedge kind {kind!r}; expected one of {KINDS}")
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")
    build = build_khop_hyperedge if kind == KIND_KHOP else build_kring_hyperedge
    type_index = {name: i for i, name in enumerate(sorted(graph.registry.node_types))}
    snapshots = []
    for s in graph.snapshots:
        hyperedges = []
        for v in sorted(s.nodes):
            e = build(s, v, k)
            if e is None:
                continue
            if P is not None:
                e = uniformize(e, P, _anchor_rng(seed, s.t, v, type_index))
            hyperedges.append(e)
        snapshots.append(HypergraphSnapshot(base=s, hyperedges=hyperedges))
    return TemporalHypergraph(snapshots=snapshots, kind=kind, k=k, P=P, seed=seed)


def star_expand(h: HypergraphSnapshot, keep_low_order: bool = True) -> ExpandedSnapshot:
    """Add one node per hyperedge, linked to each member.

    ``keep_low_order=False`` drops the original edges (the no-low ablation);
    membership edges alone remain.
    """
    nodes = sorted(h.base.nodes)
    kinds = {v: "entity" for v in nodes}
    edges: list[TypedEdge] = sorted(h.base.edges) if keep_low_order else []
    for e in sorted(h.hyperedges, key=lambda e: e.anchor):
        hnode = e.node()
        nodes.append(hnode)
        kinds[hnode] = "hyper"
        for member in sorted(e.members):
            rel = member_rel_label(member.type_id, e.hyper_type)
            edges.append(TypedEdge(src=member, dst=hnode, rel_id=rel))
    return ExpandedSnapshot(t=h.base.t, nodes=nodes, edges=edges, node_kinds=kinds, base=h.base)


def expand_all(H: TemporalHypergraph, keep_low_order: bool = True) -> list[ExpandedSnapshot]:
    return [star_expand(h, keep_low_order=keep_low_order) for h in H.snapshots]


def hypergraph_stats(H: TemporalHypergraph) -> dict:
    """Per-snapshot hyperedge counts, member totals, expanded sizes, size histogram."""
    per_snapshot = []
    for h in H.snapshots:
        sizes = [len(e.members) for e in h.hyperedges]
        hist: dict[int, int] = {}
        for size in sizes:
            hist[size] = hist.get(size, 0) + 1
        per_snapshot.append(
            {
                "t": h.base.t,
                "n_hyperedges": len(sizes),
                "sum_members": sum(sizes),
                "n_expanded_nodes": len(h.base.nodes) + len(sizes),
                "n_expanded_edges": len(h.base.edges) + sum(sizes),
                "size_histogram": dict(sorted(hist.items())),
            }
        )
    return {
        "per_snapshot": per_snapshot,
        "total_hyperedges": sum(r["n_hyperedges"] for r in per_snapshot),
        "total_members": sum(r["sum_members"] for r in per_snapshot),
    }


def dump_expanded(es: ExpandedSnapshot, path) -> None:
    """Write the expanded graph in the snapshot TSV format for inspection."""
    lines = [
        f"{es.t}\t{e.src.type_id}\t{e.src.local_id}\t{e.rel_id}"
        f"\t{e.dst.type_id}\t{e.dst.local_id}\n"
        for e in es.edges
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(sorted(lines))
