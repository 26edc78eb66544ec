"""Typed temporal graph data model, snapshot ingestion, and neighborhood queries.

A temporal graph is an ordered list of snapshots. Nodes carry a type and a
per-type integer id; edges carry a relation type whose endpoint-type pair is
fixed by the registry. Edges are undirected: each logical edge is stored once
in a canonical orientation and is queryable from both endpoints.

Snapshot edge-list file format (UTF-8, tab-separated, ``#`` starts a comment)::

    t<TAB>src_type<TAB>src_id<TAB>rel_type<TAB>dst_type<TAB>dst_id

Optional feature file: CSV ``type,id,f0,f1,...`` with one header row per type
block. Features are static per node; the first occurrence wins and conflicting
redefinitions are logged as warnings.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import NodeNotFoundError, ParseError, SchemaError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class NodeRef:
    """A typed node: (type_id, local_id) is globally unique within one graph."""

    type_id: str
    local_id: int

    def __str__(self) -> str:
        return f"{self.type_id}{self.local_id}"


@dataclass(frozen=True, order=True)
class TypedEdge:
    """An undirected edge stored in canonical orientation, with a relation type."""

    src: NodeRef
    dst: NodeRef
    rel_id: str

    def endpoints(self) -> tuple[NodeRef, NodeRef]:
        return (self.src, self.dst)

    def pair_key(self) -> tuple[NodeRef, NodeRef]:
        """Orientation-free endpoint pair, for never-before-seen comparisons."""
        return (self.src, self.dst) if self.src <= self.dst else (self.dst, self.src)


class TypeRegistry:
    """Names for node types and relation types, with endpoint-type consistency.

    A relation type maps to exactly one ordered endpoint-type pair; the pair
    seen first defines the canonical stored orientation. After ``freeze()``,
    unknown names raise SchemaError instead of being added.
    """

    def __init__(self) -> None:
        self.node_types: list[str] = []
        self.rel_endpoints: dict[str, tuple[str, str]] = {}
        self._frozen = False

    def freeze(self) -> None:
        self._frozen = True

    def add_node_type(self, name: str) -> None:
        if name in self.node_types:
            return
        if self._frozen:
            raise SchemaError(f"unknown node type {name!r} after registry freeze")
        self.node_types.append(name)

    def add_relation(self, rel: str, src_type: str, dst_type: str) -> None:
        if rel in self.rel_endpoints:
            a, b = self.rel_endpoints[rel]
            if (src_type, dst_type) not in ((a, b), (b, a)):
                raise SchemaError(
                    f"relation {rel!r} maps to ({a},{b}), got ({src_type},{dst_type})"
                )
            return
        if self._frozen:
            raise SchemaError(f"unknown relation type {rel!r} after registry freeze")
        self.add_node_type(src_type)
        self.add_node_type(dst_type)
        self.rel_endpoints[rel] = (src_type, dst_type)

    def canonical_edge(self, src: NodeRef, dst: NodeRef, rel: str) -> TypedEdge:
        a, b = self.rel_endpoints[rel]
        if a == b:
            if dst < src:
                src, dst = dst, src
        elif (src.type_id, dst.type_id) == (b, a):
            src, dst = dst, src
        elif (src.type_id, dst.type_id) != (a, b):
            raise SchemaError(
                f"relation {rel!r} expects endpoint types ({a},{b}), "
                f"got ({src.type_id},{dst.type_id})"
            )
        return TypedEdge(src, dst, rel)


@dataclass
class Snapshot:
    """One timestamped graph: node set, canonical undirected edge set, adjacency."""

    t: int
    nodes: frozenset[NodeRef]
    edges: frozenset[TypedEdge]
    _adj: dict[NodeRef, list[tuple[NodeRef, str]]] = field(
        default_factory=dict, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        for e in self.edges:
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise SchemaError(f"edge {e} has an endpoint outside the node set")
        adj: dict[NodeRef, list[tuple[NodeRef, str]]] = {v: [] for v in self.nodes}
        for e in sorted(self.edges):
            adj[e.src].append((e.dst, e.rel_id))
            if e.dst != e.src:
                adj[e.dst].append((e.src, e.rel_id))
        self._adj = adj

    def incident(self, v: NodeRef) -> list[tuple[NodeRef, str]]:
        if v not in self._adj:
            raise NodeNotFoundError(f"node {v} not in snapshot {self.t}")
        return self._adj[v]


@dataclass
class TemporalGraph:
    """Ordered snapshots plus the type registry and optional static node features.

    Immutable after construction; safe to read from concurrent workers.
    """

    snapshots: list[Snapshot]
    registry: TypeRegistry
    features: dict[NodeRef, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.snapshots)

    def feature_width(self, type_id: str) -> int | None:
        """Feature width D for a node type, or None when the type has no features."""
        for v, x in self.features.items():
            if v.type_id == type_id:
                return int(x.shape[0])
        return None

    def all_nodes(self) -> set[NodeRef]:
        out: set[NodeRef] = set()
        for s in self.snapshots:
            out |= s.nodes
        return out


def neighbors(s: Snapshot, v: NodeRef, rel: str | None = None) -> set[NodeRef]:
    """All nodes sharing an edge with v in s, optionally filtered by relation."""
    return {u for u, r in s.incident(v) if rel is None or r == rel}


def khop_oracle(s: Snapshot, v: NodeRef, k: int) -> dict[NodeRef, int]:
    """Breadth-first shortest-path distances from v, restricted to 1..k.

    Traversal is type-blind; v itself is excluded from the result.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    dist = {v: 0}
    queue = deque([v])
    out: dict[NodeRef, int] = {}
    while queue:
        u = queue.popleft()
        if dist[u] >= k:
            continue
        for w, _ in s.incident(u):
            if w not in dist:
                dist[w] = dist[u] + 1
                out[w] = dist[w]
                queue.append(w)
    return out


def _parse_int(text: str, line_no: int, what: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ParseError(line_no, f"non-integer {what}: {text!r}") from None
    if value < 0:
        raise ParseError(line_no, f"negative {what}: {value}")
    return value


def parse_snapshots(
    path,
    feature_path=None,
    registry: TypeRegistry | None = None,
) -> TemporalGraph:
    """Read a snapshot edge-list TSV (and optional feature CSV) into a TemporalGraph.

    Duplicate (t, src, rel, dst) records are deduplicated. Snapshot indices must
    be contiguous from 0. When ``registry`` is given it is treated as frozen and
    unknown type names raise SchemaError.
    """
    own_registry = registry is None
    if own_registry:
        registry = TypeRegistry()
    per_t: dict[int, set[TypedEdge]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 6:
                raise ParseError(line_no, f"expected 6 tab-separated fields, got {len(fields)}")
            t = _parse_int(fields[0], line_no, "snapshot index")
            src_type, rel, dst_type = fields[1], fields[3], fields[4]
            src_id = _parse_int(fields[2], line_no, "node id")
            dst_id = _parse_int(fields[5], line_no, "node id")
            registry.add_relation(rel, src_type, dst_type)
            edge = registry.canonical_edge(
                NodeRef(src_type, src_id), NodeRef(dst_type, dst_id), rel
            )
            per_t.setdefault(t, set()).add(edge)

    snapshots: list[Snapshot] = []
    if per_t:
        expected = set(range(max(per_t) + 1))
        missing = sorted(expected - set(per_t))
        if missing:
            raise SchemaError(f"non-contiguous snapshot indices: missing t={missing}")
        for t in sorted(per_t):
            edges = frozenset(per_t[t])
            nodes = frozenset(v for e in edges for v in e.endpoints())
            snapshots.append(Snapshot(t=t, nodes=nodes, edges=edges))

    features = parse_features(feature_path) if feature_path is not None else {}
    return TemporalGraph(snapshots=snapshots, registry=registry, features=features)


def parse_features(path) -> dict[NodeRef, np.ndarray]:
    """Read the per-node feature CSV; first occurrence of a node wins."""
    features: dict[NodeRef, np.ndarray] = {}
    widths: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            if fields[0] == "type":
                continue  # per-block header row
            if len(fields) < 3:
                raise ParseError(line_no, "expected type,id,f0,... with at least one value")
            type_id = fields[0]
            local_id = _parse_int(fields[1], line_no, "node id")
            try:
                vec = np.array([float(x) for x in fields[2:]], dtype=np.float64)
            except ValueError:
                raise ParseError(line_no, "non-numeric feature value") from None
            node = NodeRef(type_id, local_id)
            if type_id in widths and widths[type_id] != vec.shape[0]:
                raise SchemaError(
                    f"feature width mismatch for type {type_id!r}: "
                    f"{widths[type_id]} vs {vec.shape[0]} at line {line_no}"
                )
            widths.setdefault(type_id, vec.shape[0])
            if node in features:
                if not np.array_equal(features[node], vec):
                    logger.warning("conflicting feature redefinition for %s ignored", node)
                continue
            features[node] = vec
    return features


def write_snapshots(graph: TemporalGraph, path) -> None:
    """Serialize to the canonical TSV: sorted lines, canonical edge orientation."""
    lines = []
    for s in graph.snapshots:
        for e in s.edges:
            lines.append(
                f"{s.t}\t{e.src.type_id}\t{e.src.local_id}\t{e.rel_id}"
                f"\t{e.dst.type_id}\t{e.dst.local_id}\n"
            )
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(sorted(lines))
