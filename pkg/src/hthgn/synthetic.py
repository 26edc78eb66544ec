"""Planted-community synthetic temporal graph generator.

Three node types linked by three cross-type relations. Nodes carry a static
community label; edges appear with probability p_in inside a community and
p_out across communities, and persist between consecutive snapshots with a
configurable coefficient, so future edges are statistically predictable from
the observed history. Node features are noisy copies of a per-community mean,
giving the encoder a learnable signal on bare synthetic data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .graph import NodeRef, Snapshot, TemporalGraph, TypeRegistry

NODE_TYPES = ("A", "B", "C")
RELATIONS = {"A-B": ("A", "B"), "A-C": ("A", "C"), "B-C": ("B", "C")}


@dataclass
class SyntheticSpec:
    nodes_per_type: tuple[int, int, int] = (100, 100, 100)
    n_communities: int = 3
    p_in: float = 0.05
    p_out: float = 0.002
    n_snapshots: int = 8
    persistence: float = 0.95
    feature_dim: int = 8
    feature_noise: float = 0.3
    seed: int = 0

    def __post_init__(self) -> None:
        for p in (self.p_in, self.p_out, self.persistence):
            if not 0.0 <= p <= 1.0:
                raise ContractError(f"probability {p} outside [0, 1]")
        if self.p_in <= self.p_out:
            raise ContractError("p_in must exceed p_out for a plantable signal")
        if self.n_snapshots < 1 or self.n_communities < 1:
            raise ContractError("need at least one snapshot and one community")


def generate_synthetic_htg(spec: SyntheticSpec) -> TemporalGraph:
    """Deterministic per seed; communities and features are static across time."""
    rng = np.random.default_rng(spec.seed)
    registry = TypeRegistry()
    for rel, (a, b) in RELATIONS.items():
        registry.add_relation(rel, a, b)
    registry.freeze()

    counts = dict(zip(NODE_TYPES, spec.nodes_per_type))
    community = {
        t: rng.integers(0, spec.n_communities, size=counts[t]) for t in NODE_TYPES
    }
    means = rng.normal(size=(spec.n_communities, spec.feature_dim))
    features: dict[NodeRef, np.ndarray] = {}
    for t in NODE_TYPES:
        noise = rng.normal(size=(counts[t], spec.feature_dim)) * spec.feature_noise
        for i in range(counts[t]):
            features[NodeRef(t, i)] = means[community[t][i]] + noise[i]

    prob = {}
    for rel, (a, b) in RELATIONS.items():
        same = community[a][:, None] == community[b][None, :]
        prob[rel] = np.where(same, spec.p_in, spec.p_out)

    all_nodes = frozenset(NodeRef(t, i) for t in NODE_TYPES for i in range(counts[t]))
    snapshots = []
    state = {}
    for t_idx in range(spec.n_snapshots):
        edges = set()
        for rel, (a, b) in RELATIONS.items():
            fresh = rng.random(prob[rel].shape) < prob[rel]
            if t_idx == 0:
                state[rel] = fresh
            else:
                keep = rng.random(prob[rel].shape) < spec.persistence
                state[rel] = np.where(keep, state[rel], fresh)
            for i, j in zip(*np.nonzero(state[rel])):
                edges.add(
                    registry.canonical_edge(NodeRef(a, int(i)), NodeRef(b, int(j)), rel)
                )
        snapshots.append(Snapshot(t=t_idx, nodes=all_nodes, edges=frozenset(edges)))
    return TemporalGraph(snapshots=snapshots, registry=registry, features=features)


def write_features(features: dict[NodeRef, np.ndarray], path) -> None:
    """Feature CSV writer matching the parser's block format."""
    by_type: dict[str, list[NodeRef]] = {}
    for v in features:
        by_type.setdefault(v.type_id, []).append(v)
    with open(path, "w", encoding="utf-8") as fh:
        for t in sorted(by_type):
            nodes = sorted(by_type[t])
            width = features[nodes[0]].shape[0]
            fh.write("type,id," + ",".join(f"f{i}" for i in range(width)) + "\n")
            for v in nodes:
                values = ",".join(f"{x:.10g}" for x in features[v])
                fh.write(f"{t},{v.local_id},{values}\n")
