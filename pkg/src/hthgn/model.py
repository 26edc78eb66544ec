"""Hierarchical attention encoder over star-expanded snapshot windows.

Per snapshot: a type-preserving input projection, then stacked layers of
relation-type attention (multi-head, per-relation neighborhoods) fused by
semantic attention over relation types. Across snapshots: sinusoidal position
codes, scaled dot-product temporal attention over each node's trajectory, and
a per-type gated residual sum producing one vector per node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch

from .errors import ContractError, ShapeError
from .graph import NodeRef, TemporalGraph
from .hyper import ExpandedSnapshot, hyper_type_label, is_hyper_type, member_rel_label
from .numeric import (
    DTYPE,
    ParameterStore,
    leaky_relu,
    relu,
    segment_softmax,
    sigmoid,
    softmax,
    tanh,
)


@dataclass
class ModelConfig:
    d: int = 32
    heads: int = 4
    layers: int = 2
    window: int = 3
    leaky_slope: float = 0.2
    dropout: float = 0.2
    temporal_attention: bool = True  # False: mean over snapshots (no-ta ablation)
    hetero_attention: bool = True  # False: type-blind mean aggregation (no-ha ablation)

    def __post_init__(self) -> None:
        if self.d < 1 or self.d % self.heads != 0:
            raise ContractError(f"hidden width {self.d} must be divisible by heads {self.heads}")
        if self.layers < 2:
            # Two layers are the minimum for node -> hyperedge -> node messages.
            raise ContractError(f"layers must be >= 2, got {self.layers}")
        if self.window < 1:
            raise ContractError(f"window must be >= 1, got {self.window}")

    @property
    def head_width(self) -> int:
        return self.d // self.heads


@dataclass
class GraphSchema:
    """Node types, relation types, and feature widths the encoder is built for.

    Derived analytically from the registry and the hyperedge configuration so
    the parameter set does not depend on which snapshots happen to be seen.
    """

    node_types: list[str]
    rel_types: dict[str, tuple[str, str]]
    feature_width: dict[str, int | None]

    @classmethod
    def from_graph(
        cls,
        graph: TemporalGraph,
        kind: str,
        k: int,
        d: int,
        with_hyper: bool = True,
    ) -> "GraphSchema":
        entity_types = sorted(graph.registry.node_types)
        node_types = list(entity_types)
        rel_types = dict(sorted(graph.registry.rel_endpoints.items()))
        feature_width = {t: graph.feature_width(t) for t in entity_types}
        if with_hyper:
            hyper_types = [hyper_type_label(t, kind, k) for t in entity_types]
            for h in sorted(hyper_types):
                node_types.append(h)
                feature_width[h] = d  # all-zero features of the hidden width
            for t in entity_types:
                for h in sorted(hyper_types):
                    rel_types[member_rel_label(t, h)] = (t, h)
        return cls(node_types=node_types, rel_types=rel_types, feature_width=feature_width)


class SnapshotBatch:
    """Index tensors for one expanded snapshot: node order, per-type slices,
    per-relation directed edge lists (both orientations), and feature rows."""

    def __init__(self, es: ExpandedSnapshot, schema: GraphSchema, features):
        self.t = es.t
        self.nodes = list(es.nodes)
        self.index = {v: i for i, v in enumerate(self.nodes)}
        self.n = len(self.nodes)

        by_type: dict[str, list[int]] = {}
        for i, v in enumerate(self.nodes):
            by_type.setdefault(v.type_id, []).append(i)
        self.type_index = {t: torch.tensor(ix, dtype=torch.long) for t, ix in by_type.items()}

        self.x: dict[str, torch.Tensor | None] = {}
        for t, ix in by_type.items():
            width = schema.feature_width.get(t)
            if width is None:
                self.x[t] = None  # learnable per-type embedding row substitutes
                continue
            rows = torch.zeros((len(ix), width), dtype=DTYPE)
            if not is_hyper_type(t):
                for r, i in enumerate(ix):
                    vec = features.get(self.nodes[i])
                    if vec is not None:
                        if vec.shape[0] != width:
                            raise ShapeError(
                                f"feature width {vec.shape[0]} for {self.nodes[i]} "
                                f"vs expected {width}"
                            )
                        rows[r] = torch.from_numpy(vec)
            self.x[t] = rows

        rel_src: dict[str, list[int]] = {}
        rel_dst: dict[str, list[int]] = {}
        for e in es.edges:
            i, j = self.index[e.src], self.index[e.dst]
            rel_src.setdefault(e.rel_id, []).append(j)
            rel_dst.setdefault(e.rel_id, []).append(i)
            if i != j:
                rel_src[e.rel_id].append(i)
                rel_dst[e.rel_id].append(j)
        self.rel_edges = {
            r: (
                torch.tensor(rel_src[r], dtype=torch.long),  # neighbor j
                torch.tensor(rel_dst[r], dtype=torch.long),  # center i
            )
            for r in sorted(rel_src)
        }
        self.rel_support = {}
        for r, (_, i_idx) in self.rel_edges.items():
            support = torch.zeros(self.n, dtype=torch.bool)
            support[i_idx] = True
            self.rel_support[r] = support


def positional_encoding(t: int, d: int) -> torch.Tensor:
    """Sinusoidal snapshot position code; (sin, cos) pairs share a frequency."""
    if t < 0 or d < 1:
        raise ContractError(f"positional_encoding needs t >= 0, d >= 1, got t={t}, d={d}")
    j = torch.arange(d, dtype=DTYPE)
    angle = t / torch.pow(torch.tensor(10000.0, dtype=DTYPE), 2 * torch.floor(j / 2) / d)
    code = torch.where(j % 2 == 0, torch.sin(angle), torch.cos(angle))
    return code


@dataclass
class EmbeddingTable:
    """Node -> row mapping over a dense matrix of width d."""

    nodes: list[NodeRef]
    matrix: torch.Tensor
    index: dict[NodeRef, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.index:
            self.index = {v: i for i, v in enumerate(self.nodes)}

    def vector(self, node: NodeRef) -> torch.Tensor:
        return self.matrix[self.index[node]]

    def rows(self, nodes) -> torch.Tensor:
        ix = torch.tensor([self.index[v] for v in nodes], dtype=torch.long)
        return self.matrix.index_select(0, ix)

    def __contains__(self, node: NodeRef) -> bool:
        return node in self.index


class _FusePlan:
    """Static index structure for fusing one window: per-type union node order,
    presence masks, and scatter/gather tensors. Built once per window."""

    def __init__(self, window: list[SnapshotBatch]):
        self.window = list(window)  # keeps batch identities alive for the cache key
        T = len(window)
        by_type: dict[str, list[NodeRef]] = {}
        seen: dict[str, set[NodeRef]] = {}
        for b in window:
            for v in b.nodes:
                bucket = by_type.setdefault(v.type_id, [])
                marked = seen.setdefault(v.type_id, set())
                if v not in marked:
                    marked.add(v)
                    bucket.append(v)
        self.all_nodes: list[NodeRef] = []
        self.per_type: list[tuple[str, list[NodeRef], torch.Tensor, list]] = []
        for t in sorted(by_type):
            nodes = sorted(by_type[t])
            pos_of = {v: i for i, v in enumerate(nodes)}
            mask = torch.zeros((len(nodes), T), dtype=torch.bool)
            per_w = []
            for w, b in enumerate(window):
                ix_b = b.type_index.get(t)
                if ix_b is None:
                    per_w.append(None)
                    continue
                union_pos = torch.tensor(
                    [pos_of[b.nodes[i]] for i in ix_b.tolist()], dtype=torch.long
                )
                mask[union_pos, w] = True
                per_w.append((union_pos, ix_b))
            self.per_type.append((t, nodes, mask, per_w))
            self.all_nodes.extend(nodes)


class Encoder:
    """Owns the encoder parameters inside a ParameterStore and runs the forward
    pass over windows of SnapshotBatch."""

    def __init__(self, schema: GraphSchema, config: ModelConfig, store: ParameterStore):
        self.schema = schema
        self.cfg = config
        self.store = store
        self._plans: dict[tuple, _FusePlan] = {}
        d = config.d
        for t in schema.node_types:
            width = schema.feature_width.get(t)
            if width is None:
                store.add(f"in/x/{t}", 1, d)
                width = d
            store.add(f"in/W/{t}", d, width)
            store.add(f"in/b/{t}", d, 1, init="zeros")
        for layer in range(config.layers):
            if config.hetero_attention:
                for t in schema.node_types:
                    store.add(f"het{layer}/score/{t}", d, d)
                for r in schema.rel_types:
                    store.add(f"het{layer}/value/{r}", d, d)
                    store.add(f"het{layer}/c/{r}", d, 1)
                    store.add(f"het{layer}/sem/{r}", d, d)
                store.add(f"het{layer}/q", d, 1)
            else:
                store.add(f"het{layer}/mean/W", d, d)
        for t in schema.node_types:
            for name in ("K", "Q", "V"):
                store.add(f"tmp/{name}/{t}", d, d)
            store.add(f"tmp/fc/W/{t}", d, d)
            store.add(f"tmp/fc/b/{t}", d, 1, init="zeros")
            store.add(f"res/fc/W/{t}", d, d)
            store.add(f"res/fc/b/{t}", d, 1, init="zeros")
            store.add(f"gate/{t}", 1, 1, init="zeros")

    def _p(self, name: str) -> torch.Tensor:
        return self.store[name].value

    # ---- per-snapshot stages -------------------------------------------------

    def project_features(self, batch: SnapshotBatch) -> torch.Tensor:
        """z_i = ReLU(W_type x_i + b_type) for every node of the snapshot."""
        d = self.cfg.d
        out = torch.zeros((batch.n, d), dtype=DTYPE)
        for t, ix in batch.type_index.items():
            x = batch.x[t]
            if x is None:
                x = self._p(f"in/x/{t}").expand(ix.numel(), d)
            z = relu(x @ self._p(f"in/W/{t}").T + self._p(f"in/b/{t}").T)
            out = out.index_add(0, ix, z)
        return out

    def _type_scores(self, batch: SnapshotBatch, z: torch.Tensor, layer: int) -> torch.Tensor:
        out = torch.zeros_like(z)
        for t, ix in batch.type_index.items():
            s = z.index_select(0, ix) @ self._p(f"het{layer}/score/{t}").T
            out = out.index_add(0, ix, s)
        return out.view(batch.n, self.cfg.heads, self.cfg.head_width)

    def relation_attention(
        self,
        batch: SnapshotBatch,
        z: torch.Tensor,
        layer: int,
        train: bool = False,
        gen: torch.Generator | None = None,
    ) -> dict[str, tuple[torch.Tensor, torch.Tensor]]:
        """Per relation: multi-head attention aggregate and its support mask."""
        K, dh = self.cfg.heads, self.cfg.head_width
        s = self._type_scores(batch, z, layer)
        out: dict[str, tuple[torch.Tensor, torch.Tensor]] = {}
        for r, (j_idx, i_idx) in batch.rel_edges.items():
            c = self._p(f"het{layer}/c/{r}").view(1, K, dh)
            e = leaky_relu(
                s.index_select(0, i_idx) + s.index_select(0, j_idx), self.cfg.leaky_slope
            )
            alpha = segment_softmax((e * c).sum(-1), i_idx, batch.n)
            if train and self.cfg.dropout > 0:
                keep = 1.0 - self.cfg.dropout
                mask = (torch.rand(alpha.shape, generator=gen) < keep).to(DTYPE)
                alpha = alpha * mask / keep
            msg = (z @ self._p(f"het{layer}/value/{r}").T).index_select(0, j_idx)
            msg = msg.view(-1, K, dh) * alpha.unsqueeze(-1)
            agg = torch.zeros((batch.n, K, dh), dtype=DTYPE).index_add(0, i_idx, msg)
            out[r] = (agg.view(batch.n, self.cfg.d), batch.rel_support[r])
        return out

    def semantic_attention(
        self, batch: SnapshotBatch, per_rel: dict[str, tuple[torch.Tensor, torch.Tensor]], layer: int
    ) -> torch.Tensor:
        """Fuse per-relation aggregates with softmax weights over relation types.

        Pooled scores average only over nodes that possess the relation; per
        node, the weights are renormalized over the relations it supports.
        Nodes isolated in the expanded graph come out as zero vectors.
        """
        if not per_rel:
            return torch.zeros((batch.n, self.cfg.d), dtype=DTYPE)
        rels = sorted(per_rel)
        q = self._p(f"het{layer}/q")
        pooled = []
        for r in rels:
            agg, support = per_rel[r]
            proj = tanh(agg[support] @ self._p(f"het{layer}/sem/{r}").T) @ q
            pooled.append(proj.mean())
        beta = softmax(torch.stack(pooled), dim=0)
        total = torch.zeros((batch.n, self.cfg.d), dtype=DTYPE)
        denom = torch.zeros((batch.n, 1), dtype=DTYPE)
        for b, r in zip(beta, rels):
            agg, support = per_rel[r]
            total = total + b * agg
            denom = denom + b * support.to(DTYPE).unsqueeze(1)
        fused = torch.where(denom > 0, total / denom.clamp(min=1e-300), total)
        return relu(fused)

    def _mean_layer(self, batch: SnapshotBatch, z: torch.Tensor, layer: int) -> torch.Tensor:
        """Type-blind mean aggregation for the no-ha ablation."""
        total = torch.zeros_like(z)
        count = torch.zeros((batch.n, 1), dtype=DTYPE)
        for j_idx, i_idx in batch.rel_edges.values():
            total = total.index_add(0, i_idx, z.index_select(0, j_idx))
            count = count.index_add(0, i_idx, torch.ones((i_idx.numel(), 1), dtype=DTYPE))
        mean = torch.where(count > 0, total / count.clamp(min=1.0), total)
        return relu(mean @ self._p(f"het{layer}/mean/W").T)

    def snapshot_forward(
        self, batch: SnapshotBatch, train: bool = False, gen: torch.Generator | None = None
    ) -> torch.Tensor:
        z = self.project_features(batch)
        for layer in range(self.cfg.layers):
            if self.cfg.hetero_attention:
                per_rel = self.relation_attention(batch, z, layer, train=train, gen=gen)
                z = self.semantic_attention(batch, per_rel, layer)
            else:
                z = self._mean_layer(batch, z, layer)
        return z

    # ---- temporal stage ------------------------------------------------------

    def temporal_gamma(self, zp: torch.Tensor, mask: torch.Tensor, type_id: str) -> torch.Tensor:
        """Attention rows over snapshot positions, restricted to unmasked t'."""
        d = self.cfg.d
        keys = zp @ self._p(f"tmp/K/{type_id}").T
        queries = zp @ self._p(f"tmp/Q/{type_id}").T
        scores = torch.einsum("ntd,nsd->nts", keys, queries) / math.sqrt(d)
        if self.cfg.temporal_attention:
            col_mask = mask.unsqueeze(1).expand_as(scores)
            return softmax(scores, mask=col_mask, dim=-1)
        uniform = mask.to(DTYPE) / mask.to(DTYPE).sum(dim=1, keepdim=True)
        return uniform.unsqueeze(1).expand_as(scores).contiguous()

    def temporal_stage(
        self,
        traj: torch.Tensor,  # [n, T, d] per-snapshot representations (zero where absent)
        mask: torch.Tensor,  # [n, T] presence
        positions: list[int],
        type_id: str,
    ) -> torch.Tensor:
        """Positional encoding, temporal attention, and the gated residual sum."""
        d = self.cfg.d
        pos = torch.stack([positional_encoding(t, d) for t in positions])  # [T, d]
        zp = traj + pos.unsqueeze(0) * mask.to(DTYPE).unsqueeze(-1)
        gamma = self.temporal_gamma(zp, mask, type_id)
        values = zp @ self._p(f"tmp/V/{type_id}").T
        att = torch.einsum("nts,nsd->ntd", gamma, values)
        zbar = relu(att @ self._p(f"tmp/fc/W/{type_id}").T + self._p(f"tmp/fc/b/{type_id}").T)
        resid = traj @ self._p(f"res/fc/W/{type_id}").T + self._p(f"res/fc/b/{type_id}").T
        g = sigmoid(self._p(f"gate/{type_id}")[0, 0])
        combined = g * zbar + (1 - g) * resid
        return (combined * mask.to(DTYPE).unsqueeze(-1)).sum(dim=1)

    # ---- full pass -----------------------------------------------------------

    def encode(
        self,
        window: list[SnapshotBatch],
        train: bool = False,
        gen: torch.Generator | None = None,
        return_snapshots: bool = False,
    ):
        """Full forward over a window; returns the fused EmbeddingTable.

        Deterministic in eval mode; in train mode attention dropout draws from
        ``gen``.
        """
        if not window:
            raise ContractError("encode: empty snapshot window")
        zs = [self.snapshot_forward(b, train=train, gen=gen) for b in window]
        table = self.fuse(window, zs)
        if return_snapshots:
            snap_tables = [
                EmbeddingTable(nodes=list(b.nodes), matrix=z) for b, z in zip(window, zs)
            ]
            return table, snap_tables
        return table

    def _fuse_plan(self, window: list[SnapshotBatch]) -> "_FusePlan":
        key = tuple(id(b) for b in window)
        plan = self._plans.get(key)
        if plan is None:
            plan = _FusePlan(window)
            if len(self._plans) >= 16:
                self._plans.pop(next(iter(self._plans)))
            self._plans[key] = plan
        return plan

    def fuse(self, window: list[SnapshotBatch], zs: list[torch.Tensor]) -> EmbeddingTable:
        """Temporal stage over precomputed per-snapshot representations.

        Splitting this from ``encode`` lets overlapping windows share one
        ``snapshot_forward`` per snapshot (and one backward traversal of it).
        """
        if not window or len(window) != len(zs):
            raise ContractError("fuse: window and zs must be nonempty and aligned")
        if len(window) > self.cfg.window:
            raise ContractError(
                f"window of {len(window)} snapshots exceeds configured length {self.cfg.window}"
            )
        positions = [b.t for b in window]
        plan = self._fuse_plan(window)
        chunks: list[torch.Tensor] = []
        for t, nodes, mask, per_w in plan.per_type:
            slices = []
            for w, z in enumerate(zs):
                layer = torch.zeros((len(nodes), self.cfg.d), dtype=DTYPE)
                if per_w[w] is not None:
                    union_pos, ix_b = per_w[w]
                    layer = layer.index_add(0, union_pos, z.index_select(0, ix_b))
                slices.append(layer)
            traj = torch.stack(slices, dim=1)  # [n, T, d]
            chunks.append(self.temporal_stage(traj, mask, positions, t))
        return EmbeddingTable(nodes=plan.all_nodes, matrix=torch.cat(chunks, dim=0))
