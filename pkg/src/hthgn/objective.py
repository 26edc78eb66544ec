"""Future-neighborhood contrastive objective and the training loop.

Supervision pairs are low-order edges of the snapshot following each input
window: every future neighbor of an anchor is a positive, and per positive Q
uniform non-neighbors are negatives. A two-layer discriminator scores ordered
pairs of fused embeddings and a clamped binary cross-entropy is minimized with
Adam, one step per epoch over the loss summed across rolling windows.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import ContractError, ShapeError
from .graph import NodeRef, TemporalGraph, neighbors
from .hyper import HypergraphSnapshot, TemporalHypergraph, expand_all, star_expand
from .model import EmbeddingTable, Encoder, GraphSchema, ModelConfig, SnapshotBatch
from .numeric import (
    DTYPE,
    OptimizerState,
    ParameterStore,
    adam_step,
    backward,
    relu,
    sigmoid,
)

logger = logging.getLogger(__name__)


@dataclass
class ContrastBatch:
    anchors: list[NodeRef]
    positives: list[tuple[NodeRef, NodeRef]]
    negatives: list[tuple[NodeRef, NodeRef]]
    Q: int


class ContrastSampler:
    """Per-window sampling state, built once and redrawn cheaply every epoch.

    Positives: every edge of the supervision snapshot (``window_end + 1``),
    anchored from both endpoints, restricted to nodes that also appear in the
    input window. These and each anchor's non-neighbor pool are static, so only
    the negative draws consume randomness.
    """

    def __init__(self, graph: TemporalGraph, window_end: int, Q: int, window_len: int):
        if Q < 1:
            raise ContractError(f"Q must be >= 1, got {Q}")
        if window_end + 1 >= len(graph.snapshots):
            raise ContractError(f"supervision snapshot {window_end + 1} does not exist")
        self.Q = Q
        future = graph.snapshots[window_end + 1]
        window_nodes: set[NodeRef] = set()
        for t in range(max(0, window_end - window_len + 1), window_end + 1):
            window_nodes |= graph.snapshots[t].nodes

        self.anchors: list[NodeRef] = []
        self.positives: list[tuple[NodeRef, NodeRef]] = []
        self._pools: list[tuple[NodeRef, int, list[NodeRef]]] = []
        visible = future.nodes & window_nodes
        for i in sorted(visible):
            nbrs = neighbors(future, i) & window_nodes
            if not nbrs:
                continue
            self.anchors.append(i)
            for j in sorted(nbrs):
                self.positives.append((i, j))
            pool = sorted(visible - nbrs - {i})
            if not pool:
                logger.warning("anchor %s has an empty non-neighbor pool; positives only", i)
                continue
            self._pools.append((i, len(nbrs), pool))

    def draw(self, rng: np.random.Generator) -> ContrastBatch:
        """Q uniform non-neighbors per positive, without replacement per anchor."""
        negatives: list[tuple[NodeRef, NodeRef]] = []
        for i, n_pos, pool in self._pools:
            n_draw = min(self.Q * n_pos, len(pool))
            picked = rng.choice(len(pool), size=n_draw, replace=False)
            for idx in sorted(int(x) for x in picked):
                negatives.append((i, pool[idx]))
        return ContrastBatch(
            anchors=list(self.anchors),
            positives=list(self.positives),
            negatives=negatives,
            Q=self.Q,
        )


def sample_contrastive_pairs(
    graph: TemporalGraph,
    window_end: int,
    Q: int,
    rng: np.random.Generator,
    window_len: int,
) -> ContrastBatch:
    """One-shot positive/negative pairs supervised by snapshot ``window_end + 1``."""
    return ContrastSampler(graph, window_end, Q, window_len).draw(rng)


class Discriminator:
    """Pair probability head: sigmoid(FC(ReLU(FC(z_i || z_j))))."""

    def __init__(self, d: int, store: ParameterStore):
        self.d = d
        self.store = store
        store.add("disc/W1", d, 2 * d)
        store.add("disc/b1", d, 1, init="zeros")
        store.add("disc/W2", 1, d)
        store.add("disc/b2", 1, 1, init="zeros")

    def score_pairs(self, z_i: torch.Tensor, z_j: torch.Tensor) -> torch.Tensor:
        if z_i.shape != z_j.shape or z_i.shape[-1] != self.d:
            raise ShapeError(
                f"discriminator expects two [m,{self.d}] inputs, "
                f"got {tuple(z_i.shape)} and {tuple(z_j.shape)}"
            )
        h = torch.cat([z_i, z_j], dim=-1)
        h = relu(h @ self.store["disc/W1"].value.T + self.store["disc/b1"].value.T)
        out = h @ self.store["disc/W2"].value.T + self.store["disc/b2"].value.T
        return sigmoid(out).squeeze(-1)

    def score(self, z_i: torch.Tensor, z_j: torch.Tensor) -> torch.Tensor:
        return self.score_pairs(z_i.view(1, -1), z_j.view(1, -1))[0]


def contrastive_loss(
    batch: ContrastBatch, table: EmbeddingTable, disc: Discriminator
) -> torch.Tensor:
    """Negated NCE/BCE objective, minimized; logs clamped at 1e-12."""
    if not batch.positives and not batch.negatives:
        raise ContractError("contrastive_loss: empty batch")
    loss = torch.zeros((), dtype=DTYPE)
    if batch.positives:
        p = disc.score_pairs(
            table.rows([a for a, _ in batch.positives]),
            table.rows([b for _, b in batch.positives]),
        )
        loss = loss - torch.log(p.clamp(min=1e-12)).sum()
    if batch.negatives:
        p = disc.score_pairs(
            table.rows([a for a, _ in batch.negatives]),
            table.rows([b for _, b in batch.negatives]),
        )
        loss = loss - torch.log((1 - p).clamp(min=1e-12)).sum()
    return loss


@dataclass
class TrainHistory:
    entries: list[dict] = field(default_factory=list)
    seed: int = 0

    def record(self, epoch: int, loss: float, seconds: float, val_auc: float | None = None):
        row = {"epoch": epoch, "loss": loss, "seconds": seconds}
        if val_auc is not None:
            row["val_auc"] = val_auc
        self.entries.append(row)

    def losses(self) -> list[float]:
        return [row["loss"] for row in self.entries]

    def write_csv(self, path) -> None:
        has_val = any("val_auc" in row for row in self.entries)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,loss,seconds" + (",val_auc" if has_val else "") + "\n")
            for row in self.entries:
                line = f"{row['epoch']},{row['loss']:.10g},{row['seconds']:.4f}"
                if has_val:
                    line += f",{row.get('val_auc', '')}"
                fh.write(line + "\n")


@dataclass
class TrainedModel:
    """Everything needed to encode and score after training."""

    schema: GraphSchema
    config: ModelConfig
    store: ParameterStore
    encoder: Encoder
    discriminator: Discriminator
    with_hyper: bool = True
    keep_low_order: bool = True
    features: dict = field(default_factory=dict)

    def make_batches(self, expanded) -> list[SnapshotBatch]:
        return [SnapshotBatch(es, self.schema, self.features) for es in expanded]


def build_model(
    graph: TemporalGraph,
    config: ModelConfig,
    kind: str,
    k: int,
    seed: int = 0,
    with_hyper: bool = True,
    keep_low_order: bool = True,
) -> TrainedModel:
    schema = GraphSchema.from_graph(graph, kind, k, config.d, with_hyper=with_hyper)
    store = ParameterStore(seed=seed)
    encoder = Encoder(schema, config, store)
    disc = Discriminator(config.d, store)
    return TrainedModel(
        schema=schema,
        config=config,
        store=store,
        encoder=encoder,
        discriminator=disc,
        with_hyper=with_hyper,
        keep_low_order=keep_low_order,
        features=graph.features,
    )


def window_loss_fn(
    model: TrainedModel,
    batches: list[SnapshotBatch],
    graph: TemporalGraph,
    window_end: int,
    Q: int = 1,
    seed: int = 0,
):
    """Deterministic closure over one window's loss, for gradient checking."""
    rng = np.random.default_rng([seed, window_end])
    batch = sample_contrastive_pairs(graph, window_end, Q, rng, model.config.window)
    window = batches[window_end - model.config.window + 1 : window_end + 1]

    def loss_fn():
        table = model.encoder.encode(window, train=False)
        return contrastive_loss(batch, table, model.discriminator)

    return loss_fn


def bare_expansion(graph: TemporalGraph):
    """Expanded snapshots without any hyperedges (the no-hyper ablation)."""
    return [star_expand(HypergraphSnapshot(base=s, hyperedges=[])) for s in graph.snapshots]


def train(
    graph: TemporalGraph,
    hypergraph: TemporalHypergraph | None,
    config: ModelConfig,
    epochs: int = 300,
    seed: int = 0,
    lr: float = 1e-3,
    weight_decay: float = 5e-4,
    Q: int = 1,
    with_hyper: bool = True,
    keep_low_order: bool = True,
    val_hook=None,
) -> tuple[TrainedModel, TrainHistory]:
    """Train over rolling windows with one Adam step per epoch.

    Every window of ``config.window`` consecutive snapshots is encoded and its
    loss taken against the following snapshot; the per-epoch loss sums over all
    windows. Fully deterministic for a fixed seed.
    """
    if len(graph.snapshots) < 2:
        raise ContractError("training needs at least 2 snapshots (1 input + 1 supervision)")
    if hypergraph is None and with_hyper:
        raise ContractError("with_hyper requires a TemporalHypergraph")
    kind = hypergraph.kind if hypergraph is not None else "k-ring"
    k = hypergraph.k if hypergraph is not None else 1
    model = build_model(
        graph, config, kind, k, seed=seed, with_hyper=with_hyper, keep_low_order=keep_low_order
    )
    if with_hyper:
        expanded = expand_all(hypergraph, keep_low_order=keep_low_order)
    else:
        expanded = bare_expansion(graph)
    batches = model.make_batches(expanded)

    window_ends = list(range(config.window - 1, len(graph.snapshots) - 1))
    if not window_ends:
        raise ContractError(
            f"no training window fits: {len(graph.snapshots)} snapshots, window {config.window}"
        )
    state = OptimizerState(lr=lr, weight_decay=weight_decay)
    params = model.store.parameters()
    gen = torch.Generator().manual_seed(seed)
    history = TrainHistory(seed=seed)
    samplers = {we: ContrastSampler(graph, we, Q, config.window) for we in window_ends}
    for epoch in range(1, epochs + 1):
        t0 = time.perf_counter()
        total = torch.zeros((), dtype=DTYPE)
        # One forward per snapshot per epoch; overlapping windows share it
        # (and its backward traversal) through the fuse stage.
        zs = [
            model.encoder.snapshot_forward(b, train=True, gen=gen)
            for b in batches[: window_ends[-1] + 1]
        ]
        for we in window_ends:
            lo = we - config.window + 1
            table = model.encoder.fuse(batches[lo : we + 1], zs[lo : we + 1])
            rng = np.random.default_rng([seed, epoch, we])
            batch = samplers[we].draw(rng)
            total = total + contrastive_loss(batch, table, model.discriminator)
        backward(total)
        adam_step(state, params)
        val_auc = val_hook(model, batches) if val_hook is not None else None
        history.record(epoch, float(total.detach()), time.perf_counter() - t0, val_auc)
    return model, history
