"""Link-prediction protocols, ranking metrics, ablations, and P sweeps.

The held-out protocol: the last 3 snapshots are test snapshots; for each one
the preceding window is encoded, its edges are the positives (restricted to
never-before-seen edges in new-link mode), an equal number of type-compatible
non-edges are the negatives, and the trained discriminator scores both. AUC
and AP are averaged over the test snapshots and reported mean +/- std over
seeds, each seed retraining from scratch.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import ContractError, MetricError, UsageError
from .graph import TemporalGraph
from .hyper import construct_hthg, expand_all, hypergraph_stats
from .model import ModelConfig
from .objective import TrainedModel, TrainHistory, bare_expansion, train

logger = logging.getLogger(__name__)

N_TEST_SNAPSHOTS = 3

ABLATION_VARIANTS = ("full", "no-hyper", "no-low", "no-uniform", "no-ta", "no-ha")


def ranking_metrics(scores, labels, seed: int = 0) -> tuple[float, float]:
    """AUC (concordance probability, ties counted half) and average precision.

    AP uses step interpolation over the score-sorted list; ties are broken by
    stable order after a seeded shuffle.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ContractError("scores and labels must be 1-D and aligned")
    n_pos = int(labels.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise MetricError("ranking metrics undefined for single-class labels")

    ranks = rankdata(scores)  # average ranks handle ties at 1/2
    auc = (ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)

    perm = np.random.default_rng(seed).permutation(scores.size)
    order = perm[np.argsort(-scores[perm], kind="stable")]
    sorted_labels = labels[order]
    hits = np.cumsum(sorted_labels)
    positions = np.arange(1, scores.size + 1)
    precision_at_pos = hits[sorted_labels == 1] / positions[sorted_labels == 1]
    ap = float(precision_at_pos.mean())
    return float(auc), ap


@dataclass
class EvalReport:
    mode: str
    per_snapshot: list[dict]
    mean_auc: float
    std_auc: float | None
    mean_ap: float
    std_ap: float | None
    seeds: list[int]
    per_seed: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "per_snapshot": self.per_snapshot,
            "mean_auc": self.mean_auc,
            "std_auc": self.std_auc,
            "mean_ap": self.mean_ap,
            "std_ap": self.std_ap,
            "seeds": self.seeds,
            "per_seed": self.per_seed,
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _sample_negative_pairs(graph, snapshot, table, positive_edges, rng):
    """Type-compatible node pairs with no edge in the snapshot, one per positive."""
    present = {e.pair_key() for e in snapshot.edges}
    pools: dict[str, list] = {}
    for v in table.nodes:
        pools.setdefault(v.type_id, []).append(v)
    pairs = []
    for e in positive_edges:
        a, b = graph.registry.rel_endpoints[e.rel_id]
        pool_a, pool_b = pools.get(a, []), pools.get(b, [])
        if not pool_a or not pool_b:
            continue
        for _ in range(200):
            u = pool_a[int(rng.integers(len(pool_a)))]
            w = pool_b[int(rng.integers(len(pool_b)))]
            if u == w:
                continue
            key = (u, w) if u <= w else (w, u)
            if key not in present:
                pairs.append((u, w))
                break
    return pairs


def evaluate(
    graph: TemporalGraph,
    model: TrainedModel,
    batches,
    mode: str = "link",
    seeds=(0,),
    n_test: int = N_TEST_SNAPSHOTS,
) -> EvalReport:
    """Score the last ``n_test`` snapshots with the trained discriminator.

    ``batches`` must be SnapshotBatch objects aligned with ``graph.snapshots``.
    Seeds vary only the negative sampling here; retraining per seed is the
    caller's job (see ``run_experiment``).
    """
    if mode not in ("link", "new-link"):
        raise UsageError(f"unknown evaluation mode {mode!r}")
    T = model.config.window
    if len(graph.snapshots) < T + n_test:
        raise ContractError(
            f"need at least {T + n_test} snapshots for evaluation, have {len(graph.snapshots)}"
        )
    test_ts = list(range(len(graph.snapshots) - n_test, len(graph.snapshots)))
    seen_before: set = set()
    for t in range(test_ts[0]):
        seen_before |= {e.pair_key() for e in graph.snapshots[t].edges}

    per_seed_rows = []
    snap_acc: dict[int, list[tuple[float, float, int, int]]] = {t: [] for t in test_ts}
    for seed in seeds:
        snap_metrics = []
        for tau in test_ts:
            window = batches[tau - T : tau]
            table = model.encoder.encode(window, train=False)
            snapshot = graph.snapshots[tau]
            positives = [
                e
                for e in sorted(snapshot.edges)
                if e.src in table and e.dst in table
            ]
            if mode == "new-link":
                earlier = seen_before | {
                    e.pair_key()
                    for t in range(test_ts[0], tau)
                    for e in graph.snapshots[t].edges
                }
                positives = [e for e in positives if e.pair_key() not in earlier]
            rng = np.random.default_rng([seed, tau])
            negatives = _sample_negative_pairs(graph, snapshot, table, positives, rng)
            if not positives or not negatives:
                logger.warning("snapshot %d has no scorable %s pairs; skipped", tau, mode)
                continue
            pos_scores = model.discriminator.score_pairs(
                table.rows([e.src for e in positives]), table.rows([e.dst for e in positives])
            )
            neg_scores = model.discriminator.score_pairs(
                table.rows([u for u, _ in negatives]), table.rows([w for _, w in negatives])
            )
            scores = np.concatenate(
                [pos_scores.detach().numpy(), neg_scores.detach().numpy()]
            )
            labels = np.concatenate(
                [np.ones(len(positives), dtype=int), np.zeros(len(negatives), dtype=int)]
            )
            auc, ap = ranking_metrics(scores, labels, seed=seed)
            snap_metrics.append((tau, auc, ap, len(positives), len(negatives)))
            snap_acc[tau].append((auc, ap, len(positives), len(negatives)))
        if not snap_metrics:
            raise ContractError("no test snapshot produced scorable pairs")
        per_seed_rows.append(
            {
                "seed": seed,
                "auc": float(np.mean([m[1] for m in snap_metrics])),
                "ap": float(np.mean([m[2] for m in snap_metrics])),
            }
        )

    aucs = [row["auc"] for row in per_seed_rows]
    aps = [row["ap"] for row in per_seed_rows]
    multi = len(per_seed_rows) >= 2
    per_snapshot = [
        {
            "t": t,
            "auc": float(np.mean([m[0] for m in ms])),
            "ap": float(np.mean([m[1] for m in ms])),
            "n_pos": int(np.mean([m[2] for m in ms])),
            "n_neg": int(np.mean([m[3] for m in ms])),
        }
        for t, ms in snap_acc.items()
        if ms
    ]
    return EvalReport(
        mode=mode,
        per_snapshot=per_snapshot,
        mean_auc=float(np.mean(aucs)),
        std_auc=float(np.std(aucs, ddof=1)) if multi else None,
        mean_ap=float(np.mean(aps)),
        std_ap=float(np.std(aps, ddof=1)) if multi else None,
        seeds=list(seeds),
        per_seed=per_seed_rows,
    )


def slice_graph(graph: TemporalGraph, n_snapshots: int) -> TemporalGraph:
    return TemporalGraph(
        snapshots=graph.snapshots[:n_snapshots],
        registry=graph.registry,
        features=graph.features,
    )


@dataclass
class ExperimentResult:
    report: EvalReport
    histories: list[TrainHistory]
    models: list[TrainedModel]
    seconds: float


def run_experiment(
    graph: TemporalGraph,
    config: ModelConfig,
    kind: str = "k-ring",
    k: int = 3,
    P: int | None = 100,
    epochs: int = 300,
    lr: float = 1e-3,
    weight_decay: float = 5e-4,
    Q: int = 1,
    seeds=(0, 1, 2, 3, 4),
    mode: str = "link",
    with_hyper: bool = True,
    keep_low_order: bool = True,
    n_test: int = N_TEST_SNAPSHOTS,
) -> ExperimentResult:
    """Full protocol: per seed, train on all but the last ``n_test`` snapshots,
    then evaluate on the held-out snapshots; aggregate mean +/- std."""
    if len(graph.snapshots) < config.window + n_test:
        raise ContractError("too few snapshots for the held-out protocol")
    t0 = time.perf_counter()
    train_graph = slice_graph(graph, len(graph.snapshots) - n_test)
    per_seed_reports = []
    histories = []
    models = []
    for seed in seeds:
        if with_hyper:
            H_train = construct_hthg(train_graph, kind=kind, k=k, P=P, seed=seed)
        else:
            H_train = None
        model, history = train(
            train_graph,
            H_train,
            config,
            epochs=epochs,
            seed=seed,
            lr=lr,
            weight_decay=weight_decay,
            Q=Q,
            with_hyper=with_hyper,
            keep_low_order=keep_low_order,
        )
        if with_hyper:
            H_full = construct_hthg(graph, kind=kind, k=k, P=P, seed=seed)
            expanded = expand_all(H_full, keep_low_order=keep_low_order)
        else:
            expanded = bare_expansion(graph)
        batches = model.make_batches(expanded)
        per_seed_reports.append(
            evaluate(graph, model, batches, mode=mode, seeds=[seed], n_test=n_test)
        )
        histories.append(history)
        models.append(model)

    aucs = [r.mean_auc for r in per_seed_reports]
    aps = [r.mean_ap for r in per_seed_reports]
    multi = len(per_seed_reports) >= 2
    snap: dict[int, list[dict]] = {}
    for r in per_seed_reports:
        for row in r.per_snapshot:
            snap.setdefault(row["t"], []).append(row)
    report = EvalReport(
        mode=mode,
        per_snapshot=[
            {
                "t": t,
                "auc": float(np.mean([r["auc"] for r in rows])),
                "ap": float(np.mean([r["ap"] for r in rows])),
                "n_pos": int(np.mean([r["n_pos"] for r in rows])),
                "n_neg": int(np.mean([r["n_neg"] for r in rows])),
            }
            for t, rows in sorted(snap.items())
        ],
        mean_auc=float(np.mean(aucs)),
        std_auc=float(np.std(aucs, ddof=1)) if multi else None,
        mean_ap=float(np.mean(aps)),
        std_ap=float(np.std(aps, ddof=1)) if multi else None,
        seeds=list(seeds),
        per_seed=[
            {"seed": s, "auc": a, "ap": p} for s, a, p in zip(seeds, aucs, aps)
        ],
    )
    return ExperimentResult(
        report=report,
        histories=histories,
        models=models,
        seconds=time.perf_counter() - t0,
    )


def ablation_settings(variant: str, P: int | None) -> dict:
    """Map a variant name to run_experiment keyword overrides."""
    if variant not in ABLATION_VARIANTS:
        raise UsageError(
            f"unknown ablation variant {variant!r}; expected one of {ABLATION_VARIANTS}"
        )
    settings: dict = {"P": P}
    if variant == "no-hyper":
        settings["with_hyper"] = False
    elif variant == "no-low":
        settings["keep_low_order"] = False
    elif variant == "no-uniform":
        settings["P"] = None
    return settings


def run_ablation(
    graph: TemporalGraph,
    config: ModelConfig,
    variant: str,
    seeds=(0, 1, 2, 3, 4),
    **kwargs,
) -> ExperimentResult:
    """One ablation variant under the identical training/eval protocol."""
    settings = ablation_settings(variant, kwargs.pop("P", 100))
    if variant == "no-ta":
        config = ModelConfig(**{**config.__dict__, "temporal_attention": False})
    elif variant == "no-ha":
        config = ModelConfig(**{**config.__dict__, "hetero_attention": False})
    return run_experiment(graph, config, seeds=seeds, **{**kwargs, **settings})


def p_uniform_sweep(
    graph: TemporalGraph,
    kind: str,
    k: int,
    P_values,
    seed: int = 0,
    auc_config: ModelConfig | None = None,
    epochs: int = 0,
) -> list[dict]:
    """Hypergraph statistics per P, optionally with a trained AUC column."""
    if not P_values:
        raise ContractError("P_values must be nonempty")
    rows = []
    for P in P_values:
        H = construct_hthg(graph, kind=kind, k=k, P=P, seed=seed)
        stats = hypergraph_stats(H)
        row = {
            "P": P,
            "n_hyperedges": stats["total_hyperedges"],
            "sum_members": stats["total_members"],
            "n_expanded_nodes": sum(r["n_expanded_nodes"] for r in stats["per_snapshot"]),
            "n_expanded_edges": sum(r["n_expanded_edges"] for r in stats["per_snapshot"]),
        }
        if auc_config is not None:
            result = run_experiment(
                graph, auc_config, kind=kind, k=k, P=P, epochs=epochs, seeds=[seed]
            )
            row["auc"] = result.report.mean_auc
            row["ap"] = result.report.mean_ap
        rows.append(row)
    return rows


def write_sweep_csv(rows: list[dict], path) -> None:
    cols = list(rows[0].keys())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(str(row[c]) for c in cols) + "\n")
