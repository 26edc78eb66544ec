"""Command-line entry point wiring data, training, evaluation, and sweeps.

All randomness flows from the root seed in the run configuration, so every
command is reproducible: same config + seed means identical JSON/CSV outputs.
Logging verbosity comes from the HTHGN_LOG environment variable
(error|info|debug).
"""

from __future__ import annotations

import functools
import json
import logging
import os
import sys
from pathlib import Path

import click
import torch

from . import evaluation, graph as graphmod, hyper, objective, report, synthetic
from .config import RunConfig, parse_config
from .errors import HthgnError
from .model import ModelConfig
from .numeric import finite_diff_check, jitter_parameters, load_checkpoint, save_checkpoint

logger = logging.getLogger("hthgn")


def _setup_logging() -> None:
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("HTHGN_LOG", "error").lower(), logging.ERROR
    )
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")


_CONFIG_FLAGS = [
    ("--data", "data", str),
    ("--features", "features", str),
    ("--outdir", "outdir", str),
    ("--kind", "kind", str),
    ("--k", "k", int),
    ("--p", "P", int),
    ("--d", "d", int),
    ("--heads", "heads", int),
    ("--layers", "layers", int),
    ("--window", "window", int),
    ("--lr", "lr", float),
    ("--weight-decay", "weight_decay", float),
    ("--dropout", "dropout", float),
    ("--epochs", "epochs", int),
    ("--q", "Q", int),
    ("--seed", "seed", int),
    ("--n-seeds", "n_seeds", int),
    ("--mode", "mode", str),
    ("--jobs", "jobs", int),
]


def config_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True), default=None)(fn)
    for flag, name, ftype in reversed(_CONFIG_FLAGS):
        fn = click.option(flag, name, type=ftype, default=None)(fn)

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        overrides = {name: kwargs.pop(name) for _, name, _ in _CONFIG_FLAGS}
        cfg = parse_config(kwargs.pop("config_path"), overrides)
        torch.set_num_threads(max(1, cfg.jobs))
        return fn(*args, cfg=cfg, **kwargs)

    return wrapper


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.to_json(out / "config.json")
    return out


def _load_graph(cfg: RunConfig) -> graphmod.TemporalGraph:
    if cfg.data is None:
        raise HthgnError("no input data; pass --data or set 'data' in the config")
    return graphmod.parse_snapshots(cfg.data, feature_path=cfg.features)


def _model_config(cfg: RunConfig, **overrides) -> ModelConfig:
    base = dict(
        d=cfg.d,
        heads=cfg.heads,
        layers=cfg.layers,
        window=cfg.window,
        dropout=cfg.dropout,
    )
    base.update(overrides)
    return ModelConfig(**base)


@click.group()
def main() -> None:
    """Heterogeneous temporal hypergraph pipeline."""
    _setup_logging()


def _run(fn):
    try:
        fn()
    except HthgnError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@main.command("gen-synthetic")
@click.option("--nodes", type=int, default=100, help="nodes per type")
@click.option("--snapshots", type=int, default=8)
@click.option("--communities", type=int, default=3)
@click.option("--p-in", type=float, default=0.05)
@click.option("--p-out", type=float, default=0.002)
@click.option("--persistence", type=float, default=0.95)
@config_options
def gen_synthetic(cfg, nodes, snapshots, communities, p_in, p_out, persistence):
    """Write a planted-community synthetic dataset in the snapshot TSV format."""

    def go():
        out = _outdir(cfg)
        spec = synthetic.SyntheticSpec(
            nodes_per_type=(nodes, nodes, nodes),
            n_communities=communities,
            p_in=p_in,
            p_out=p_out,
            n_snapshots=snapshots,
            persistence=persistence,
            seed=cfg.seed,
        )
        g = synthetic.generate_synthetic_htg(spec)
        graphmod.write_snapshots(g, out / "snapshots.tsv")
        synthetic.write_features(g.features, out / "features.csv")
        n_edges = sum(len(s.edges) for s in g.snapshots)
        click.echo(f"wrote {len(g.snapshots)} snapshots, {n_edges} edges to {out}")

    _run(go)


@main.command("build-hypergraph")
@click.option("--dump-expanded", is_flag=True, default=False)
@config_options
def build_hypergraph(cfg, dump_expanded):
    """Construct the temporal hypergraph and report its statistics."""

    def go():
        out = _outdir(cfg)
        g = _load_graph(cfg)
        H = hyper.construct_hthg(g, kind=cfg.kind, k=cfg.k, P=cfg.P, seed=cfg.seed)
        stats = hyper.hypergraph_stats(H)
        with open(out / "hypergraph_stats.json", "w", encoding="utf-8") as fh:
            json.dump(stats, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        if dump_expanded:
            for h in H.snapshots:
                es = hyper.star_expand(h)
                hyper.dump_expanded(es, out / f"expanded_t{es.t}.tsv")
        click.echo(
            f"{stats['total_hyperedges']} hyperedges, "
            f"{stats['total_members']} memberships -> {out / 'hypergraph_stats.json'}"
        )

    _run(go)


@main.command("train")
@config_options
def train_cmd(cfg):
    """Train one model (root seed) and save history, figure, and checkpoint."""

    def go():
        out = _outdir(cfg)
        g = _load_graph(cfg)
        n_train = len(g.snapshots)
        if n_train > cfg.window + evaluation.N_TEST_SNAPSHOTS:
            n_train -= evaluation.N_TEST_SNAPSHOTS  # hold out the test snapshots
        train_graph = evaluation.slice_graph(g, n_train)
        H = hyper.construct_hthg(train_graph, kind=cfg.kind, k=cfg.k, P=cfg.P, seed=cfg.seed)
        model, history = objective.train(
            train_graph,
            H,
            _model_config(cfg),
            epochs=cfg.epochs,
            seed=cfg.seed,
            lr=cfg.lr,
            weight_decay=cfg.weight_decay,
            Q=cfg.Q,
        )
        history.write_csv(out / "history.csv")
        report.save_history_figure(history, out / "history.png")
        save_checkpoint(model.store, out / "checkpoint.bin")
        final = history.losses()[-1] if history.entries else float("nan")
        click.echo(f"trained {cfg.epochs} epochs on {n_train} snapshots; final loss {final:.4f}")

    _run(go)


@main.command("evaluate")
@click.option("--checkpoint", type=click.Path(exists=True), default=None)
@config_options
def evaluate_cmd(cfg, checkpoint):
    """Held-out link prediction; retrains per seed unless --checkpoint is given."""

    def go():
        out = _outdir(cfg)
        g = _load_graph(cfg)
        if checkpoint is not None:
            model = objective.build_model(g, _model_config(cfg), cfg.kind, cfg.k, seed=cfg.seed)
            load_checkpoint(checkpoint, model.store)
            H = hyper.construct_hthg(g, kind=cfg.kind, k=cfg.k, P=cfg.P, seed=cfg.seed)
            batches = model.make_batches(hyper.expand_all(H))
            rep = evaluation.evaluate(g, model, batches, mode=cfg.mode, seeds=cfg.seeds)
        else:
            result = evaluation.run_experiment(
                g,
                _model_config(cfg),
                kind=cfg.kind,
                k=cfg.k,
                P=cfg.P,
                epochs=cfg.epochs,
                lr=cfg.lr,
                weight_decay=cfg.weight_decay,
                Q=cfg.Q,
                seeds=cfg.seeds,
                mode=cfg.mode,
            )
            rep = result.report
        rep.write_json(out / "metrics.json")
        report.save_metrics_figure(rep, out / "metrics.png")
        std = f" +/- {rep.std_auc:.4f}" if rep.std_auc is not None else ""
        click.echo(f"{rep.mode} AUC {rep.mean_auc:.4f}{std}, AP {rep.mean_ap:.4f} -> {out}")

    _run(go)


@main.command("ablate")
@click.option(
    "--variant",
    type=click.Choice(list(evaluation.ABLATION_VARIANTS) + ["all"]),
    default="all",
)
@config_options
def ablate(cfg, variant):
    """Run ablation variants under the identical protocol."""

    def go():
        out = _outdir(cfg)
        variants = list(evaluation.ABLATION_VARIANTS) if variant == "all" else [variant]
        reports = {}
        for v in variants:
            result = evaluation.run_ablation(
                g := _load_graph(cfg),
                _model_config(cfg),
                v,
                seeds=cfg.seeds,
                kind=cfg.kind,
                k=cfg.k,
                P=cfg.P,
                epochs=cfg.epochs,
                lr=cfg.lr,
                weight_decay=cfg.weight_decay,
                Q=cfg.Q,
                mode=cfg.mode,
            )
            reports[v] = result.report
            result.report.write_json(out / f"metrics_{v}.json")
            click.echo(f"{v}: AUC {result.report.mean_auc:.4f}, AP {result.report.mean_ap:.4f}")
        report.save_ablation_figure(reports, out / "ablation.png")

    _run(go)


@main.command("sweep-p")
@click.option("--values", required=True, help="comma-separated P values, e.g. 10,50,100")
@click.option("--with-auc", is_flag=True, default=False)
@config_options
def sweep_p(cfg, values, with_auc):
    """Hypergraph scale statistics (and optional AUC) across P values."""

    def go():
        out = _outdir(cfg)
        try:
            p_values = [int(v) for v in values.split(",") if v.strip()]
        except ValueError:
            raise HthgnError(f"bad --values {values!r}; expected comma-separated integers")
        g = _load_graph(cfg)
        rows = evaluation.p_uniform_sweep(
            g,
            cfg.kind,
            cfg.k,
            p_values,
            seed=cfg.seed,
            auc_config=_model_config(cfg) if with_auc else None,
            epochs=cfg.epochs,
        )
        evaluation.write_sweep_csv(rows, out / "sweep.csv")
        report.save_sweep_figure(rows, out / "sweep.png")
        click.echo(f"{len(rows)} sweep rows -> {out / 'sweep.csv'}")

    _run(go)


@main.command("grad-check")
@config_options
def grad_check(cfg):
    """Finite-difference check of the full training loss on a small instance."""

    def go():
        spec = synthetic.SyntheticSpec(
            nodes_per_type=(10, 10, 10),
            n_snapshots=cfg.window + 1,
            seed=cfg.seed,
        )
        g = synthetic.generate_synthetic_htg(spec)
        mc = _model_config(cfg, d=8, heads=2, dropout=0.0)
        H = hyper.construct_hthg(g, kind=cfg.kind, k=cfg.k, P=cfg.P, seed=cfg.seed)
        model = objective.build_model(g, mc, cfg.kind, cfg.k, seed=cfg.seed)
        jitter_parameters(model.store, seed=cfg.seed)  # off the ReLU kinks
        batches = model.make_batches(hyper.expand_all(H))
        loss_fn = objective.window_loss_fn(model, batches, g, mc.window - 1, Q=cfg.Q, seed=cfg.seed)
        rep = finite_diff_check(loss_fn, model.store.parameters(), max_coords=8, seed=cfg.seed)
        for line in rep.lines():
            click.echo(line)
        if not rep.passed:
            sys.exit(1)

    _run(go)


if __name__ == "__main__":
    main()
