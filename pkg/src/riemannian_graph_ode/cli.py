#!/usr/bin/env python3
"""
CLI interface for riemannian-graph-ode.

Generate synthetic datasets, train and evaluate graph ODE models, audit
entropy along the weight flow and run the geometry property suite.
Runtime errors print one JSON line on stderr and exit with status 1; usage
errors exit with status 2.
"""

import functools
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Tuple

import click
import numpy as np

from . import __version__
from .checks import flow_entropy_suite, geometry_property_suite
from .curvature import edge_neighbor_sums, forman_curvature, ricci_total
from .datasets import ingest, load_dataset, save_dataset
from .dynamics import simulate_flow_only, write_trajectory_jsonl
from .entropy import audit
from .errors import ManifoldDomainError, RiemannianODEError
from .generators import generate as generate_dataset
from .learning import Trainer, finite_difference_gradient, max_relative_error, sequence_objective, value_and_grad
from .metrics import evaluate as evaluate_model
from .models import Ablation, FlowMode, ModelConfig, SystemKind, WeightedGraph
from .network import edge_constraints
from .pipeline import GraphODEModel

logger = logging.getLogger(__name__)


def _reports_errors(command):
    """Turn library and IO failures into a JSON stderr line and exit status 1."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (RiemannianODEError, OSError, ValueError) as e:
            logger.debug("%s failed", command.__name__, exc_info=True)
            click.echo(json.dumps({"error": type(e).__name__, "message": str(e)}), err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.version_option(version=__version__)
@click.option("--log-level", default=None, help="Logging level (defaults to LOG_LEVEL or INFO)")
def cli(log_level: Optional[str]):
    """Riemannian graph ODE - trajectory prediction on constant-curvature manifolds."""
    level = (log_level or os.getenv("LOG_LEVEL", "INFO")).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _load_config(config_file: Optional[str], **overrides) -> Tuple[ModelConfig, bool]:
    """
    Load configuration with precedence defaults < environment < file < options.

    Returns:
        The config and whether kappa was set explicitly by any of the layers
    """
    config = ModelConfig.from_env()
    kappa_set = os.getenv("RGODE_KAPPA") is not None

    if config_file:
        config = ModelConfig.from_file(config_file, base=config)
        kappa_set = kappa_set or "kappa" in json.loads(Path(config_file).read_text())

    config = config.with_overrides(**overrides)
    kappa_set = kappa_set or overrides.get("kappa") is not None
    return config, kappa_set


def _sequence(dataset, index: int):
    if not 0 <= index < len(dataset.sequences):
        raise ManifoldDomainError(f"sequence {index} out of range (dataset has {len(dataset.sequences)})")
    return dataset.sequences[index]


@cli.command()
@click.option("--system", "-s", type=click.Choice([kind.value for kind in SystemKind]), required=True,
              help="Synthetic system to simulate")
@click.option("--nodes", "-n", type=int, required=True, help="Nodes per snapshot (>= 3)")
@click.option("--steps", "-T", type=int, required=True, help="Snapshots per sequence (>= 4)")
@click.option("--seed", default=0, help="Random seed")
@click.option("--sequences", default=1, help="Number of sequences")
@click.option("--out", "-o", required=True, help="Output dataset JSON file")
@_reports_errors
def generate(system: str, nodes: int, steps: int, seed: int, sequences: int, out: str):
    """Generate a seeded synthetic dataset."""
    dataset = generate_dataset(SystemKind(system), nodes, steps, seed, sequences)
    save_dataset(dataset, out)
    click.echo(f"✅ {dataset.name}: {sequences} sequence(s) x {steps} snapshots written to {out}")


@cli.command()
@click.option("--data", "-d", required=True, help="Dataset JSON file")
@click.option("--config", "-c", "config_file", help="JSON configuration file")
@click.option("--seed", default=0, help="Initialization seed")
@click.option("--out", "-o", required=True, help="Output model checkpoint")
@click.option("--epochs", type=int, help="Override training epochs")
@click.option("--lr", type=float, help="Override learning rate")
@click.option("--kappa", type=float, help="Override curvature (defaults to the dataset's)")
@click.option("--ablation", type=click.Choice([a.value for a in Ablation]), help="Model variant")
@click.option("--log-csv", help="Write the per-epoch training log as CSV")
@_reports_errors
def train(data: str, config_file: Optional[str], seed: int, out: str, epochs: Optional[int],
          lr: Optional[float], kappa: Optional[float], ablation: Optional[str], log_csv: Optional[str]):
    """Train a model on a dataset."""
    dataset = load_dataset(data)
    config, kappa_set = _load_config(config_file, epochs=epochs, lr=lr, kappa=kappa, ablation=ablation)
    if not kappa_set:
        config = config.with_overrides(kappa=dataset.kappa)

    trainer = Trainer(config, seed)
    model = trainer.fit(ingest(dataset, config.kappa))
    model.save(out)
    if log_csv:
        trainer.write_log_csv(log_csv)

    summary = trainer.get_training_summary()
    click.echo(f"📊 Trained {summary['epochs']} epochs (κ={config.kappa}, ablation={config.ablation.value})")
    if summary["epochs"]:
        click.echo(f"- Initial loss: {summary['initial_loss']:.6f}")
        click.echo(f"- Final loss: {summary['final_loss']:.6f}")
        click.echo(f"- Final/initial: total {summary['loss_ratio']:.3f}, position {summary['position_ratio']:.3f}, "
                   f"weight {summary['weight_ratio']:.3f}")
    if summary["skipped_sequences"]:
        click.echo(f"- Skipped sequences: {summary['skipped_sequences']}")
    click.echo(f"💾 Model saved to: {out}")


@cli.command()
@click.option("--model", "-m", "model_path", required=True, help="Model checkpoint")
@click.option("--data", "-d", required=True, help="Dataset JSON file")
@click.option("--horizon", "-H", type=int, required=True, help="Snapshots to predict after the observed window")
@click.option("--sequence", default=0, help="Sequence index")
@click.option("--out", "-o", required=True, help="Output JSON-lines trajectory")
@_reports_errors
def predict(model_path: str, data: str, horizon: int, sequence: int, out: str):
    """Forecast one sequence and dump the predicted trajectory."""
    model = GraphODEModel.load(model_path)
    dataset = ingest(load_dataset(data), model.config.kappa)
    forecast = model.predict(_sequence(dataset, sequence), horizon)
    features = [model.manifold.log0(np.asarray(decoded)) for decoded in forecast.decoded]
    write_trajectory_jsonl(forecast.states, out, features=features)
    click.echo(f"✅ {len(forecast.states)} predicted states written to {out}")


@cli.command("audit-entropy")
@click.option("--data", "-d", required=True, help="Dataset JSON file")
@click.option("--model", "-m", "model_path", help="Simulate the flow seeded by this model instead")
@click.option("--steps", default=200, help="Flow steps when simulating from a model")
@click.option("--mode", type=click.Choice([m.value for m in FlowMode]), default=FlowMode.CONSTRAINED.value,
              help="Flow to simulate")
@click.option("--tol", default=1e-6, help="Allowed entropy drop between snapshots")
@click.option("--sequence", default=0, help="Sequence index")
@click.option("--out", "-o", required=True, help="Output CSV")
@_reports_errors
def audit_entropy(data: str, model_path: Optional[str], steps: int, mode: str, tol: float, sequence: int, out: str):
    """Audit von Neumann entropy monotonicity of a weight series."""
    if model_path is None:
        records = _sequence(load_dataset(data), sequence)
        trajectory = [(record.t, record.graph()) for record in records]
    else:
        model = GraphODEModel.load(model_path)
        snapshots = _sequence(ingest(load_dataset(data), model.config.kappa), sequence)
        observed, _ = model.split(snapshots)
        initial = model.forecast(observed, []).initial
        if len(initial.sources) == 0:
            raise ManifoldDomainError("the observed window has no edges to evolve")
        Z0, w0 = np.asarray(initial.Z0), np.asarray(initial.w0)
        graph = WeightedGraph.from_arrays(Z0.shape[0], initial.sources, initial.targets, w0)
        f_values = edge_constraints(Z0, initial.sources, initial.targets, model.params, model.manifold)
        trajectory = simulate_flow_only(graph, f_values, steps, model.config.integrator().base_step, FlowMode(mode),
                                        model.config.weight_update, t0=observed[-1].t)
    report = audit(trajectory, tol)
    Path(out).write_text(report.to_csv())
    status = "✅ non-decreasing" if report.verdict else f"❌ {len(report.violations)} violation(s)"
    click.echo(f"Entropy audit over {len(report.series)} snapshots: {status}")


@cli.command()
@click.option("--data", "-d", required=True, help="Dataset JSON file")
@click.option("--snapshot", "-t", default=0, help="Snapshot index within the sequence")
@click.option("--sequence", default=0, help="Sequence index")
@click.option("--out", "-o", required=True, help="Output CSV")
@_reports_errors
def curvature(data: str, snapshot: int, sequence: int, out: str):
    """Per-edge Forman-Ricci curvature of one snapshot."""
    records = _sequence(load_dataset(data), sequence)
    if not 0 <= snapshot < len(records):
        raise ManifoldDomainError(f"snapshot {snapshot} out of range (sequence has {len(records)})")
    graph = records[snapshot].graph()
    values = forman_curvature(graph) if graph.m else np.zeros(0)
    sums = edge_neighbor_sums(graph) if graph.m else np.zeros(0)
    rows = ["i,j,weight,curvature,neighbor_sum"]
    rows += [f"{i},{j},{w!r},{float(r)!r},{float(g)!r}" for (i, j, w), r, g in zip(graph.edges, values, sums)]
    Path(out).write_text("\n".join(rows) + "\n")
    total = ricci_total(graph) if graph.m else 0.0
    click.echo(f"{graph.m} edges, total curvature {total:.6f}, written to {out}")


@cli.command()
@click.option("--kappa", "-k", type=float, required=True, help="Curvature")
@click.option("--dim", type=int, default=16, help="Dimension")
@click.option("--trials", type=int, default=10000, help="Random trials per property")
@click.option("--seed", default=0, help="Random seed")
@_reports_errors
def geomcheck(kappa: float, dim: int, trials: int, seed: int):
    """Run the geometry property suite; exit 0 iff every property holds."""
    results = geometry_property_suite(kappa, dim, trials, seed)
    for result in results:
        mark = "✅" if result.passed else "❌"
        click.echo(f"{mark} {result.name}: worst {result.worst:.3e} (threshold {result.threshold:.1e}) {result.detail}")
    if not all(result.passed for result in results):
        sys.exit(1)


@cli.command()
@click.option("--graphs", type=int, default=50, help="Number of random graphs")
@click.option("--steps", type=int, default=200, help="Flow steps per graph")
@click.option("--dt", type=float, default=1e-3, help="Flow step size")
@click.option("--seed", default=0, help="Random seed")
@click.option("--tol", default=1e-6, help="Entropy drop tolerated per step")
@_reports_errors
def flowcheck(graphs: int, steps: int, dt: float, seed: int, tol: float):
    """Audit the constrained flow on random graphs; exit 0 iff every audit passes
    and the canonical flow yields a counterexample."""
    result = flow_entropy_suite(graphs, steps, dt, seed, tol=tol)
    for k, (verdict, drop) in enumerate(zip(result.constrained_verdicts, result.constrained_drawdowns)):
        mark = "✅" if verdict else "❌"
        diagnostics = result.diagnostics[k]
        click.echo(f"{mark} graph {k} (n={diagnostics.n}, m={diagnostics.m}): constrained drawdown {drop:.3e}, "
                   f"canonical drawdown {result.canonical_drawdowns[k]:.3e}")
    click.echo(f"constrained failures: {result.constrained_failures}/{graphs}")
    click.echo(f"canonical counterexample: {result.canonical_counterexample}")
    click.echo(f"curvature-sum rate below (m - n)/2 on graphs: {result.edge_bound_misses}")
    if result.constrained_failures or result.canonical_counterexample is None:
        sys.exit(1)


@cli.command()
@click.option("--output", "-o", default="config.json", help="Output configuration file")
@click.option("--env-template", "-e", is_flag=True, help="Generate .env template instead")
def init_config(output: str, env_template: bool):
    """Initialize a configuration file with default values."""
    config = ModelConfig()
    if env_template:
        env_path = Path(".env.template")
        if env_path.exists():
            click.confirm(f"Template file {env_path} already exists. Overwrite?", abort=True)
        env_path.write_text(config.to_env_template())
        click.echo(f"Environment template created: {env_path}")
        click.echo("Copy to .env and edit to customize your settings.")
    else:
        config_path = Path(output)
        if config_path.exists():
            click.confirm(f"Configuration file {output} already exists. Overwrite?", abort=True)
        config_path.write_text(json.dumps(config.model_dump(mode="json", by_alias=True), indent=2) + "\n")
        click.echo(f"Configuration file created: {output}")
        click.echo("Edit the file to customize your settings.")


@cli.command()
@click.option("--data", "-d", required=True, help="Dataset JSON file")
@click.option("--config", "-c", "config_file", help="JSON configuration file")
@click.option("--seed", default=0, help="Initialization seed")
@click.option("--h", "step", default=1e-5, help="Finite-difference step")
@click.option("--max-entries", type=int, help="Check at most this many entries per parameter")
@click.option("--tol", default=1e-4, help="Largest accepted relative error")
@_reports_errors
def gradcheck(data: str, config_file: Optional[str], seed: int, step: float, max_entries: Optional[int], tol: float):
    """Compare reverse-mode gradients with central differences on the first sequence."""
    dataset = load_dataset(data)
    config, kappa_set = _load_config(config_file)
    if not kappa_set:
        config = config.with_overrides(kappa=dataset.kappa)
    sequence = _sequence(ingest(dataset, config.kappa), 0)
    model = GraphODEModel(config, dataset.feature_dim, seed=seed)

    def loss_fn(params):
        return sequence_objective(model, sequence, params)[0]

    value, analytic = value_and_grad(loss_fn, model.params)
    numeric = finite_difference_gradient(loss_fn, model.params, step, max_entries)
    worst, name = max_relative_error(analytic, numeric)
    click.echo(f"loss {value:.6f}; worst relative error {worst:.3e} at {name or '-'} (tolerance {tol:.1e})")
    if worst > tol:
        sys.exit(1)


@cli.command()
@click.option("--model", "-m", "model_path", required=True, help="Model checkpoint")
@click.option("--data", "-d", required=True, help="Dataset JSON file")
@click.option("--horizon", "-H", type=int, required=True, help="Snapshots to score after the observed window")
@click.option("--out", "-o", help="Output CSV")
@_reports_errors
def evaluate(model_path: str, data: str, horizon: int, out: Optional[str]):
    """Score a model against the persistence baseline."""
    model = GraphODEModel.load(model_path)
    report = evaluate_model(model, load_dataset(data), horizon)
    if out:
        Path(out).write_text(report.to_csv())
    click.echo(f"📊 model:       MAPE {report.model.mape:.3f}%  RMSE {report.model.rmse:.6f}")
    click.echo(f"📊 persistence: MAPE {report.persistence.mape:.3f}%  RMSE {report.persistence.rmse:.6f}")


if __name__ == "__main__":
    cli()
