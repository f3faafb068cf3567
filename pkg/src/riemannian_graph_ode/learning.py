"""
Objective, gradients, Adam and the training loop.

Gradients come from reverse-mode differentiation through the fully unrolled
encode → integrate → decode → loss computation, so they are exact for the
discrete solver rather than for the continuous ODE.
"""

import logging
import time
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from . import autograd as ag
from .datasets import IngestedDataset, IngestedSnapshot, ingest
from .dynamics import SystemState
from .errors import ContractViolationError, ManifoldDomainError, NumericError
from .geometry import Stereographic
from .models import TRAINING_LOG_HEADER, EpochLog, ModelConfig, Objective, TrajectoryDataset, WeightedGraph
from .network import ModelParams
from .pipeline import GraphODEModel, observed_count

logger = logging.getLogger(__name__)

ALIGN_TOL = 1e-9

GradientSet = Dict[str, np.ndarray]
LossFn = Callable[[ModelParams], ag.Value]


# ------------------------------------------------------------------ loss

def observed_weights(graph: WeightedGraph, sources: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Observed weight of every (sources[k], targets[k]) edge, 0 where the edge is absent."""
    lookup = {(i, j): w for i, j, w in graph.edges}
    return np.array([lookup.get((int(i), int(j)), 0.0) for i, j in zip(sources, targets)], dtype=np.float64)


def loss_terms(pred_states: Sequence[SystemState], decoded: Sequence[ag.Value],
               observed: Sequence[IngestedSnapshot], manifold: Stereographic,
               sources: np.ndarray, targets: np.ndarray) -> Tuple[ag.Value, ag.Value, ag.Value]:
    """
    Differentiable (total, position, weight) reconstruction terms.

    Position: Σ_t Σ_i d²_κ(y_i(t), ŷ_i(t)). Weight: Σ_t Σ_(i,j) (w_ij(t) − ŵ_ij(t))².
    ŷ and ŵ are the observations; y and w come from the decoder and the flow.
    """
    if not (len(pred_states) == len(decoded) == len(observed)):
        raise ManifoldDomainError(
            f"{len(pred_states)} states, {len(decoded)} decoded snapshots and {len(observed)} observations"
        )
    position: ag.Value = 0.0
    weight: ag.Value = 0.0
    for state, y, target in zip(pred_states, decoded, observed):
        if abs(state.t - target.t) > ALIGN_TOL * max(1.0, abs(target.t)):
            raise ManifoldDomainError(f"prediction at t={state.t} does not align with observation at t={target.t}")
        if np.shape(ag.value(y)) != target.points.shape:
            raise ManifoldDomainError(
                f"decoded shape {np.shape(ag.value(y))} does not match observed {target.points.shape}"
            )
        if np.shape(ag.value(state.w)) != (len(sources),):
            raise ManifoldDomainError("predicted weights do not align with the edge list")
        position = position + ag.reduce_sum(manifold.distance(y, target.points) ** 2)
        if len(sources):
            residual = state.w - observed_weights(target.graph, sources, targets)
            weight = weight + ag.reduce_sum(residual ** 2)
    return position + weight, position, weight


def loss(pred_states: Sequence[SystemState], decoded: Sequence[ag.Value], observed: Sequence[IngestedSnapshot],
         manifold: Stereographic, sources: np.ndarray, targets: np.ndarray) -> Objective:
    total, position, weight = loss_terms(pred_states, decoded, observed, manifold, sources, targets)
    return Objective(
        total=float(ag.value(total)),
        position_term=float(ag.value(position)),
        weight_term=float(ag.value(weight)),
    )


def sequence_objective(model: GraphODEModel, sequence: Sequence[IngestedSnapshot],
                       params: Optional[ModelParams] = None) -> Tuple[ag.Value, ag.Value, ag.Value]:
    """Encode the observed part of a sequence, predict the rest and score it."""
    observed, held_out = model.split(sequence)
    if not held_out:
        raise ManifoldDomainError("sequence has no snapshots after the observed window")
    forecast = model.forecast(observed, [s.t for s in held_out], params)
    return loss_terms(forecast.states, forecast.decoded, held_out, model.manifold,
                      forecast.initial.sources, forecast.initial.targets)


# ------------------------------------------------------------- gradients

def trainable(params: ModelParams) -> ModelParams:
    """Fresh leaf Tensors holding copies of every parameter array."""
    return params.map_arrays(
        lambda _, v: ag.Tensor(np.array(ag.value(v), dtype=np.float64, copy=True), requires_grad=True)
    )


def collect_gradients(output: ag.Value, leaves: ModelParams) -> GradientSet:
    """Backpropagate a scalar output and read one gradient per leaf, in parameter order."""
    if ag.is_tensor(output) and output.requires_grad:
        output.backward()
    grads: GradientSet = {}
    for name, leaf in leaves.named_arrays():
        grad = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        if not np.all(np.isfinite(grad)):
            raise NumericError("non-finite gradient", parameter=name)
        grads[name] = grad
    return grads


def value_and_grad(loss_fn: LossFn, params: ModelParams) -> Tuple[float, GradientSet]:
    leaves = trainable(params)
    output = loss_fn(leaves)
    return float(ag.value(output)), collect_gradients(output, leaves)


def grad(loss_fn: LossFn, params: ModelParams) -> GradientSet:
    """Reverse-mode gradient of ``loss_fn`` with respect to every entry of ``params``."""
    return value_and_grad(loss_fn, params)[1]


def finite_difference_gradient(loss_fn: LossFn, params: ModelParams, h: float = 1e-5,
                               max_entries: Optional[int] = None) -> GradientSet:
    """
    Central differences (L(θ + h) − L(θ − h)) / 2h, entry by entry.

    Args:
        loss_fn: maps plain-array parameters to a scalar
        params: evaluation point
        h: step
        max_entries: when set, only the first ``max_entries`` flat entries of
            each parameter are estimated; the rest are left as NaN
    """
    base = params.numpy()
    grads: GradientSet = {}
    for name, value in base.named_arrays():
        estimate = np.full(value.shape, np.nan)
        flat = estimate.reshape(-1)
        limit = value.size if max_entries is None else min(value.size, max_entries)
        for k in range(limit):
            shifted = {}
            for sign in (1.0, -1.0):
                shifted_value = value.copy().reshape(-1)
                shifted_value[k] += sign * h
                arrays = dict(base.arrays)
                arrays[name] = shifted_value.reshape(value.shape)
                shifted[sign] = float(ag.value(loss_fn(ModelParams(arrays))))
            flat[k] = (shifted[1.0] - shifted[-1.0]) / (2.0 * h)
        grads[name] = estimate
    return grads


def max_relative_error(analytic: GradientSet, numeric: GradientSet, floor: float = 1e-6) -> Tuple[float, str]:
    """Worst |a − n| / max(|a|, |n|, floor) over entries the numeric estimate covers."""
    worst, worst_name = 0.0, ""
    for name, estimate in numeric.items():
        covered = ~np.isnan(estimate)
        if not np.any(covered):
            continue
        a, n = analytic[name][covered], estimate[covered]
        error = float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)))
        if error > worst:
            worst, worst_name = error, name
    return worst, worst_name


# ------------------------------------------------------------------ adam

class AdamState(NamedTuple):
    step: int
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, params: ModelParams, lr: float = 5e-4, **hyper) -> "AdamState":
        shapes = params.shapes()
        return cls(
            step=0,
            m={name: np.zeros(shape) for name, shape in shapes.items()},
            v={name: np.zeros(shape) for name, shape in shapes.items()},
            lr=lr,
            **hyper,
        )


def adam_step(params: ModelParams, grads: GradientSet, state: AdamState) -> Tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update; returns new params and state, inputs untouched."""
    shapes = params.shapes()
    for name, shape in shapes.items():
        if name not in grads or np.shape(grads[name]) != shape or state.m[name].shape != shape:
            raise ContractViolationError(f"gradient or moment shape mismatch for {name}")

    step = state.step + 1
    m, v, updated = {}, {}, {}
    for name, value in params.numpy().named_arrays():
        g = grads[name]
        m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        m_hat = m[name] / (1.0 - state.beta1 ** step)
        v_hat = v[name] / (1.0 - state.beta2 ** step)
        updated[name] = value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return ModelParams(updated), state._replace(step=step, m=m, v=v)


# --------------------------------------------------------------- trainer

def _ratio(last: float, first: float) -> float:
    return last / first if first > 0 else 0.0


class Trainer:
    """Full-batch-per-sequence training of a GraphODEModel."""

    def __init__(self, config: Optional[ModelConfig] = None, seed: int = 0):
        self.config = config or ModelConfig()
        self.seed = seed
        self.history: List[EpochLog] = []
        self.skipped: List[int] = []
        self.model: Optional[GraphODEModel] = None

    def _usable(self, dataset: IngestedDataset) -> List[List[IngestedSnapshot]]:
        usable = []
        for index, sequence in enumerate(dataset.sequences):
            if len(sequence) < 2 or observed_count(len(sequence), self.config.split_ratio) >= len(sequence):
                logger.warning("skipping degenerate sequence %d (%d snapshots)", index, len(sequence))
                self.skipped.append(index)
                continue
            usable.append(sequence)
        return usable

    def fit(self, dataset: Union[IngestedDataset, TrajectoryDataset]) -> GraphODEModel:
        if isinstance(dataset, TrajectoryDataset):
            dataset = ingest(dataset, self.config.kappa)
        model = GraphODEModel(self.config, dataset.feature_dim, seed=self.seed)
        self.model = model
        self.history = []
        self.skipped = []
        sequences = self._usable(dataset)
        if not sequences:
            logger.warning("no usable sequences in dataset %s; nothing to train", dataset.name)
            return model

        params = model.params
        state = AdamState.zeros(params, lr=self.config.lr)
        for epoch in range(1, self.config.epochs + 1):
            started = time.perf_counter()
            total = position = weight = 0.0
            for sequence in sequences:
                leaves = trainable(params)
                seq_total, seq_position, seq_weight = sequence_objective(model, sequence, leaves)
                grads = collect_gradients(seq_total, leaves)
                total += float(ag.value(seq_total))
                position += float(ag.value(seq_position))
                weight += float(ag.value(seq_weight))
                params, state = adam_step(params, grads, state)
            entry = EpochLog(
                epoch=epoch,
                total_loss=total,
                position_term=position,
                weight_term=weight,
                wall_ms=(time.perf_counter() - started) * 1000.0,
            )
            self.history.append(entry)
            logger.info(
                "epoch %d/%d loss=%.6f (position %.6f, weight %.6f) %.1f ms",
                epoch, self.config.epochs, total, position, weight, entry.wall_ms,
            )
        model.params = params
        return model

    def get_training_summary(self) -> Dict:
        """Summary of the last fit"""
        if not self.history:
            return {"epochs": 0, "skipped_sequences": list(self.skipped)}
        first, last = self.history[0], self.history[-1]
        return {
            "epochs": len(self.history),
            "initial_loss": first.total_loss,
            "final_loss": last.total_loss,
            "best_loss": min(entry.total_loss for entry in self.history),
            "loss_ratio": _ratio(last.total_loss, first.total_loss),
            "position_ratio": _ratio(last.position_term, first.position_term),
            "weight_ratio": _ratio(last.weight_term, first.weight_term),
            "total_wall_ms": sum(entry.wall_ms for entry in self.history),
            "skipped_sequences": list(self.skipped),
        }

    def training_log_csv(self) -> str:
        return "\n".join([TRAINING_LOG_HEADER] + [entry.csv_row() for entry in self.history]) + "\n"

    def write_log_csv(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.training_log_csv())


def train(dataset: Union[IngestedDataset, TrajectoryDataset], config: Optional[ModelConfig] = None,
          seed: int = 0) -> Tuple[GraphODEModel, List[EpochLog]]:
    """Train a model from scratch; returns the trained model (its params) and the epoch log."""
    trainer = Trainer(config, seed)
    model = trainer.fit(dataset)
    return model, trainer.history
