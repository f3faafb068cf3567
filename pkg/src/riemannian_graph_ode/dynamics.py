"""
Coupled integration of node states and edge weights.

Node states are advanced by chart Euler in the origin chart: V = Log_o(Z),
V' = V + dt·u, Z' = Exp_o(V'). Edge weights follow the constrained Ricci flow
through a multiplicative (log-space) update. Curvature and constraints are
recomputed at every substep and frozen within it.
"""

import json
import logging
from pathlib import Path
from typing import IO, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from . import autograd as ag
from .curvature import advance_weights, flow_rates, forman_from_weights, validate_constraints, validate_weights
from .entropy import audit
from .errors import ChartOverflowError, ManifoldDomainError
from .geometry import Stereographic
from .models import Ablation, FlowMode, IntegratorConfig, ModelConfig, MonotonicityReport, WeightedGraph, WeightUpdate
from .network import ModelParams, edge_constraints, vector_field

logger = logging.getLogger(__name__)

TIME_SLACK = 1e-12
AUDIT_PREFIX_STEPS = 8


class SystemState(NamedTuple):
    t: float
    Z: ag.Value
    w: ag.Value


class CoupledDynamics:
    """The node-state ODE and the edge-weight flow on a fixed edge list."""

    def __init__(self, params: ModelParams, manifold: Stereographic, sources: np.ndarray,
                 targets: np.ndarray, config: Optional[ModelConfig] = None,
                 integrator: Optional[IntegratorConfig] = None):
        self.params = params
        self.manifold = manifold
        self.sources = np.asarray(sources, dtype=np.int64)
        self.targets = np.asarray(targets, dtype=np.int64)
        self.config = config or ModelConfig()
        self.integrator = integrator or self.config.integrator()

    def _next_weights(self, Z, w, dt: float):
        ablation = self.config.ablation
        if ablation == Ablation.WO_EVO or len(self.sources) == 0:
            return w
        n = np.shape(ag.value(Z))[0]
        if ablation == Ablation.WO_RIC:
            return w + dt * edge_constraints(Z, self.sources, self.targets, self.params, self.manifold)
        curvature = forman_from_weights(n, self.sources, self.targets, w)
        if ablation == Ablation.WO_CON:
            rates = flow_rates(curvature, mode=FlowMode.CANONICAL)
        else:
            f_values = edge_constraints(Z, self.sources, self.targets, self.params, self.manifold)
            rates = flow_rates(curvature, f_values, FlowMode.CONSTRAINED)
        return advance_weights(w, rates, dt, self.config.weight_update)

    def coupled_step(self, state: SystemState, dt: float) -> SystemState:
        """One explicit step of both equations from the same frozen state."""
        if dt <= 0:
            raise ManifoldDomainError("step size must be positive")
        w_next = self._next_weights(state.Z, state.w, dt)
        velocity = vector_field(state.Z, self.sources, self.targets, state.w, self.params,
                                self.manifold, self.config.gat_attention)
        Z_next = self.manifold.exp0(self.manifold.log0(state.Z) + dt * velocity)
        return SystemState(state.t + dt, Z_next, w_next)

    def advance(self, state: SystemState, dt: float, depth: int = 0) -> SystemState:
        """coupled_step with recursive halving when a κ > 0 chart step overflows."""
        try:
            return self.coupled_step(state, dt)
        except ChartOverflowError:
            if depth >= self.integrator.max_substeps:
                raise ChartOverflowError(f"chart overflow persists after {depth} step halvings")
            logger.debug("chart overflow at t=%.6g, halving dt=%.3g", state.t, dt)
            half = self.advance(state, dt / 2.0, depth + 1)
            return self.advance(half, dt / 2.0, depth + 1)

    def integrate(self, state: SystemState, times: Sequence[float]) -> List[SystemState]:
        """
        States at every requested time.

        Substeps are at most ``base_step`` long; the last substep before each
        requested time is shortened so the trajectory lands on it exactly.
        """
        times = [float(t) for t in times]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ManifoldDomainError("requested times must be strictly increasing")
        if times and times[0] < state.t - TIME_SLACK:
            raise ManifoldDomainError("requested times start before the initial state")

        base_step = self.integrator.base_step
        trajectory = []
        for target in times:
            remaining = target - state.t
            while remaining > TIME_SLACK * max(1.0, abs(target)):
                state = self.advance(state, min(base_step, remaining))
                remaining = target - state.t
            state = state._replace(t=target)
            trajectory.append(state)
        return trajectory


def simulate_flow_only(graph: WeightedGraph, f_values: Union[float, np.ndarray] = 0.5, steps: int = 200,
                       dt: float = 1e-3, mode: FlowMode = FlowMode.CONSTRAINED,
                       weight_update: WeightUpdate = WeightUpdate.LOG_SPACE,
                       t0: float = 0.0) -> List[Tuple[float, WeightedGraph]]:
    """
    Evolve only the edge weights.

    Args:
        graph: initial weighted graph
        f_values: constraint values in (0, 1), one constant or one per edge;
            ignored by the canonical flow
        steps: number of steps; the output holds steps + 1 snapshots
        dt: step size (0 gives identical graphs)
    """
    if steps < 0 or dt < 0:
        raise ManifoldDomainError("steps and dt must be non-negative")
    weights = graph.weights
    validate_weights(weights)
    f = None
    if mode == FlowMode.CONSTRAINED:
        f = np.broadcast_to(validate_constraints(f_values), (graph.m,))

    sources, targets = graph.sources, graph.targets
    trajectory = [(t0, graph)]
    for k in range(1, steps + 1):
        if graph.m:
            rates = flow_rates(forman_from_weights(graph.n, sources, targets, weights), f, mode)
            weights = advance_weights(weights, rates, dt, weight_update)
        trajectory.append((t0 + k * dt, graph.with_weights(weights)))
    return trajectory


def audit_flow(graph: WeightedGraph, f_values: Union[float, np.ndarray] = 0.5, steps: int = 200,
               dt: float = 1e-3, mode: FlowMode = FlowMode.CONSTRAINED, tol: float = 1e-6,
               retries: int = 3, weight_update: WeightUpdate = WeightUpdate.LOG_SPACE) -> Tuple[MonotonicityReport, float]:
    """
    Simulate and audit; on violation retry over the same horizon with halved steps.

    Attempts other than the last first audit a short prefix of the trajectory.
    A violation there fails the whole attempt, so the full run is skipped.
    """
    if dt <= 0:
        raise ManifoldDomainError("audit_flow needs a positive step size")
    report = None
    for attempt in range(retries + 1):
        final = attempt == retries
        if not final and steps > AUDIT_PREFIX_STEPS:
            prefix = audit(simulate_flow_only(graph, f_values, AUDIT_PREFIX_STEPS, dt, mode, weight_update), tol)
            if not prefix.verdict:
                logger.info("entropy audit failed within %d steps at dt=%.3g, retrying with dt=%.3g",
                            AUDIT_PREFIX_STEPS, dt, dt / 2.0)
                dt /= 2.0
                steps *= 2
                continue
        trajectory = simulate_flow_only(graph, f_values, steps, dt, mode, weight_update)
        report = audit(trajectory, tol)
        if report.verdict or final:
            break
        logger.info("entropy audit failed at dt=%.3g, retrying with dt=%.3g", dt, dt / 2.0)
        dt /= 2.0
        steps *= 2
    if not report.verdict:
        logger.warning("entropy audit still fails after %d step halvings", retries)
    return report, dt


def write_trajectory_jsonl(states: Sequence[SystemState], destination: Union[str, Path, IO[str]],
                           features: Optional[Sequence[np.ndarray]] = None) -> None:
    """One JSON object per state: {"t", "Z", "w"} plus decoded "features" when given."""
    lines = []
    for k, state in enumerate(states):
        record = {
            "t": float(state.t),
            "Z": np.asarray(ag.value(state.Z)).tolist(),
            "w": np.asarray(ag.value(state.w)).tolist(),
        }
        if features is not None:
            record["features"] = np.asarray(features[k]).tolist()
        lines.append(json.dumps(record))
    text = "\n".join(lines) + ("\n" if lines else "")
    if isinstance(destination, (str, Path)):
        Path(destination).write_text(text)
    else:
        destination.write(text)
