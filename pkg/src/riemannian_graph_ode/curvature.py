"""
Forman-Ricci curvature of weighted graphs and the Ricci-flow right-hand sides.

Per edge e = (i, j) with unit node weights:

    R(e) = 2 − g(e),   g(e) = Σ_{u∼i, u≠j} √(w_e/w_iu) + Σ_{v∼j, v≠i} √(w_e/w_jv)

With S_i = Σ_{e'∋i} w_e'^{-1/2} the neighbour sums collapse to
g(e) = √w_e (S_i + S_j) − 2, which is what the vectorised kernels compute.
The ``*_from_weights`` kernels accept arrays or Tensors.
"""

import logging

import numpy as np

from . import autograd as ag
from .errors import ContractViolationError, ManifoldDomainError
from .models import CurvatureDiagnostics, FlowMode, WeightedGraph, WeightUpdate

logger = logging.getLogger(__name__)

MIN_WEIGHT = 1e-12


def validate_weights(weights) -> None:
    values = ag.value(weights)
    if np.any(~np.isfinite(values)) or np.any(values <= 0.0):
        raise ManifoldDomainError("edge weights must be finite and strictly positive")


def validate_constraints(f_values) -> np.ndarray:
    values = np.asarray(ag.value(f_values), dtype=np.float64)
    if np.any(~np.isfinite(values)) or np.any(values <= 0.0) or np.any(values >= 1.0):
        raise ContractViolationError("constraint values must lie in the open interval (0, 1)")
    return values


def node_strengths(n: int, sources: np.ndarray, targets: np.ndarray, weights):
    """S_i = Σ over edges at i of w^{-1/2}."""
    inv_sqrt = weights ** -0.5
    return ag.scatter_add(inv_sqrt, sources, n) + ag.scatter_add(inv_sqrt, targets, n)


def neighbor_sums_from_weights(n: int, sources: np.ndarray, targets: np.ndarray, weights):
    strengths = node_strengths(n, sources, targets, weights)
    return ag.sqrt(weights) * (strengths[sources] + strengths[targets]) - 2.0


def forman_from_weights(n: int, sources: np.ndarray, targets: np.ndarray, weights):
    return 2.0 - neighbor_sums_from_weights(n, sources, targets, weights)


def forman_curvature(graph: WeightedGraph) -> np.ndarray:
    """Per-edge Forman-Ricci curvature aligned with ``graph.edges``."""
    weights = graph.weights
    validate_weights(weights)
    return forman_from_weights(graph.n, graph.sources, graph.targets, weights)


def edge_neighbor_sums(graph: WeightedGraph) -> np.ndarray:
    """Per-edge g(e), the subtracted term of the curvature."""
    weights = graph.weights
    validate_weights(weights)
    return neighbor_sums_from_weights(graph.n, graph.sources, graph.targets, weights)


def canonical_flow_rhs(graph: WeightedGraph) -> np.ndarray:
    """dw/dt = −R·w."""
    return -forman_curvature(graph) * graph.weights


def constrained_flow_rhs(graph: WeightedGraph, f_values) -> np.ndarray:
    """dw/dt = (R − e^f)·w with every f in (0, 1)."""
    f_values = np.broadcast_to(validate_constraints(f_values), (graph.m,))
    return (forman_curvature(graph) - np.exp(f_values)) * graph.weights


def ricci_total(graph: WeightedGraph) -> float:
    return float(np.sum(forman_curvature(graph)))


def flow_rates(curvature, f_values=None, mode: FlowMode = FlowMode.CONSTRAINED):
    """Logarithmic rate r with dw/dt = r·w: R − e^f (constrained) or −R (canonical)."""
    if mode == FlowMode.CANONICAL:
        return -curvature
    return curvature - ag.exp(f_values)


def advance_weights(weights, rates, dt: float, rule: WeightUpdate = WeightUpdate.LOG_SPACE):
    """One step of dw/dt = r·w with r frozen over the step."""
    if rule == WeightUpdate.LOG_SPACE:
        return weights * ag.exp(rates * dt)
    return ag.clip(weights + dt * rates * weights, MIN_WEIGHT, None)


def ricci_total_rate(graph: WeightedGraph, f_values=None, mode: FlowMode = FlowMode.CONSTRAINED) -> float:
    """
    Closed-form d(Σ R)/dt along the constrained or canonical flow.

    With rates r_e and T_i = Σ_{e'∋i} r_e' w_e'^{-1/2}:
    dg_e/dt = ½√w_e [r_e (S_i + S_j) − (T_i + T_j)].
    """
    weights = graph.weights
    validate_weights(weights)
    sources, targets = graph.sources, graph.targets
    curvature = forman_from_weights(graph.n, sources, targets, weights)
    if mode == FlowMode.CONSTRAINED:
        f_values = np.broadcast_to(validate_constraints(f_values), (graph.m,))
    rates = flow_rates(curvature, f_values, mode)

    strengths = node_strengths(graph.n, sources, targets, weights)
    weighted = rates * weights ** -0.5
    totals = np.zeros(graph.n)
    np.add.at(totals, sources, weighted)
    np.add.at(totals, targets, weighted)
    dg = 0.5 * np.sqrt(weights) * (
        rates * (strengths[sources] + strengths[targets]) - (totals[sources] + totals[targets])
    )
    return float(-np.sum(dg))


def flow_diagnostics(graph: WeightedGraph, f_values=None, mode: FlowMode = FlowMode.CONSTRAINED) -> CurvatureDiagnostics:
    """Curvature-sum quantities of the entropy argument, reported for inspection."""
    diagnostics = CurvatureDiagnostics(
        n=graph.n,
        m=graph.m,
        ricci_total=ricci_total(graph),
        ricci_rate=ricci_total_rate(graph, f_values, mode),
        neighbor_sum_total=float(np.sum(edge_neighbor_sums(graph))),
        edge_count_bound=(graph.m - graph.n) / 2.0,
    )
    logger.debug("curvature diagnostics: %s", diagnostics.model_dump())
    return diagnostics
