"""
Randomized property suites over the geometry and the weight flow.

``geometry_property_suite`` backs ``rgode geomcheck``; ``flow_entropy_suite``
runs the constrained and canonical flows over a pool of seeded random graphs.
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from .curvature import flow_diagnostics
from .dynamics import audit_flow, simulate_flow_only
from .entropy import entropy_series, max_drawdown
from .generators import random_connected_graph
from .geometry import Stereographic
from .models import CheckResult, FlowMode, FlowSuiteResult, ModelConfig, WeightedGraph
from .network import edge_constraints, init_params

logger = logging.getLogger(__name__)

CLOSURE_TOL = 1e-9
ROUND_TRIP_TOL = 1e-8
IDENTITY_TOL = 1e-10
INVERSE_TOL = 1e-12
CONTINUITY_TOL = 1e-4
NEAR_FLAT = 1e-6
SYMMETRY_TOL = 1e-10
ROUND_TRIP_DISTANCE = 5.0


def _result(name: str, errors: np.ndarray, threshold: float, detail: str = "") -> CheckResult:
    worst = float(np.max(errors)) if np.size(errors) else 0.0
    return CheckResult(name=name, passed=bool(worst <= threshold), worst=worst, threshold=threshold, detail=detail)


def _row_error(a, b) -> np.ndarray:
    return np.linalg.norm(np.asarray(a) - np.asarray(b), axis=-1).reshape(-1)


def _closure_margin(manifold: Stereographic, outputs) -> np.ndarray:
    """−κ‖x‖² per row, +inf for non-finite rows; rows are inside the domain iff below 1."""
    outputs = np.asarray(outputs)
    margin = -manifold.kappa * np.sum(outputs ** 2, axis=-1)
    margin = np.where(np.all(np.isfinite(outputs), axis=-1), margin, np.inf)
    return margin.reshape(-1)


def _round_trip_distance(manifold: Stereographic) -> float:
    """Longest geodesic the exp/log round trip is checked over."""
    if manifold.kappa > 0 and not manifold.is_flat:
        return 0.9 * math.pi * manifold.radius
    return ROUND_TRIP_DISTANCE * (1.0 if manifold.is_flat else manifold.radius)


def geometry_property_suite(kappa: float, dim: int, trials: int = 10000, seed: int = 0) -> List[CheckResult]:
    """
    Check the manifold operations on ``trials`` seeded random inputs.

    Properties: gyro_transform closure and its Lorentz residual, closure of
    the other point-valued operations, exp/log round trips at the origin and
    at random base points over long geodesics, Möbius identity and inverse,
    distance symmetry, gyro_transform by the identity matrix, and agreement
    with the flat model as κ → 0.
    """
    rng = np.random.default_rng(seed)
    manifold = Stereographic(kappa)
    results = []

    z = manifold.random_points(rng, trials, dim, max_fraction=0.9)
    weights = rng.standard_normal((trials, dim, dim)) / math.sqrt(dim)
    transformed = manifold.gyro_transform(weights, z[:, None, :])[:, 0, :]
    closure = float(np.max(_closure_margin(manifold, transformed)))
    results.append(CheckResult(name="gyro_transform_closure", passed=closure < 1.0, worst=closure,
                               threshold=1.0, detail="largest −κ‖out‖², must stay below 1"))
    if manifold.is_flat:
        results.append(_result("lorentz_residual", np.zeros(0), CLOSURE_TOL, "flat model: no Lorentz counterpart"))
    else:
        residual = manifold.stereo_unproject(transformed).residual(kappa)
        results.append(_result("lorentz_residual", residual, CLOSURE_TOL))

    y = manifold.random_points(rng, trials, dim, max_fraction=0.9)
    ratios = rng.uniform(-3.0, 3.0, size=(trials, 1))
    tangent_steps = rng.standard_normal((trials, dim))
    tangent_steps *= 0.45 * _round_trip_distance(manifold) / np.linalg.norm(tangent_steps, axis=-1, keepdims=True)
    tangent_steps /= manifold.conformal_factor(z)
    sets = manifold.random_points(rng, trials * 3, dim, max_fraction=0.9).reshape(trials, 3, dim)
    set_weights = rng.uniform(0.0, 1.0, size=(trials, 3)) + 1e-3
    margins = np.concatenate([
        _closure_margin(manifold, manifold.mobius_add(z, y)),
        _closure_margin(manifold, manifold.mobius_scalar(ratios, z)),
        _closure_margin(manifold, manifold.exp_map(z, tangent_steps)),
        _closure_margin(manifold, manifold.gyro_midpoint(sets, set_weights)),
    ])
    worst = float(np.max(margins))
    results.append(CheckResult(name="operation_closure", passed=worst < 1.0, worst=worst, threshold=1.0,
                               detail="mobius_add, mobius_scalar, exp_map, gyro_midpoint: largest −κ‖out‖²"))

    identity = manifold.gyro_transform(np.eye(dim), z)
    results.append(_result("gyro_transform_identity", _row_error(identity, z), IDENTITY_TOL))

    tangent = manifold.log0(z)
    results.append(_result("exp0_log0_round_trip", _row_error(manifold.exp0(tangent), z), ROUND_TRIP_TOL))

    base = manifold.random_points(rng, trials, dim, max_fraction=0.5)
    direction = rng.standard_normal((trials, dim))
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    lengths = _round_trip_distance(manifold) * rng.uniform(0.0, 1.0, size=(trials, 1)) / manifold.conformal_factor(base)
    v = direction * lengths
    recovered = manifold.log_map(base, manifold.exp_map(base, v))
    results.append(_result("exp_log_round_trip", _row_error(recovered, v), ROUND_TRIP_TOL,
                           f"geodesic lengths up to {_round_trip_distance(manifold):.3g}"))

    origin = np.zeros_like(z)
    identity_error = np.maximum(_row_error(manifold.mobius_add(z, origin), z),
                                _row_error(manifold.mobius_add(origin, z), z))
    results.append(_result("mobius_identity", identity_error, IDENTITY_TOL))
    results.append(_result("mobius_inverse", _row_error(manifold.mobius_add(-z, z), origin), INVERSE_TOL))
    results.append(_result("distance_symmetry", np.abs(manifold.distance(z, y) - manifold.distance(y, z)),
                           SYMMETRY_TOL))

    near = Stereographic(math.copysign(NEAR_FLAT, kappa) if kappa else NEAR_FLAT)
    flat = Stereographic(0.0)
    x = flat.random_points(rng, trials, dim, max_fraction=1.0)
    w = flat.random_points(rng, trials, dim, max_fraction=1.0)
    points = flat.random_points(rng, trials * 3, dim, max_fraction=1.0).reshape(trials, 3, dim)
    continuity = np.maximum.reduce([
        _row_error(near.mobius_add(x, w), flat.mobius_add(x, w)),
        np.abs(near.distance(x, w) - flat.distance(x, w)),
        _row_error(near.mobius_scalar(ratios, x), flat.mobius_scalar(ratios, x)),
        _row_error(near.exp0(x), flat.exp0(x)),
        _row_error(near.log0(x), flat.log0(x)),
        _row_error(near.exp_map(x, w), flat.exp_map(x, w)),
        _row_error(near.log_map(x, w), flat.log_map(x, w)),
        _row_error(near.gyro_midpoint(points, set_weights), flat.gyro_midpoint(points, set_weights)),
    ])
    results.append(_result("flat_limit_continuity", continuity, CONTINUITY_TOL,
                           "mobius_add, distance, mobius_scalar, exp0, log0, exp_map, log_map, gyro_midpoint"))

    for result in results:
        logger.log(logging.INFO if result.passed else logging.WARNING,
                   "geomcheck κ=%g d=%d %s: worst %.3g (threshold %.1g)",
                   kappa, dim, result.name, result.worst, result.threshold)
    return results


def flow_suite_instance(seed: int, k: int, n_range: Tuple[int, int] = (5, 20),
                        config: Optional[ModelConfig] = None) -> Tuple[WeightedGraph, np.ndarray]:
    """
    Graph k of the flow suite and its constraint values.

    Drawn from ``default_rng([seed, k])``: n nodes in ``n_range``, m ≥ n edges,
    weights in [0.5, 2]. Constraint values come from a freshly initialized
    constraint net evaluated at random points of the Poincaré ball.
    """
    config = config or ModelConfig(d=4)
    manifold = Stereographic(config.kappa)
    rng = np.random.default_rng([seed, k])
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    graph = random_connected_graph(rng, n)
    params = init_params(config, feature_dim=1, seed=int(rng.integers(2 ** 31)))
    points = manifold.random_points(rng, n, config.dim, max_fraction=0.9)
    f_values = np.asarray(edge_constraints(points, graph.sources, graph.targets, params, manifold))
    return graph, f_values


def flow_entropy_suite(graph_count: int = 50, steps: int = 200, dt: float = 1e-3, seed: int = 0,
                       n_range: Tuple[int, int] = (5, 20), tol: float = 1e-6) -> FlowSuiteResult:
    """Constrained-flow entropy audits and canonical-flow drawdowns over ``flow_suite_instance`` graphs."""
    config = ModelConfig(d=4)
    result = FlowSuiteResult()
    for k in range(graph_count):
        graph, f_values = flow_suite_instance(seed, k, n_range, config)
        report, _ = audit_flow(graph, f_values, steps, dt, FlowMode.CONSTRAINED, tol)
        canonical = simulate_flow_only(graph, steps=steps, dt=dt, mode=FlowMode.CANONICAL)
        result.constrained_verdicts.append(report.verdict)
        result.constrained_drawdowns.append(max_drawdown(report.series))
        result.canonical_drawdowns.append(max_drawdown(entropy_series(canonical)))
        result.diagnostics.append(flow_diagnostics(graph, f_values, FlowMode.CONSTRAINED))
        logger.debug("flow suite graph %d (n=%d, m=%d): verdict %s", k, graph.n, graph.m, report.verdict)

    if result.constrained_failures:
        logger.warning(
            "flow suite: %d/%d constrained audits fail (graphs %s), worst entropy drawdown %.3g",
            result.constrained_failures, graph_count, result.failing_graphs, max(result.constrained_drawdowns),
        )
    if result.edge_bound_misses:
        logger.warning("flow suite: curvature-sum rate below (m - n)/2 on graphs %s", result.edge_bound_misses)
    logger.info(
        "flow suite: %d/%d constrained audits pass, canonical counterexample at %s",
        graph_count - result.constrained_failures, graph_count, result.canonical_counterexample,
    )
    return result
