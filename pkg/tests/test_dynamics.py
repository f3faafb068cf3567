import json

import numpy as np
import pytest

from riemannian_graph_ode.dynamics import (
    CoupledDynamics,
    SystemState,
    audit_flow,
    simulate_flow_only,
    write_trajectory_jsonl,
)
from riemannian_graph_ode.checks import flow_suite_instance
from riemannian_graph_ode.errors import ChartOverflowError, ContractViolationError, ManifoldDomainError
from riemannian_graph_ode.geometry import Stereographic
from riemannian_graph_ode.models import Ablation, FlowMode, IntegratorConfig, ModelConfig, WeightedGraph
from riemannian_graph_ode.network import init_params


def square():
    return WeightedGraph(n=4, edges=[(0, 1, 1.0), (0, 3, 0.5), (1, 2, 2.0), (2, 3, 1.0)])


def make_dynamics(kappa=-1.0, **overrides):
    config = ModelConfig(d=4, time_dim=4, kappa=kappa).with_overrides(**overrides)
    params = init_params(config, feature_dim=3, seed=0)
    graph = square()
    manifold = Stereographic(kappa)
    dynamics = CoupledDynamics(params, manifold, graph.sources, graph.targets, config)
    Z0 = manifold.random_points(np.random.default_rng(0), 4, 4, max_fraction=0.5)
    return dynamics, SystemState(t=0.0, Z=Z0, w=np.array([0.1, 0.2, 0.3, 0.4]))


class TestCoupledDynamics:
    def test_step_keeps_states_valid(self):
        dynamics, state = make_dynamics()
        after = dynamics.coupled_step(state, 0.01)
        assert after.t == pytest.approx(0.01)
        assert np.all(dynamics.manifold.in_domain(after.Z))
        assert np.all(after.w > 0.0)

    def test_rejects_non_positive_step(self):
        dynamics, state = make_dynamics()
        with pytest.raises(ManifoldDomainError):
            dynamics.coupled_step(state, 0.0)

    def test_integrate_lands_on_requested_times(self):
        dynamics, state = make_dynamics()
        trajectory = dynamics.integrate(state, [0.013, 0.05, 0.1])
        assert [s.t for s in trajectory] == [0.013, 0.05, 0.1]
        for s in trajectory:
            assert np.all(dynamics.manifold.in_domain(s.Z))
            assert np.all(s.w > 0.0)

    def test_integrate_at_initial_time_is_identity(self):
        dynamics, state = make_dynamics()
        (same,) = dynamics.integrate(state, [0.0])
        np.testing.assert_array_equal(same.Z, state.Z)
        np.testing.assert_array_equal(same.w, state.w)

    def test_integrate_rejects_unordered_times(self):
        dynamics, state = make_dynamics()
        with pytest.raises(ManifoldDomainError):
            dynamics.integrate(state, [0.2, 0.1])
        with pytest.raises(ManifoldDomainError):
            dynamics.integrate(state._replace(t=1.0), [0.5])

    def test_frozen_weights_without_evolution(self):
        dynamics, state = make_dynamics(ablation=Ablation.WO_EVO)
        (final,) = dynamics.integrate(state, [0.1])
        np.testing.assert_array_equal(final.w, state.w)

    def test_canonical_weights_without_constraint(self):
        dynamics, state = make_dynamics(ablation=Ablation.WO_CON)
        after = dynamics.coupled_step(state, 0.01)
        assert not np.allclose(after.w, state.w)

    def test_sphere_integration(self):
        dynamics, state = make_dynamics(kappa=1.0)
        trajectory = dynamics.integrate(state, [0.05])
        assert np.all(np.isfinite(trajectory[-1].Z))

    def test_deterministic(self):
        first, state = make_dynamics()
        second, _ = make_dynamics()
        a = first.integrate(state, [0.1])[-1]
        b = second.integrate(state, [0.1])[-1]
        np.testing.assert_array_equal(a.Z, b.Z)
        np.testing.assert_array_equal(a.w, b.w)

    def test_explicit_integrator_sets_substeps(self):
        dynamics, state = make_dynamics()
        coarse = CoupledDynamics(dynamics.params, dynamics.manifold, dynamics.sources, dynamics.targets,
                                 dynamics.config, IntegratorConfig(base_step=0.05))
        (final,) = coarse.integrate(state, [0.1])
        by_hand = dynamics.coupled_step(dynamics.coupled_step(state, 0.05), 0.05)
        np.testing.assert_allclose(final.Z, by_hand.Z, atol=1e-14)
        np.testing.assert_allclose(final.w, by_hand.w, atol=1e-14)

    def test_integrator_follows_model_config(self):
        dynamics, _ = make_dynamics(base_step=0.02, max_halvings=3)
        assert dynamics.integrator == IntegratorConfig(base_step=0.02, max_substeps=3)
        assert dynamics.integrator.scheme == "chart_euler"

    def test_chart_overflow_halves_up_to_limit(self):
        dynamics, state = make_dynamics(kappa=1.0, max_halvings=2)
        calls = []

        def overflowing(current, dt):
            calls.append(dt)
            raise ChartOverflowError("step leaves the chart")

        dynamics.coupled_step = overflowing
        with pytest.raises(ChartOverflowError):
            dynamics.advance(state, 0.04)
        assert calls == [0.04, 0.02, 0.01]

    def test_first_order_convergence(self):
        times = [0.2]

        def final_state(step):
            dynamics, state = make_dynamics(base_step=step)
            (final,) = dynamics.integrate(state, times)
            return np.concatenate([np.ravel(final.Z), np.ravel(final.w)])

        reference = final_state(0.02 / 256)
        steps = np.array([0.02, 0.01, 0.005, 0.0025])
        errors = np.array([np.linalg.norm(final_state(step) - reference) for step in steps])
        slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
        assert slope == pytest.approx(1.0, abs=0.2)


class TestFlowOnly:
    def test_zero_step_gives_constant_trajectory(self):
        trajectory = simulate_flow_only(square(), 0.5, steps=5, dt=0.0)
        assert len(trajectory) == 6
        for _, graph in trajectory:
            np.testing.assert_array_equal(graph.weights, square().weights)

    def test_times_and_topology(self):
        trajectory = simulate_flow_only(square(), 0.3, steps=10, dt=0.01)
        assert trajectory[-1][0] == pytest.approx(0.1)
        assert all(graph.same_topology(square()) for _, graph in trajectory)

    def test_per_edge_constraints(self):
        f = np.array([0.1, 0.3, 0.5, 0.7])
        trajectory = simulate_flow_only(square(), f, steps=3, dt=0.01)
        assert len(trajectory) == 4

    def test_invalid_constraint(self):
        with pytest.raises(ContractViolationError):
            simulate_flow_only(square(), 1.0, steps=3, dt=0.01)

    def test_canonical_ignores_constraint(self):
        a = simulate_flow_only(square(), 0.2, steps=3, dt=0.01, mode=FlowMode.CANONICAL)
        b = simulate_flow_only(square(), 0.8, steps=3, dt=0.01, mode=FlowMode.CANONICAL)
        np.testing.assert_array_equal(a[-1][1].weights, b[-1][1].weights)

    def test_audit_flow_on_uneven_triangle(self):
        triangle = WeightedGraph(n=3, edges=[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 4.0)])
        report, dt = audit_flow(triangle, 0.5, steps=100, dt=1e-3)
        assert report.verdict
        assert dt == 1e-3
        assert len(report.series) == 101

    def test_audit_flow_retries_then_reports_failure(self):
        graph, f_values = flow_suite_instance(0, 0)
        report, dt = audit_flow(graph, f_values, steps=40, dt=1e-3, retries=2)
        assert not report.verdict
        assert dt == pytest.approx(2.5e-4)
        assert len(report.series) == 161
        assert report.series[-1][0] == pytest.approx(0.04)


class TestTrajectoryOutput:
    def test_jsonl_records(self, tmp_path):
        dynamics, state = make_dynamics()
        trajectory = dynamics.integrate(state, [0.05, 0.1])
        path = tmp_path / "trajectory.jsonl"
        write_trajectory_jsonl(trajectory, path, features=[np.zeros((4, 3)), np.ones((4, 3))])
        records = [json.loads(line) for line in path.read_text().splitlines()]
        assert [r["t"] for r in records] == [0.05, 0.1]
        assert np.asarray(records[0]["Z"]).shape == (4, 4)
        assert len(records[1]["w"]) == 4
        assert records[1]["features"] == [[1.0, 1.0, 1.0]] * 4
