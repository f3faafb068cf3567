import numpy as np
import pytest

from riemannian_graph_ode.datasets import ingest
from riemannian_graph_ode.errors import ManifoldDomainError
from riemannian_graph_ode.generators import generate
from riemannian_graph_ode.metrics import evaluate, mape, metric_report, rmse
from riemannian_graph_ode.models import ModelConfig
from riemannian_graph_ode.pipeline import GraphODEModel


class TestMetrics:
    def test_perfect_prediction(self):
        y = np.array([[1.0, -2.0], [0.5, 3.0]])
        assert mape(y, y) == 0.0
        assert rmse(y, y) == 0.0

    def test_zero_predictor_against_unit_targets(self):
        assert mape(np.zeros(4), np.ones(4)) == pytest.approx(100.0)
        assert rmse(np.zeros(4), np.ones(4)) == pytest.approx(1.0)

    def test_zero_target_uses_floor(self):
        assert mape(np.array([1e-8]), np.array([0.0])) == pytest.approx(100.0)

    def test_report_flattens_all_steps(self):
        report = metric_report([np.zeros((2, 2)), np.ones((2, 2))], [np.ones((2, 2)), np.ones((2, 2))], horizon=2)
        assert report.mape == pytest.approx(50.0)
        assert report.rmse == pytest.approx(np.sqrt(0.5))
        assert report.horizon == 2


class TestEvaluate:
    def setup_method(self):
        self.dataset = generate("hyperbolic_diffusion", 5, 6, seed=7)
        self.model = GraphODEModel(ModelConfig(d=4, time_dim=4, base_step=0.05), feature_dim=16, seed=0)

    def test_report_has_both_rows(self):
        report = evaluate(self.model, self.dataset, horizon=2)
        assert report.model.horizon == 2
        assert report.model.rmse > 0.0
        lines = report.to_csv().splitlines()
        assert lines[0] == "predictor,mape,rmse,horizon"
        assert lines[1].startswith("model,")
        assert lines[2].startswith("persistence,")

    def test_persistence_baseline(self):
        report = evaluate(self.model, self.dataset, horizon=1)
        sequence = ingest(self.dataset).sequences[0]
        expected = rmse(sequence[2].raw, sequence[3].raw)
        assert report.persistence.rmse == pytest.approx(expected)

    def test_deterministic(self):
        first = evaluate(self.model, self.dataset, horizon=3)
        second = evaluate(self.model, self.dataset, horizon=3)
        assert first == second

    def test_horizon_beyond_data(self):
        with pytest.raises(ManifoldDomainError):
            evaluate(self.model, self.dataset, horizon=4)
