import json

import numpy as np
import pytest
from pydantic import ValidationError

from riemannian_graph_ode.models import (
    Ablation,
    EpochLog,
    GatAttention,
    ModelConfig,
    MonotonicityReport,
    Objective,
    SnapshotRecord,
    TrajectoryDataset,
    WeightedGraph,
    WeightUpdate,
)


class TestWeightedGraph:
    def test_graph_creation(self):
        graph = WeightedGraph(n=3, edges=[(0, 1, 1.0), (1, 2, 0.5)])

        assert graph.m == 2
        np.testing.assert_array_equal(graph.sources, [0, 1])
        np.testing.assert_array_equal(graph.targets, [1, 2])
        np.testing.assert_array_equal(graph.weights, [1.0, 0.5])
        assert graph.topology() == ((0, 1), (1, 2))

    @pytest.mark.parametrize("edges", [
        [(0, 0, 1.0)],
        [(1, 0, 1.0)],
        [(0, 3, 1.0)],
        [(0, 1, 1.0), (0, 1, 2.0)],
        [(0, 1, 0.0)],
        [(0, 1, float("nan"))],
    ])
    def test_invalid_edges(self, edges):
        with pytest.raises(ValidationError):
            WeightedGraph(n=3, edges=edges)

    def test_adjacency_round_trip(self):
        graph = WeightedGraph(n=4, edges=[(0, 2, 1.5), (1, 3, 0.25)])
        adjacency = graph.adjacency()
        np.testing.assert_array_equal(adjacency, adjacency.T)
        assert WeightedGraph.from_adjacency(adjacency) == graph

    def test_networkx_round_trip(self):
        graph = WeightedGraph(n=3, edges=[(0, 1, 2.0), (1, 2, 3.0)])
        assert WeightedGraph.from_networkx(graph.to_networkx()) == graph

    def test_relabeling(self):
        graph = WeightedGraph(n=3, edges=[(0, 1, 2.0), (1, 2, 3.0)])
        relabeled = graph.relabeled(np.array([2, 0, 1]))
        assert relabeled.edges == [(0, 1, 3.0), (0, 2, 2.0)]

    def test_with_weights_keeps_topology(self):
        graph = WeightedGraph(n=3, edges=[(0, 1, 2.0), (1, 2, 3.0)])
        other = graph.with_weights(np.array([0.1, 0.2]))
        assert other.same_topology(graph)
        assert other.edges == [(0, 1, 0.1), (1, 2, 0.2)]


class TestModelConfig:
    def test_defaults(self):
        config = ModelConfig()

        assert config.dim == 16
        assert config.gat_layers == 2
        assert config.mlp_hidden == 1
        assert config.lr == 5e-4
        assert config.kappa == -1.0
        assert config.split_ratio == 0.5
        assert config.ablation == Ablation.NONE
        assert config.gat_attention == GatAttention.FLOW_WEIGHTS
        assert config.weight_update == WeightUpdate.LOG_SPACE

    def test_alias_and_validation(self):
        assert ModelConfig(d=8).dim == 8
        assert ModelConfig(dim=8).dim == 8
        with pytest.raises(ValidationError):
            ModelConfig(time_dim=5)
        with pytest.raises(ValidationError):
            ModelConfig(kappa=float("inf"))
        with pytest.raises(ValidationError):
            ModelConfig(split_ratio=1.0)
        with pytest.raises(ValidationError):
            ModelConfig(ablation="woEverything")

    def test_ablation_values(self):
        assert Ablation("woEvo") == Ablation.WO_EVO
        assert [a.value for a in Ablation] == ["none", "woEvo", "woRic", "woCon", "woGyr"]

    def test_from_env(self, monkeypatch):
        monkeypatch.setenv("RGODE_DIM", "8")
        monkeypatch.setenv("RGODE_KAPPA", "1.0")
        monkeypatch.setenv("RGODE_ABLATION", "woGyr")
        config = ModelConfig.from_env()

        assert config.dim == 8
        assert config.kappa == 1.0
        assert config.ablation == Ablation.WO_GYR

    def test_update_from_env(self, monkeypatch):
        monkeypatch.setenv("RGODE_EPOCHS", "7")
        config = ModelConfig(d=8)

        assert config.update_from_env() is config
        assert config.epochs == 7

    def test_from_env_reads_every_field(self, monkeypatch):
        config = ModelConfig(d=8, encoder_layers=3, gat_attention="learned", dense_init=True,
                             weight_update="euler", max_halvings=2, base_step=0.02, ablation="woGyr")
        for line in config.to_env_template().splitlines():
            if line and not line.startswith("#"):
                key, value = line.split("=", 1)
                monkeypatch.setenv(key, value)

        loaded = ModelConfig.from_env()
        assert loaded == config
        assert loaded.integrator().max_substeps == 2

    def test_from_file_merges_over_base(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"d": 4, "epochs": 3}))
        config = ModelConfig.from_file(path, base=ModelConfig(lr=0.01))

        assert config.dim == 4
        assert config.epochs == 3
        assert config.lr == 0.01

    def test_from_file_rejects_non_object(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("[1, 2]")
        with pytest.raises(ValueError):
            ModelConfig.from_file(path)

    def test_overrides_skip_none(self):
        config = ModelConfig().with_overrides(lr=0.1, epochs=None)
        assert config.lr == 0.1
        assert config.epochs == 200

    def test_env_template(self):
        template = ModelConfig(d=8).to_env_template()
        assert "RGODE_DIM=8" in template
        assert "RGODE_ABLATION=none" in template
        assert "LOG_LEVEL=INFO" in template


class TestDatasetRecords:
    def test_snapshot_record(self):
        record = SnapshotRecord(t=0.5, features=[[1.0, 2.0], [3.0, 4.0]], edges=[(0, 1, 1.0)])
        assert record.graph().n == 2
        assert record.feature_array().shape == (2, 2)
        with pytest.raises(ValidationError):
            SnapshotRecord(t=float("inf"), features=[[1.0]])

    def test_dataset_validation(self):
        snapshot = SnapshotRecord(t=0.0, features=[[0.0], [1.0]], edges=[(0, 1, 1.0)])
        TrajectoryDataset(name="ok", kappa=-1.0, feature_dim=1, num_nodes=2, sequences=[[snapshot]])
        with pytest.raises(ValidationError):
            TrajectoryDataset(name="nodes", kappa=-1.0, feature_dim=1, num_nodes=3, sequences=[[snapshot]])
        with pytest.raises(ValidationError):
            TrajectoryDataset(name="order", kappa=-1.0, feature_dim=1, num_nodes=2, sequences=[[snapshot, snapshot]])


class TestReports:
    def test_monotonicity_verdict(self):
        assert MonotonicityReport(series=[(0.0, 1.0)]).verdict
        report = MonotonicityReport(series=[(0.0, 1.0), (1.0, 0.0)], violations=[(1.0, -1.0)])
        assert not report.verdict
        assert report.model_dump()["verdict"] is False

    def test_objective_invariant(self):
        objective = Objective(total=3.0, position_term=1.0, weight_term=2.0)
        assert objective.total == 3.0
        with pytest.raises(ValidationError):
            Objective(total=4.0, position_term=1.0, weight_term=2.0)
        with pytest.raises(ValidationError):
            Objective(total=-1.0, position_term=-1.0, weight_term=0.0)

    def test_epoch_log_row(self):
        entry = EpochLog(epoch=3, total_loss=0.5, position_term=0.25, weight_term=0.25, wall_ms=12.3456)
        assert entry.csv_row() == "3,0.5,0.25,0.25,12.346"
