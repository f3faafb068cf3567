import json
import math
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import networkx as nx
import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

EDGE_BOUND_SLACK = 1e-3


class Ablation(str, Enum):
    NONE = "none"
    WO_EVO = "woEvo"
    WO_RIC = "woRic"
    WO_CON = "woCon"
    WO_GYR = "woGyr"


class GatAttention(str, Enum):
    FLOW_WEIGHTS = "flow_weights"
    LEARNED = "learned"


class WeightUpdate(str, Enum):
    LOG_SPACE = "log_space"
    EULER = "euler"


class FlowMode(str, Enum):
    CONSTRAINED = "constrained"
    CANONICAL = "canonical"


class SystemKind(str, Enum):
    SPHERICAL_FLOCK = "spherical_flock"
    HYPERBOLIC_DIFFUSION = "hyperbolic_diffusion"
    HEAT_GRAPH = "heat_graph"


Edge = Tuple[int, int, float]


class WeightedGraph(BaseModel):
    """Undirected graph with strictly positive edge weights, each edge stored once with i < j."""

    n: int = Field(..., ge=1, description="Number of nodes")
    edges: List[Edge] = Field(default_factory=list, description="Edges as (i, j, weight) with i < j")

    @model_validator(mode="after")
    def _check_edges(self) -> "WeightedGraph":
        seen = set()
        for i, j, w in self.edges:
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (0 <= i < j < self.n):
                raise ValueError(f"edge ({i}, {j}) must satisfy 0 <= i < j < n={self.n}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            if not (w > 0.0 and math.isfinite(w)):
                raise ValueError(f"edge ({i}, {j}) has non-positive weight {w}")
            seen.add((i, j))
        return self

    @classmethod
    def from_arrays(cls, n: int, sources: np.ndarray, targets: np.ndarray, weights: np.ndarray) -> "WeightedGraph":
        edges = [(int(i), int(j), float(w)) for i, j, w in zip(sources, targets, weights)]
        return cls(n=n, edges=edges)

    @classmethod
    def from_adjacency(cls, adjacency: np.ndarray) -> "WeightedGraph":
        adjacency = np.asarray(adjacency, dtype=np.float64)
        i, j = np.nonzero(np.triu(adjacency, k=1))
        return cls.from_arrays(adjacency.shape[0], i, j, adjacency[i, j])

    @classmethod
    def from_networkx(cls, graph: nx.Graph, weight: str = "weight") -> "WeightedGraph":
        nodes = sorted(graph.nodes())
        index = {node: k for k, node in enumerate(nodes)}
        edges = []
        for u, v, data in graph.edges(data=True):
            i, j = sorted((index[u], index[v]))
            edges.append((i, j, float(data.get(weight, 1.0))))
        return cls(n=len(nodes), edges=sorted(edges))

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def sources(self) -> np.ndarray:
        return np.array([e[0] for e in self.edges], dtype=np.int64)

    @property
    def targets(self) -> np.ndarray:
        return np.array([e[1] for e in self.edges], dtype=np.int64)

    @property
    def weights(self) -> np.ndarray:
        return np.array([e[2] for e in self.edges], dtype=np.float64)

    def topology(self) -> Tuple[Tuple[int, int], ...]:
        return tuple((i, j) for i, j, _ in self.edges)

    def same_topology(self, other: "WeightedGraph") -> bool:
        return self.n == other.n and self.topology() == other.topology()

    def with_weights(self, weights: np.ndarray) -> "WeightedGraph":
        return WeightedGraph.from_arrays(self.n, self.sources, self.targets, np.asarray(weights, dtype=np.float64))

    def scaled(self, factor: float) -> "WeightedGraph":
        return self.with_weights(self.weights * factor)

    def relabeled(self, permutation: np.ndarray) -> "WeightedGraph":
        """Node k of this graph becomes node permutation[k]."""
        edges = []
        for i, j, w in self.edges:
            a, b = sorted((int(permutation[i]), int(permutation[j])))
            edges.append((a, b, w))
        return WeightedGraph(n=self.n, edges=sorted(edges))

    def adjacency(self) -> np.ndarray:
        matrix = np.zeros((self.n, self.n), dtype=np.float64)
        if self.edges:
            matrix[self.sources, self.targets] = self.weights
            matrix[self.targets, self.sources] = self.weights
        return matrix

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        graph.add_weighted_edges_from(self.edges)
        return graph


class IntegratorConfig(BaseModel):
    base_step: float = Field(default=0.01, gt=0.0, description="Largest substep of the chart Euler scheme")
    max_substeps: int = Field(default=8, ge=0, description="Maximum number of substep halvings on chart overflow")
    scheme: Literal["chart_euler"] = Field(default="chart_euler", description="Integration scheme")


class ModelConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, use_enum_values=False)

    dim: int = Field(default=16, ge=2, alias="d", description="Latent manifold dimension")
    time_dim: int = Field(default=16, ge=2, description="Width of the sinusoidal time encoding (even)")
    encoder_layers: int = Field(default=1, ge=1, description="Manifold GCN layers per snapshot")
    gat_layers: int = Field(default=2, ge=1, description="Graph attention layers in the vector field")
    mlp_hidden: int = Field(default=1, ge=1, description="Hidden layers of the constraint MLP")
    lr: float = Field(default=5e-4, ge=0.0, description="Adam learning rate")
    kappa: float = Field(default=-1.0, description="Curvature of the latent manifold")
    base_step: float = Field(default=0.01, gt=0.0, description="Largest integration substep")
    max_halvings: int = Field(default=8, ge=0, description="Substep halvings allowed on chart overflow")
    epochs: int = Field(default=200, ge=0, description="Training epochs")
    split_ratio: float = Field(default=0.5, gt=0.0, lt=1.0, description="Fraction of a sequence used as observation")
    ablation: Ablation = Field(default=Ablation.NONE, description="Model variant")
    gat_attention: GatAttention = Field(default=GatAttention.FLOW_WEIGHTS, description="Vector-field aggregation coefficients")
    dense_init: bool = Field(default=False, description="Initial-weight softmax over all nodes instead of neighbours")
    weight_update: WeightUpdate = Field(default=WeightUpdate.LOG_SPACE, description="Edge-weight update rule")
    log_level: str = Field(default="INFO", description="Logging level")

    @field_validator("time_dim")
    @classmethod
    def _even_time_dim(cls, value: int) -> int:
        if value % 2:
            raise ValueError("time_dim must be even")
        return value

    @field_validator("kappa")
    @classmethod
    def _finite_kappa(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("kappa must be finite")
        return value

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(base_step=self.base_step, max_substeps=self.max_halvings)

    @classmethod
    def from_env(cls, env_file: Optional[str] = None) -> "ModelConfig":
        """
        Create ModelConfig from environment variables.

        Args:
            env_file: Path to .env file. If None, uses default .env file

        Returns:
            ModelConfig instance with values from environment variables
        """
        load_dotenv(env_file)

        config_data = {
            "dim": int(os.getenv("RGODE_DIM", "16")),
            "time_dim": int(os.getenv("RGODE_TIME_DIM", "16")),
            "encoder_layers": int(os.getenv("RGODE_ENCODER_LAYERS", "1")),
            "gat_layers": int(os.getenv("RGODE_GAT_LAYERS", "2")),
            "mlp_hidden": int(os.getenv("RGODE_MLP_HIDDEN", "1")),
            "lr": float(os.getenv("RGODE_LR", "5e-4")),
            "kappa": float(os.getenv("RGODE_KAPPA", "-1.0")),
            "base_step": float(os.getenv("RGODE_BASE_STEP", "0.01")),
            "max_halvings": int(os.getenv("RGODE_MAX_HALVINGS", "8")),
            "epochs": int(os.getenv("RGODE_EPOCHS", "200")),
            "split_ratio": float(os.getenv("RGODE_SPLIT_RATIO", "0.5")),
            "ablation": os.getenv("RGODE_ABLATION", "none"),
            "gat_attention": os.getenv("RGODE_GAT_ATTENTION", "flow_weights"),
            "dense_init": os.getenv("RGODE_DENSE_INIT", "false"),
            "weight_update": os.getenv("RGODE_WEIGHT_UPDATE", "log_space"),
            "log_level": os.getenv("LOG_LEVEL", "INFO"),
        }
        return cls(**config_data)

    def update_from_env(self, env_file: Optional[str] = None) -> "ModelConfig":
        """Overwrite fields with the values found in the environment."""
        env_config = self.from_env(env_file)
        for field_name, field_value in env_config.model_dump().items():
            if field_value is not None:
                setattr(self, field_name, field_value)
        return self

    @classmethod
    def from_file(cls, path: Union[str, Path], base: Optional["ModelConfig"] = None) -> "ModelConfig":
        """Load a JSON config file; keys it omits keep the values of ``base`` (or the defaults)."""
        data = json.loads(Path(path).read_text())
        if not isinstance(data, dict):
            raise ValueError(f"config file {path} must hold a JSON object")
        if "dim" in data:
            data["d"] = data.pop("dim")
        merged = (base or cls()).model_dump(by_alias=True)
        merged.update(data)
        return cls.model_validate(merged)

    def with_overrides(self, **overrides: Any) -> "ModelConfig":
        """Return a copy with every non-None override applied and validated."""
        data = self.model_dump()
        data.update({key: value for key, value in overrides.items() if value is not None})
        return ModelConfig.model_validate(data)

    def to_env_template(self) -> str:
        """
        Generate a .env template with current configuration values.

        Returns:
            String containing .env template
        """
        return f"""# Riemannian graph ODE configuration

# Model
RGODE_DIM={self.dim}
RGODE_TIME_DIM={self.time_dim}
RGODE_ENCODER_LAYERS={self.encoder_layers}
RGODE_GAT_LAYERS={self.gat_layers}
RGODE_MLP_HIDDEN={self.mlp_hidden}
RGODE_KAPPA={self.kappa}
RGODE_ABLATION={self.ablation.value}
RGODE_GAT_ATTENTION={self.gat_attention.value}
RGODE_DENSE_INIT={str(self.dense_init).lower()}

# Training and integration
RGODE_LR={self.lr}
RGODE_EPOCHS={self.epochs}
RGODE_BASE_STEP={self.base_step}
RGODE_MAX_HALVINGS={self.max_halvings}
RGODE_WEIGHT_UPDATE={self.weight_update.value}
RGODE_SPLIT_RATIO={self.split_ratio}

# Logging
LOG_LEVEL={self.log_level}
"""


class SnapshotRecord(BaseModel):
    t: float = Field(..., description="Timestamp")
    features: List[List[float]] = Field(..., description="Raw node features, one row per node")
    edges: List[Edge] = Field(default_factory=list, description="Weighted undirected edges (i, j, w) with i < j")

    @field_validator("t")
    @classmethod
    def _finite_time(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("timestamp must be finite")
        return value

    def graph(self) -> WeightedGraph:
        return WeightedGraph(n=len(self.features), edges=self.edges)

    def feature_array(self) -> np.ndarray:
        return np.asarray(self.features, dtype=np.float64)


class TrajectoryDataset(BaseModel):
    name: str = Field(..., description="Dataset name")
    kappa: float = Field(..., description="Curvature the features are meant for")
    feature_dim: int = Field(..., ge=1, description="Raw feature width")
    num_nodes: int = Field(..., ge=1, description="Objects per snapshot")
    sequences: List[List[SnapshotRecord]] = Field(default_factory=list, description="Snapshot sequences")

    @model_validator(mode="after")
    def _check_sequences(self) -> "TrajectoryDataset":
        for s, sequence in enumerate(self.sequences):
            for k, snapshot in enumerate(sequence):
                if len(snapshot.features) != self.num_nodes:
                    raise ValueError(f"sequences[{s}][{k}] has {len(snapshot.features)} nodes, expected {self.num_nodes}")
                if any(len(row) != self.feature_dim for row in snapshot.features):
                    raise ValueError(f"sequences[{s}][{k}] has a feature row of the wrong width")
                snapshot.graph()
                if k and snapshot.t <= sequence[k - 1].t:
                    raise ValueError(f"sequences[{s}] timestamps must be strictly increasing (index {k})")
        return self


class MonotonicityReport(BaseModel):
    series: List[Tuple[float, float]] = Field(default_factory=list, description="(t, entropy) per snapshot")
    violations: List[Tuple[float, float]] = Field(default_factory=list, description="(t, delta) where delta < -tol")
    tol: float = Field(default=1e-6, ge=0.0, description="Allowed per-step decrease")

    @computed_field
    @property
    def verdict(self) -> bool:
        return not self.violations

    def to_csv(self) -> str:
        lines = ["t,entropy,delta,violation"]
        previous = None
        for t, h in self.series:
            if previous is None:
                lines.append(f"{t!r},{h!r},,false")
            else:
                delta = h - previous
                lines.append(f"{t!r},{h!r},{delta!r},{'true' if delta < -self.tol else 'false'}")
            previous = h
        lines.append(f"# verdict: {'true' if self.verdict else 'false'}")
        return "\n".join(lines) + "\n"


class CurvatureDiagnostics(BaseModel):
    n: int
    m: int
    ricci_total: float = Field(..., description="Sum of edge curvatures")
    ricci_rate: float = Field(..., description="Time derivative of the curvature sum along the flow")
    neighbor_sum_total: float = Field(..., description="Sum over edges of the neighbour ratio sums g(e)")
    edge_count_bound: float = Field(..., description="(m - n) / 2")

    @property
    def meets_edge_bound(self) -> bool:
        """Whether ricci_rate reaches (m − n)/2 within 1e-3; uniform weights on K4 already miss it."""
        return self.ricci_rate >= self.edge_count_bound - EDGE_BOUND_SLACK


class Objective(BaseModel):
    total: float = Field(..., ge=0.0)
    position_term: float = Field(..., ge=0.0)
    weight_term: float = Field(..., ge=0.0)

    @model_validator(mode="after")
    def _check_total(self) -> "Objective":
        if abs(self.total - (self.position_term + self.weight_term)) > 1e-9 * max(1.0, self.total):
            raise ValueError("total must equal position_term + weight_term")
        return self


class EpochLog(BaseModel):
    epoch: int
    total_loss: float
    position_term: float
    weight_term: float
    wall_ms: float

    def csv_row(self) -> str:
        return f"{self.epoch},{self.total_loss!r},{self.position_term!r},{self.weight_term!r},{self.wall_ms:.3f}"


TRAINING_LOG_HEADER = "epoch,total_loss,position_term,weight_term,wall_ms"


class MetricReport(BaseModel):
    mape: float = Field(..., ge=0.0, description="Mean absolute percentage error (percent)")
    rmse: float = Field(..., ge=0.0, description="Root mean square error")
    horizon: int = Field(..., ge=1, description="Predicted snapshots per sequence")


class EvaluationReport(BaseModel):
    model: MetricReport
    persistence: MetricReport

    def to_csv(self) -> str:
        rows = ["predictor,mape,rmse,horizon"]
        for name, report in (("model", self.model), ("persistence", self.persistence)):
            rows.append(f"{name},{report.mape!r},{report.rmse!r},{report.horizon}")
        return "\n".join(rows) + "\n"


class CheckResult(BaseModel):
    name: str
    passed: bool
    worst: float = Field(..., description="Largest observed error for the property")
    threshold: float
    detail: str = ""


class FlowSuiteResult(BaseModel):
    constrained_verdicts: List[bool] = Field(default_factory=list)
    constrained_drawdowns: List[float] = Field(default_factory=list)
    canonical_drawdowns: List[float] = Field(default_factory=list)
    diagnostics: List[CurvatureDiagnostics] = Field(default_factory=list)

    @property
    def all_constrained_pass(self) -> bool:
        return all(self.constrained_verdicts)

    @property
    def constrained_failures(self) -> int:
        return sum(1 for verdict in self.constrained_verdicts if not verdict)

    @property
    def failing_graphs(self) -> List[int]:
        return [k for k, verdict in enumerate(self.constrained_verdicts) if not verdict]

    @property
    def edge_bound_misses(self) -> List[int]:
        """Graphs whose curvature-sum rate falls below (m − n)/2 by more than the slack."""
        return [k for k, d in enumerate(self.diagnostics) if not d.meets_edge_bound]

    @property
    def canonical_counterexample(self) -> Optional[int]:
        """Index of the first graph whose canonical-flow entropy drops by more than 1e-4."""
        for k, drop in enumerate(self.canonical_drawdowns):
            if drop > 1e-4:
                return k
        return None


class CheckpointDocument(BaseModel):
    config: Dict[str, Any]
    seed: int
    feature_dim: int
    params: Dict[str, Any]
