"""
Riemannian graph ODE - trajectory prediction for interacting objects on
constant-curvature manifolds.

Node states live in the κ-stereographic model and evolve under a learned
graph-attention vector field; edge weights evolve jointly under a constrained
Ricci flow whose von Neumann entropy is audited for monotonicity.

Main components:
- Stereographic: gyrovector operations, maps and neural operators on 𝔖^d_κ
- GraphODEModel: encoder, coupled integrator and decoder with checkpoints
- Trainer: reverse-mode gradients, Adam and the training loop
- Curvature / entropy: Forman-Ricci curvature, flows and entropy audits
- Models: Pydantic models for configuration, datasets and reports
"""

from .curvature import canonical_flow_rhs, constrained_flow_rhs, forman_curvature
from .datasets import ingest, load_dataset, save_dataset
from .dynamics import CoupledDynamics, SystemState, simulate_flow_only
from .entropy import audit, von_neumann_entropy
from .errors import (
    ChartOverflowError,
    ContractViolationError,
    DatasetParseError,
    DegenerateAggregationError,
    EigenSolverError,
    ManifoldDomainError,
    NumericError,
    RiemannianODEError,
    SingularityError,
)
from .generators import generate
from .geometry import LorentzPoint, Stereographic
from .learning import AdamState, Trainer, adam_step, grad, loss, train
from .metrics import evaluate
from .models import (
    Ablation,
    ModelConfig,
    MonotonicityReport,
    Objective,
    SystemKind,
    TrajectoryDataset,
    WeightedGraph,
)
from .network import ModelParams
from .pipeline import GraphODEModel

__version__ = "0.1.0"
__all__ = [
    "Stereographic",
    "LorentzPoint",
    "GraphODEModel",
    "ModelParams",
    "CoupledDynamics",
    "SystemState",
    "Trainer",
    "AdamState",
    "adam_step",
    "grad",
    "loss",
    "train",
    "forman_curvature",
    "canonical_flow_rhs",
    "constrained_flow_rhs",
    "simulate_flow_only",
    "audit",
    "von_neumann_entropy",
    "generate",
    "evaluate",
    "ingest",
    "load_dataset",
    "save_dataset",
    "Ablation",
    "ModelConfig",
    "MonotonicityReport",
    "Objective",
    "SystemKind",
    "TrajectoryDataset",
    "WeightedGraph",
    "RiemannianODEError",
    "ManifoldDomainError",
    "SingularityError",
    "ChartOverflowError",
    "DegenerateAggregationError",
    "ContractViolationError",
    "EigenSolverError",
    "NumericError",
    "DatasetParseError",
]
