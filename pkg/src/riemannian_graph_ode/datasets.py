"""
Dataset files and ingestion.

Files hold a ``TrajectoryDataset`` as JSON. Ingestion maps every raw feature
row x (read as a tangent vector at the origin) to Exp_o(x) on the model's
manifold and keeps the raw rows for metrics.
"""

import json
import logging
from pathlib import Path
from typing import List, NamedTuple, Optional, Union

import numpy as np
from pydantic import ValidationError

from .errors import DatasetParseError
from .geometry import Stereographic
from .models import TrajectoryDataset, WeightedGraph

logger = logging.getLogger(__name__)


class IngestedSnapshot(NamedTuple):
    t: float
    points: np.ndarray
    raw: np.ndarray
    graph: WeightedGraph


class IngestedDataset(NamedTuple):
    name: str
    kappa: float
    feature_dim: int
    num_nodes: int
    sequences: List[List[IngestedSnapshot]]


def _field_path(location) -> str:
    parts = []
    for item in location:
        if isinstance(item, int):
            parts.append(f"[{item}]")
        else:
            parts.append(("." if parts else "") + str(item))
    return "".join(parts)


def parse_dataset(text: str) -> TrajectoryDataset:
    """Validate a JSON document against the dataset schema."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise DatasetParseError(f"invalid JSON: {e.msg}", line=e.lineno) from e
    try:
        return TrajectoryDataset.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        raise DatasetParseError(first["msg"], field=_field_path(first["loc"]) or None) from e


def load_dataset(path: Union[str, Path]) -> TrajectoryDataset:
    return parse_dataset(Path(path).read_text())


def dump_dataset(dataset: TrajectoryDataset) -> str:
    return dataset.model_dump_json(indent=2) + "\n"


def save_dataset(dataset: TrajectoryDataset, path: Union[str, Path]) -> None:
    Path(path).write_text(dump_dataset(dataset))
    logger.info("saved dataset %s (%d sequences) to %s", dataset.name, len(dataset.sequences), path)


def ingest(dataset: TrajectoryDataset, kappa: Optional[float] = None) -> IngestedDataset:
    """Map raw features onto 𝔖_κ (κ defaults to the dataset's own curvature)."""
    kappa = dataset.kappa if kappa is None else kappa
    manifold = Stereographic(kappa)
    sequences = []
    for sequence in dataset.sequences:
        ingested = []
        for snapshot in sequence:
            raw = snapshot.feature_array()
            points = manifold.project_to_domain(manifold.exp0(raw))
            ingested.append(IngestedSnapshot(t=snapshot.t, points=points, raw=raw, graph=snapshot.graph()))
        sequences.append(ingested)
    return IngestedDataset(
        name=dataset.name,
        kappa=kappa,
        feature_dim=dataset.feature_dim,
        num_nodes=dataset.num_nodes,
        sequences=sequences,
    )
