"""Forecast metrics in raw feature space and the persistence baseline."""

import logging
from typing import List, Sequence, Union

import numpy as np

from . import autograd as ag
from .datasets import IngestedDataset, ingest
from .models import EvaluationReport, MetricReport, TrajectoryDataset
from .pipeline import GraphODEModel

logger = logging.getLogger(__name__)

MAPE_FLOOR = 1e-8


def mape(predicted, target, floor: float = MAPE_FLOOR) -> float:
    """100 · mean(|y − ŷ| / max(|y|, floor)) with y the target."""
    predicted, target = np.asarray(predicted, dtype=np.float64), np.asarray(target, dtype=np.float64)
    return float(100.0 * np.mean(np.abs(target - predicted) / np.maximum(np.abs(target), floor)))


def rmse(predicted, target) -> float:
    predicted, target = np.asarray(predicted, dtype=np.float64), np.asarray(target, dtype=np.float64)
    return float(np.sqrt(np.mean((target - predicted) ** 2)))


def metric_report(predicted: Sequence[np.ndarray], target: Sequence[np.ndarray], horizon: int) -> MetricReport:
    """Element-wise metrics over every node, feature and horizon step."""
    predicted = np.concatenate([np.ravel(p) for p in predicted])
    target = np.concatenate([np.ravel(t) for t in target])
    return MetricReport(mape=mape(predicted, target), rmse=rmse(predicted, target), horizon=horizon)


def evaluate(model: GraphODEModel, dataset: Union[IngestedDataset, TrajectoryDataset], horizon: int) -> EvaluationReport:
    """
    Score ``horizon`` forecast steps per sequence against held-out raw features.

    Predictions are mapped back to raw space with Log_o. The persistence
    baseline repeats the last observed raw features and is scored the same way.
    """
    if isinstance(dataset, TrajectoryDataset):
        dataset = ingest(dataset, model.config.kappa)
    predicted: List[np.ndarray] = []
    persisted: List[np.ndarray] = []
    target: List[np.ndarray] = []
    for sequence in dataset.sequences:
        forecast = model.predict(sequence, horizon)
        observed, held_out = model.split(sequence)
        for decoded, snapshot in zip(forecast.decoded, held_out[:horizon]):
            predicted.append(np.asarray(model.manifold.log0(ag.value(decoded))))
            persisted.append(observed[-1].raw)
            target.append(snapshot.raw)
    report = EvaluationReport(
        model=metric_report(predicted, target, horizon),
        persistence=metric_report(persisted, target, horizon),
    )
    logger.info(
        "evaluation over %d sequence(s), horizon %d: model MAPE %.3f RMSE %.5f, persistence MAPE %.3f RMSE %.5f",
        len(dataset.sequences), horizon, report.model.mape, report.model.rmse,
        report.persistence.mape, report.persistence.rmse,
    )
    return report
