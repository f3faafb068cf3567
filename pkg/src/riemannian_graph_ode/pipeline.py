"""The end-to-end model: encode an observed window, integrate, decode."""

import logging
import math
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from . import autograd as ag
from .datasets import IngestedSnapshot
from .dynamics import CoupledDynamics, SystemState
from .errors import ManifoldDomainError
from .geometry import Stereographic
from .models import Ablation, CheckpointDocument, ModelConfig
from .network import InitialState, ModelParams, decode, encode_initial_state, init_params

logger = logging.getLogger(__name__)


def observed_count(length: int, split_ratio: float) -> int:
    """Snapshots in the observed window: ceil(ratio · length), at least one."""
    return max(1, math.ceil(split_ratio * length - 1e-9))


class Forecast(NamedTuple):
    initial: InitialState
    states: List[SystemState]
    decoded: List[ag.Value]


class GraphODEModel:
    def __init__(self, config: ModelConfig, feature_dim: int, seed: int = 0, params: Optional[ModelParams] = None):
        self.config = config
        self.feature_dim = feature_dim
        self.seed = seed
        self.params = params if params is not None else init_params(config, feature_dim, seed)
        self.manifold = Stereographic(config.kappa)

    @property
    def uses_gyro(self) -> bool:
        return self.config.ablation != Ablation.WO_GYR

    def forecast(self, observed: Sequence[IngestedSnapshot], times: Sequence[float],
                 params: Optional[ModelParams] = None) -> Forecast:
        """Encode ``observed`` and return latent states and decoded points at ``times``."""
        params = params if params is not None else self.params
        if not observed:
            raise ManifoldDomainError("forecast needs at least one observed snapshot")
        initial = encode_initial_state(
            [s.points for s in observed],
            [s.graph for s in observed],
            [s.t for s in observed],
            params,
            self.manifold,
            self.config,
        )
        dynamics = CoupledDynamics(params, self.manifold, initial.sources, initial.targets, self.config)
        start = SystemState(t=observed[-1].t, Z=initial.Z0, w=initial.w0)
        states = dynamics.integrate(start, times)
        decoded = [decode(state.Z, params, self.manifold, self.uses_gyro) for state in states]
        return Forecast(initial=initial, states=states, decoded=decoded)

    def split(self, sequence: Sequence[IngestedSnapshot]) -> Tuple[List[IngestedSnapshot], List[IngestedSnapshot]]:
        k = observed_count(len(sequence), self.config.split_ratio)
        return list(sequence[:k]), list(sequence[k:])

    def predict(self, sequence: Sequence[IngestedSnapshot], horizon: int,
                params: Optional[ModelParams] = None) -> Forecast:
        """Forecast the ``horizon`` snapshots following the observed window."""
        observed, held_out = self.split(sequence)
        if horizon < 1 or horizon > len(held_out):
            raise ManifoldDomainError(
                f"horizon {horizon} needs 1..{len(held_out)} snapshots after the observed window"
            )
        return self.forecast(observed, [s.t for s in held_out[:horizon]], params)

    # ---------------------------------------------------------- checkpoint

    def to_document(self) -> CheckpointDocument:
        return CheckpointDocument(
            config=self.config.model_dump(mode="json", by_alias=True),
            seed=self.seed,
            feature_dim=self.feature_dim,
            params=self.params.to_document(),
        )

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_document().model_dump_json(indent=2) + "\n")
        logger.info("saved model checkpoint to %s", path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "GraphODEModel":
        document = CheckpointDocument.model_validate_json(Path(path).read_text())
        config = ModelConfig.model_validate(document.config)
        params = ModelParams.from_document(document.params)
        return cls(config, document.feature_dim, seed=document.seed, params=params)

    def parameter_count(self) -> int:
        return int(sum(np.size(ag.value(v)) for _, v in self.params.named_arrays()))
