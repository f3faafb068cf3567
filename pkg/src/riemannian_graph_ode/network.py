"""
Learnable components of the graph ODE: time encoding, temporal attention,
manifold GCN encoder, GAT vector field, constraint MLP and decoder.

Every forward function accepts parameters as plain arrays or as Tensors; the
training loop passes Tensors and differentiates through the same code.
"""

import logging
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from . import autograd as ag
from .errors import ManifoldDomainError
from .geometry import Stereographic
from .models import Ablation, GatAttention, ModelConfig, WeightedGraph

logger = logging.getLogger(__name__)


class ModelParams:
    """
    Ordered collection of named parameter arrays.

    Names: ``encoder_W[k]``, ``attn_w``, ``gat_layers[k].W``, ``gat_layers[k].a``,
    ``mlp.W1`` .. ``mlp.W{L+1}`` with biases ``mlp.b1`` .., and ``decoder_W``.
    """

    def __init__(self, arrays: Dict[str, ag.Value]):
        self.arrays = dict(arrays)

    def __getitem__(self, name: str) -> ag.Value:
        return self.arrays[name]

    def __len__(self) -> int:
        return len(self.arrays)

    @classmethod
    def from_named(cls, pairs) -> "ModelParams":
        return cls(dict(pairs))

    def named_arrays(self):
        return list(self.arrays.items())

    def map_arrays(self, fn: Callable[[str, ag.Value], ag.Value]) -> "ModelParams":
        return ModelParams({name: fn(name, value) for name, value in self.arrays.items()})

    def numpy(self) -> "ModelParams":
        return self.map_arrays(lambda _, value: np.array(ag.value(value), copy=True))

    def shapes(self) -> Dict[str, tuple]:
        return {name: np.shape(ag.value(value)) for name, value in self.arrays.items()}

    def _count(self, prefix: str) -> int:
        return sum(1 for name in self.arrays if name.startswith(prefix) and name.endswith(".W"))

    @property
    def encoder_W(self) -> List[ag.Value]:
        count = sum(1 for name in self.arrays if name.startswith("encoder_W["))
        return [self.arrays[f"encoder_W[{k}]"] for k in range(count)]

    @property
    def attn_w(self) -> ag.Value:
        return self.arrays["attn_w"]

    @property
    def gat_layers(self) -> List[Dict[str, ag.Value]]:
        count = self._count("gat_layers[")
        return [{"W": self.arrays[f"gat_layers[{k}].W"], "a": self.arrays[f"gat_layers[{k}].a"]} for k in range(count)]

    @property
    def mlp(self) -> List[Dict[str, ag.Value]]:
        count = sum(1 for name in self.arrays if name.startswith("mlp.W"))
        return [{"W": self.arrays[f"mlp.W{k}"], "b": self.arrays[f"mlp.b{k}"]} for k in range(1, count + 1)]

    @property
    def decoder_W(self) -> ag.Value:
        return self.arrays["decoder_W"]

    def to_document(self) -> Dict:
        """Nested JSON-ready form used by checkpoints."""
        params = self.numpy()
        return {
            "encoder_W": [w.tolist() for w in params.encoder_W],
            "attn_w": params.attn_w.tolist(),
            "gat_layers": [{"W": layer["W"].tolist(), "a": layer["a"].tolist()} for layer in params.gat_layers],
            "mlp": {
                name.split(".", 1)[1]: value.tolist()
                for name, value in params.arrays.items() if name.startswith("mlp.")
            },
            "decoder_W": params.decoder_W.tolist(),
        }

    @classmethod
    def from_document(cls, document: Dict) -> "ModelParams":
        arrays: Dict[str, ag.Value] = {}
        for k, w in enumerate(document["encoder_W"]):
            arrays[f"encoder_W[{k}]"] = np.asarray(w, dtype=np.float64)
        arrays["attn_w"] = np.asarray(document["attn_w"], dtype=np.float64)
        for k, layer in enumerate(document["gat_layers"]):
            arrays[f"gat_layers[{k}].W"] = np.asarray(layer["W"], dtype=np.float64)
            arrays[f"gat_layers[{k}].a"] = np.asarray(layer["a"], dtype=np.float64)
        layers = len(document["mlp"]) // 2
        for k in range(1, layers + 1):
            arrays[f"mlp.W{k}"] = np.asarray(document["mlp"][f"W{k}"], dtype=np.float64)
            arrays[f"mlp.b{k}"] = np.asarray(document["mlp"][f"b{k}"], dtype=np.float64)
        arrays["decoder_W"] = np.asarray(document["decoder_W"], dtype=np.float64)
        return cls(arrays)


class InitialState(NamedTuple):
    Z0: ag.Value
    w0: ag.Value
    P: ag.Value
    sources: np.ndarray
    targets: np.ndarray


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape or (fan_in, fan_out))


def init_params(config: ModelConfig, feature_dim: int, seed: int = 0) -> ModelParams:
    """Glorot-uniform matrices, zero attention vector and zero biases; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    d = config.dim
    arrays: Dict[str, ag.Value] = {}
    for k in range(config.encoder_layers):
        fan_in = feature_dim if k == 0 else d
        arrays[f"encoder_W[{k}]"] = glorot(rng, fan_in, d)
    arrays["attn_w"] = np.zeros(2 * config.time_dim)
    for k in range(config.gat_layers):
        arrays[f"gat_layers[{k}].W"] = glorot(rng, d, d)
        arrays[f"gat_layers[{k}].a"] = glorot(rng, 2 * d, 1, shape=(2 * d,))
    widths = [2 * d] + [d] * config.mlp_hidden + [1]
    for k in range(1, len(widths)):
        arrays[f"mlp.W{k}"] = glorot(rng, widths[k - 1], widths[k])
        arrays[f"mlp.b{k}"] = np.zeros(widths[k])
    arrays["decoder_W"] = glorot(rng, d, feature_dim)
    return ModelParams(arrays)


# ------------------------------------------------------------------ time

def time_encode(t, d_time: int) -> np.ndarray:
    """Sinusoidal encoding; a scalar gives (d_time,), an array of times gives (T, d_time)."""
    if d_time < 2 or d_time % 2:
        raise ManifoldDomainError("d_time must be even and at least 2")
    t = np.asarray(t, dtype=np.float64)
    divisors = 10000.0 ** (2.0 * np.arange(d_time // 2) / d_time)
    angles = t[..., None] / divisors
    encoding = np.empty(t.shape + (d_time,))
    encoding[..., 0::2] = np.sin(angles)
    encoding[..., 1::2] = np.cos(angles)
    return encoding


def temporal_attention(times: Sequence[float], t_initial: float, attn_w):
    """Softmax over observed times of attn_wᵀ[enc(t_i) ‖ enc(t_initial)]."""
    times = np.asarray(times, dtype=np.float64)
    if times.size == 0:
        raise ManifoldDomainError("temporal attention needs at least one timestamp")
    d_time = np.shape(ag.value(attn_w))[0] // 2
    encoded = time_encode(times, d_time)
    initial = np.broadcast_to(time_encode(t_initial, d_time), encoded.shape)
    logits = ag.matmul(np.concatenate([encoded, initial], axis=-1), attn_w)
    return ag.softmax(logits, axis=-1)


# --------------------------------------------------------------- encoder

def _transform(manifold: Stereographic, weight, points, gyro: bool = True):
    if gyro:
        return manifold.gyro_transform(weight, points)
    return manifold.tangent_linear(weight, points)


def _row_normalized_with_self(adjacency):
    n = np.shape(ag.value(adjacency))[0]
    coefficients = adjacency + np.eye(n)
    return coefficients / ag.reduce_sum(coefficients, axis=1, keepdims=True)


def manifold_gcn_layer(adjacency, points, weight, manifold: Stereographic, gyro: bool = True):
    """Gyro-transform every node, then gyro-midpoint over (A + I) row-normalized."""
    transformed = _transform(manifold, weight, points, gyro)
    return manifold.aggregate(transformed, _row_normalized_with_self(adjacency))


def dense_adjacency(n: int, sources: np.ndarray, targets: np.ndarray, weights):
    """Symmetric n×n matrix from per-edge weights (differentiable in the weights)."""
    flat = ag.scatter_add(weights, sources * n + targets, n * n) + ag.scatter_add(weights, targets * n + sources, n * n)
    return flat.reshape(n, n)


def union_edges(graphs: Sequence[WeightedGraph]):
    """Sorted (sources, targets) of every edge present in any of the graphs."""
    pairs = sorted({(i, j) for graph in graphs for i, j, _ in graph.edges})
    sources = np.array([p[0] for p in pairs], dtype=np.int64)
    targets = np.array([p[1] for p in pairs], dtype=np.int64)
    return sources, targets


def initial_weights(Z, sources: np.ndarray, targets: np.ndarray, manifold: Stereographic, dense: bool = False):
    """
    Row softmax P_ij of −d(z_i, z_j) over the candidate set, and the undirected
    flow weights ½(P_ij + P_ji) per edge.
    """
    n = np.shape(ag.value(Z))[0]
    if dense:
        mask = ~np.eye(n, dtype=bool)
    else:
        mask = np.zeros((n, n), dtype=bool)
        mask[sources, targets] = True
        mask[targets, sources] = True
    distances = manifold.pairwise_distance(Z)
    P = ag.masked_softmax(-distances, mask, axis=-1)
    w0 = 0.5 * (P[sources, targets] + P[targets, sources])
    return P, w0


def encode_initial_state(points: Sequence[np.ndarray], graphs: Sequence[WeightedGraph], times: Sequence[float],
                         params: ModelParams, manifold: Stereographic,
                         config: Optional[ModelConfig] = None) -> InitialState:
    """
    Encode an observation window into (Z0, w0).

    Args:
        points: per snapshot, (n, F) ingested manifold features
        graphs: per snapshot, the observed weighted graph
        times: observation timestamps; the last one is the initial time
    """
    config = config or ModelConfig()
    if not points:
        raise ManifoldDomainError("encoding needs at least one observed snapshot")
    gyro = config.ablation != Ablation.WO_GYR
    per_snapshot = []
    for features, graph in zip(points, graphs):
        hidden = features
        adjacency = graph.adjacency()
        for weight in params.encoder_W:
            hidden = manifold_gcn_layer(adjacency, hidden, weight, manifold, gyro)
        per_snapshot.append(hidden)

    alpha = temporal_attention(times, times[-1], params.attn_w)
    stacked = ag.stack(per_snapshot, axis=1)
    Z0 = manifold.gyro_midpoint(stacked, alpha)

    sources, targets = union_edges(graphs)
    P, w0 = initial_weights(Z0, sources, targets, manifold, dense=config.dense_init)
    logger.debug("encoded %d snapshots into %d nodes, %d flow edges", len(points), np.shape(ag.value(Z0))[0], len(sources))
    return InitialState(Z0=Z0, w0=w0, P=P, sources=sources, targets=targets)


# ---------------------------------------------------------- vector field

def _attention_mask(n: int, sources: np.ndarray, targets: np.ndarray) -> np.ndarray:
    mask = np.eye(n, dtype=bool)
    mask[sources, targets] = True
    mask[targets, sources] = True
    return mask


def vector_field(Z, sources: np.ndarray, targets: np.ndarray, weights, params: ModelParams,
                 manifold: Stereographic, attention: GatAttention = GatAttention.FLOW_WEIGHTS):
    """
    Tangent vectors at the origin, one per node.

    V = Log_o(Z) runs through the stacked GAT layers (tanh between layers, the
    last layer linear). ``flow_weights`` aggregates with the current edge weights
    plus unit self-loops, row-normalized; ``learned`` uses a masked softmax of
    tanh(a₁·Wh_i + a₂·Wh_j) over neighbours and self.
    """
    n = np.shape(ag.value(Z))[0]
    hidden = manifold.log0(Z)
    if attention == GatAttention.FLOW_WEIGHTS:
        coefficients = _row_normalized_with_self(dense_adjacency(n, sources, targets, weights))
    else:
        mask = _attention_mask(n, sources, targets)

    layers = params.gat_layers
    for k, layer in enumerate(layers):
        projected = ag.matmul(hidden, layer["W"])
        if attention == GatAttention.LEARNED:
            d = np.shape(ag.value(projected))[1]
            own = ag.matmul(projected, layer["a"][:d]).reshape(n, 1)
            other = ag.matmul(projected, layer["a"][d:]).reshape(1, n)
            coefficients = ag.masked_softmax(ag.tanh(own + other), mask, axis=-1)
        hidden = ag.matmul(coefficients, projected)
        if k < len(layers) - 1:
            hidden = ag.tanh(hidden)
    return hidden


# ------------------------------------------------------------ constraint

def _mlp(x, layers: List[Dict[str, ag.Value]]):
    for k, layer in enumerate(layers):
        x = ag.matmul(x, layer["W"]) + layer["b"]
        if k < len(layers) - 1:
            x = ag.tanh(x)
    return x


def edge_constraints(Z, sources: np.ndarray, targets: np.ndarray, params: ModelParams, manifold: Stereographic):
    """f_ij = σ(MLP(Log_o z_i ‖ Log_o z_j)) for every edge, shape (m,)."""
    tangent = manifold.log0(Z)
    pairs = ag.concat([tangent[sources], tangent[targets]], axis=-1)
    logits = _mlp(pairs, params.mlp)
    return ag.sigmoid(logits.reshape(-1))


def constraint_f(z_i, z_j, params: ModelParams, manifold: Stereographic) -> float:
    Z = np.stack([np.asarray(z_i, dtype=np.float64), np.asarray(z_j, dtype=np.float64)])
    return float(edge_constraints(Z, np.array([0]), np.array([1]), params.numpy(), manifold)[0])


# --------------------------------------------------------------- decoder

def decode(Z, params: ModelParams, manifold: Stereographic, gyro: bool = True):
    """Map latent points onto the output manifold row by row."""
    return _transform(manifold, params.decoder_W, Z, gyro)
