"""The frame classifier: six graph attention layers, node-average pooling,
and two linear layers producing HC/ALS logits.

Attention follows the single-head formulation: the logit for sender v and
receiver u is LeakyReLU(a . [W h_u || W h_v || w_uv]), softmax-normalized
over u's neighborhood (self-loop included), and the updated feature is the
sigmoid of the attention-weighted sum of projected neighbor features. The
trailing edge-weight term in the concatenation is optional
(``edge_weight_in_attention``); disabling it recovers the plain coordinate
formulation.

Backward passes are hand-derived and verified against the finite-difference
oracle in :mod:`fpgraph.numerics`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import backend
from .fsio import atomic_write_text
from .geometry import NUM_GRAPH_NODES, FaceGraph, LandmarkSubset
from .numerics import ActivationConfig, ParamTensor

NUM_GAT_LAYERS = 6
NUM_CLASSES = 2
DEFAULT_HIDDEN_DIM = 17
DEFAULT_COORD_SCALE = 200.0
DEFAULT_EDGE_SCALE = 200.0 * math.sqrt(2.0)

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and preprocessing settings carried with the weights."""

    hidden_dim: int = DEFAULT_HIDDEN_DIM
    subset: LandmarkSubset = field(default_factory=LandmarkSubset)
    coord_scale: float = DEFAULT_COORD_SCALE
    edge_scale: float = DEFAULT_EDGE_SCALE
    edge_weight_in_attention: bool = True
    activation: ActivationConfig = field(default_factory=ActivationConfig)

    def __post_init__(self):
        if self.hidden_dim < 1:
            raise ValueError(f"hidden_dim must be positive, got {self.hidden_dim}")
        if self.coord_scale <= 0 or self.edge_scale <= 0:
            raise ValueError("normalization scales must be positive")


@dataclass
class GatLayerParams:
    """Weight matrix (n_out x n_in) and attention vector for one layer."""

    W: ParamTensor
    a: ParamTensor
    n_in: int
    n_out: int


@dataclass
class FpgModel:
    gat_layers: List[GatLayerParams]
    linear1_w: ParamTensor
    linear1_b: ParamTensor
    linear2_w: ParamTensor
    linear2_b: ParamTensor
    config: ModelConfig

    def parameters(self) -> List[ParamTensor]:
        out: List[ParamTensor] = []
        for layer in self.gat_layers:
            out.append(layer.W)
            out.append(layer.a)
        out.extend([self.linear1_w, self.linear1_b, self.linear2_w, self.linear2_b])
        return out

    def gat_parameters(self) -> List[ParamTensor]:
        out: List[ParamTensor] = []
        for layer in self.gat_layers:
            out.append(layer.W)
            out.append(layer.a)
        return out

    def linear_parameters(self) -> List[ParamTensor]:
        return [self.linear1_w, self.linear1_b, self.linear2_w, self.linear2_b]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def copy_values(self) -> Dict[str, np.ndarray]:
        return {p.name: p.value.copy() for p in self.parameters()}

    def load_values(self, values: Dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            p.value[...] = values[p.name]


def attention_vector_length(hidden_dim: int, edge_weight_in_attention: bool) -> int:
    return 2 * hidden_dim + (1 if edge_weight_in_attention else 0)


def init_model(config: ModelConfig = ModelConfig(), seed: int = 0) -> FpgModel:
    """Glorot-uniform weights, uniform attention vectors, zero biases."""
    rng = np.random.default_rng(seed)
    h = config.hidden_dim
    a_len = attention_vector_length(h, config.edge_weight_in_attention)

    def glorot(n_out: int, n_in: int, name: str) -> ParamTensor:
        limit = math.sqrt(6.0 / (n_in + n_out))
        return ParamTensor.create(rng.uniform(-limit, limit, size=(n_out, n_in)), name)

    layers = []
    for i in range(NUM_GAT_LAYERS):
        n_in = 2 if i == 0 else h
        w = glorot(h, n_in, f"gat{i}.W")
        bound = 1.0 / math.sqrt(a_len)
        a = ParamTensor.create(rng.uniform(-bound, bound, size=a_len), f"gat{i}.a")
        layers.append(GatLayerParams(W=w, a=a, n_in=n_in, n_out=h))

    lin1_w = glorot(h, h, "linear1.W")
    lin1_b = ParamTensor.create(np.zeros(h), "linear1.b")
    lin2_w = glorot(NUM_CLASSES, h, "linear2.W")
    lin2_b = ParamTensor.create(np.zeros(NUM_CLASSES), "linear2.b")
    return FpgModel(
        gat_layers=layers,
        linear1_w=lin1_w,
        linear1_b=lin1_b,
        linear2_w=lin2_w,
        linear2_b=lin2_b,
        config=config,
    )


@dataclass(frozen=True, eq=False)
class GraphTensors:
    """A FaceGraph flattened for the kernels.

    CSR neighborhoods (self-loop included, neighbor indices ascending),
    normalized edge features (0 on self-loops), and the normalized
    coordinates that seed layer 0.
    """

    h0: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    edge_features: np.ndarray


def graph_to_tensors(graph: FaceGraph, config: ModelConfig) -> GraphTensors:
    n = graph.num_nodes
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices: List[int] = []
    feats: List[float] = []
    for u in range(n):
        nbrs = sorted(graph.neighbors(u) + (u,))
        indptr[u + 1] = indptr[u] + len(nbrs)
        for v in nbrs:
            indices.append(v)
            feats.append(0.0 if v == u else graph.weight(u, v) / config.edge_scale)
    return GraphTensors(
        h0=np.ascontiguousarray(graph.coords / config.coord_scale),
        indptr=indptr,
        indices=np.asarray(indices, dtype=np.int64),
        edge_features=np.asarray(feats, dtype=np.float64),
    )


@dataclass
class GatLayerCache:
    H_in: np.ndarray
    Z: np.ndarray
    alpha: np.ndarray
    pre: np.ndarray
    H_out: np.ndarray


@dataclass
class ForwardCache:
    model: FpgModel
    tensors: GraphTensors
    layers: List[GatLayerCache]
    pooled: np.ndarray
    pre1: np.ndarray
    act1: np.ndarray


def gat_layer_forward(
    H: np.ndarray, layer: GatLayerParams, tensors: GraphTensors, config: ModelConfig
) -> Tuple[np.ndarray, GatLayerCache]:
    """Apply one attention layer; the cache feeds the backward pass."""
    if H.shape != (len(tensors.indptr) - 1, layer.n_in):
        raise ValueError(f"feature shape {H.shape} does not match layer ({layer.n_in} inputs)")
    h_out, z, alpha, pre = backend.gat_forward(
        H,
        layer.W.value,
        layer.a.value,
        tensors.indptr,
        tensors.indices,
        tensors.edge_features,
        config.activation.leaky_slope,
        config.edge_weight_in_attention,
    )
    return h_out, GatLayerCache(H_in=H, Z=z, alpha=alpha, pre=pre, H_out=h_out)


def attention_coefficients(
    H: np.ndarray, layer: GatLayerParams, graph: FaceGraph, config: ModelConfig
) -> np.ndarray:
    """Dense (n, n) attention matrix: row u holds alpha[u, v] over N(u)+{u}."""
    tensors = graph_to_tensors(graph, config)
    _, _, alpha, _ = backend.gat_forward(
        H,
        layer.W.value,
        layer.a.value,
        tensors.indptr,
        tensors.indices,
        tensors.edge_features,
        config.activation.leaky_slope,
        config.edge_weight_in_attention,
    )
    n = graph.num_nodes
    dense = np.zeros((n, n))
    for u in range(n):
        for m in range(tensors.indptr[u], tensors.indptr[u + 1]):
            dense[u, tensors.indices[m]] = alpha[m]
    return dense


def mean_pool_nodes(H: np.ndarray) -> np.ndarray:
    """Column means, accumulated in node order so results are reproducible."""
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] == 0:
        raise ValueError(f"expected a nonempty 2-D feature matrix, got shape {H.shape}")
    acc = H[0].copy()
    for u in range(1, H.shape[0]):
        acc += H[u]
    return acc / float(H.shape[0])


def _leaky_vec(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x >= 0.0, x, slope * x)


def model_forward(graph, model: FpgModel) -> Tuple[np.ndarray, ForwardCache]:
    """Full forward pass; accepts a FaceGraph or precomputed GraphTensors."""
    tensors = graph if isinstance(graph, GraphTensors) else graph_to_tensors(graph, model.config)
    H = tensors.h0
    caches: List[GatLayerCache] = []
    for layer in model.gat_layers:
        H, cache = gat_layer_forward(H, layer, tensors, model.config)
        caches.append(cache)
    pooled = mean_pool_nodes(H)
    slope = model.config.activation.leaky_slope
    pre1 = backend.matmul(model.linear1_w.value, pooled[:, None])[:, 0] + model.linear1_b.value
    act1 = _leaky_vec(pre1, slope)
    logits = backend.matmul(model.linear2_w.value, act1[:, None])[:, 0] + model.linear2_b.value
    return logits, ForwardCache(
        model=model, tensors=tensors, layers=caches, pooled=pooled, pre1=pre1, act1=act1
    )


def model_backward(cache: ForwardCache, grad_logits: np.ndarray) -> None:
    """Accumulate d(loss)/d(param) into every parameter's ``grad`` buffer.

    ``grad_logits`` is the upstream gradient at the output logits (for
    cross-entropy: softmax minus one-hot).
    """
    model = cache.model
    if len(cache.layers) != len(model.gat_layers):
        raise ValueError("forward cache does not match this model")
    grad_logits = np.asarray(grad_logits, dtype=np.float64)
    slope = model.config.activation.leaky_slope

    model.linear2_w.grad += grad_logits[:, None] * cache.act1[None, :]
    model.linear2_b.grad += grad_logits
    d_act1 = backend.matmul(grad_logits[None, :], model.linear2_w.value)[0]
    d_pre1 = d_act1 * np.where(cache.pre1 >= 0.0, 1.0, slope)
    model.linear1_w.grad += d_pre1[:, None] * cache.pooled[None, :]
    model.linear1_b.grad += d_pre1
    d_pooled = backend.matmul(d_pre1[None, :], model.linear1_w.value)[0]

    n_nodes = cache.layers[-1].H_out.shape[0]
    dH = np.broadcast_to(d_pooled / float(n_nodes), (n_nodes, d_pooled.size)).copy()

    tensors = cache.tensors
    for layer, lc in zip(reversed(model.gat_layers), reversed(cache.layers)):
        dH, dW, da = backend.gat_backward(
            dH,
            lc.H_in,
            layer.W.value,
            layer.a.value,
            tensors.indptr,
            tensors.indices,
            tensors.edge_features,
            model.config.activation.leaky_slope,
            model.config.edge_weight_in_attention,
            lc.Z,
            lc.alpha,
            lc.pre,
            lc.H_out,
        )
        layer.W.grad += dW
        layer.a.grad += da


def save_checkpoint(model: FpgModel, path: str) -> None:
    """JSON checkpoint; float64 values round-trip bit-exactly."""
    cfg = model.config
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": {
            "hidden_dim": cfg.hidden_dim,
            "subset_indices": list(cfg.subset.indices),
            "hub_position": cfg.subset.hub_position,
            "coord_scale": cfg.coord_scale,
            "edge_scale": cfg.edge_scale,
            "edge_weight_in_attention": cfg.edge_weight_in_attention,
            "leaky_slope": cfg.activation.leaky_slope,
        },
        "params": {
            p.name: {"shape": list(p.value.shape), "data": p.value.reshape(-1).tolist()}
            for p in model.parameters()
        },
    }
    atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=1))


def load_checkpoint(path: str) -> FpgModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version: {version!r}")
    c = payload["config"]
    config = ModelConfig(
        hidden_dim=c["hidden_dim"],
        subset=LandmarkSubset(tuple(c["subset_indices"]), c["hub_position"]),
        coord_scale=c["coord_scale"],
        edge_scale=c["edge_scale"],
        edge_weight_in_attention=c["edge_weight_in_attention"],
        activation=ActivationConfig(leaky_slope=c["leaky_slope"]),
    )
    model = init_model(config, seed=0)
    saved = payload["params"]
    for p in model.parameters():
        entry = saved.get(p.name)
        if entry is None:
            raise ValueError(f"checkpoint missing parameter {p.name!r}")
        arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if arr.shape != p.value.shape:
            raise ValueError(
                f"checkpoint parameter {p.name!r} has shape {arr.shape}, expected {p.value.shape}"
            )
        p.value[...] = arr
    return model
