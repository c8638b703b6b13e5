"""Two-layer graph attention encoder over the multi-modal graph.

Messages flow along directed edges (src -> dst means dst aggregates src),
self-loops are always added.  Layer 1 concatenates the per-head outputs and
applies an ELU; layer 2 averages its heads and emits d_model vectors with no
trailing nonlinearity.  Attention scores follow
``leaky_relu(a . [W h_i || W h_j])`` with a row softmax over each node's
in-neighborhood.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .core import MultiModalGraph
from .errors import DimensionError
from .autodiff import Tensor

NEG_MASK = -1e30


@dataclass(frozen=True, eq=False)
class GatLayerParams:
    """Per-head weights W (H, d_out, d_in) and attention vectors a (H, 2*d_out)."""

    W: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        if self.W.ndim != 3 or self.a.ndim != 2 or self.a.shape[0] != self.W.shape[0]:
            raise DimensionError(f"inconsistent layer shapes W{self.W.shape} a{self.a.shape}")
        if self.a.shape[1] != 2 * self.W.shape[1]:
            raise DimensionError(
                f"attention vector must have 2*d_out entries, got {self.a.shape[1]}"
            )

    @property
    def heads(self) -> int:
        return self.W.shape[0]

    @property
    def d_out(self) -> int:
        return self.W.shape[1]

    @property
    def d_in(self) -> int:
        return self.W.shape[2]


@dataclass(frozen=True, eq=False)
class GatParams:
    p_text: np.ndarray  # (d_e, d_in)
    p_visual: np.ndarray  # (d_v, d_in)
    layer1: GatLayerParams
    layer2: GatLayerParams
    leaky_slope: float = 0.2

    def __post_init__(self):
        if self.p_text.shape[1] != self.p_visual.shape[1]:
            raise DimensionError("text and visual projections must share d_in")
        if self.layer1.d_in != self.p_text.shape[1]:
            raise DimensionError("layer 1 input dim must equal projection output dim")
        if self.layer2.d_in != self.layer1.heads * self.layer1.d_out:
            raise DimensionError("layer 2 input dim must equal concat of layer 1 heads")

    @property
    def d_model(self) -> int:
        return self.layer2.d_out


@dataclass(frozen=True, eq=False)
class NodeEncoding:
    node_id: str
    vector: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, NodeEncoding):
            return NotImplemented
        return self.node_id == other.node_id and np.array_equal(self.vector, other.vector)


def init_gat_params(
    d_e: int,
    d_v: int,
    d_model: int,
    heads: int = 4,
    d_in: int | None = None,
    leaky_slope: float = 0.2,
    seed: int = 0,
) -> GatParams:
    if d_model % heads != 0:
        raise DimensionError(f"d_model {d_model} not divisible by {heads} heads")
    d_in = d_model if d_in is None else d_in
    d1 = d_model // heads
    rng = np.random.default_rng(seed)

    def glorot(*shape):
        scale = np.sqrt(2.0 / (shape[-2] + shape[-1]))
        return scale * rng.standard_normal(shape)

    return GatParams(
        p_text=glorot(d_e, d_in),
        p_visual=glorot(d_v, d_in),
        layer1=GatLayerParams(W=glorot(heads, d1, d_in), a=0.1 * rng.standard_normal((heads, 2 * d1))),
        layer2=GatLayerParams(
            W=glorot(heads, d_model, heads * d1), a=0.1 * rng.standard_normal((heads, 2 * d_model))
        ),
        leaky_slope=leaky_slope,
    )


def gat_param_dict(params: GatParams) -> dict[str, np.ndarray]:
    return {
        "p_text": params.p_text,
        "p_visual": params.p_visual,
        "l1.W": params.layer1.W,
        "l1.a": params.layer1.a,
        "l2.W": params.layer2.W,
        "l2.a": params.layer2.a,
    }


def gat_params_from_dict(tensors: dict[str, np.ndarray], leaky_slope: float) -> GatParams:
    return GatParams(
        p_text=tensors["p_text"],
        p_visual=tensors["p_visual"],
        layer1=GatLayerParams(W=tensors["l1.W"], a=tensors["l1.a"]),
        layer2=GatLayerParams(W=tensors["l2.W"], a=tensors["l2.a"]),
        leaky_slope=leaky_slope,
    )


def adjacency_mask(graph: MultiModalGraph, add_reverse: bool = False) -> np.ndarray:
    """Boolean (N, N); mask[i, j] is True when node i aggregates node j."""
    n = len(graph.nodes)
    index = {node.node_id: i for i, node in enumerate(graph.nodes)}
    mask = np.eye(n, dtype=bool)
    for edge in graph.edges:
        mask[index[edge.dst], index[edge.src]] = True
        if add_reverse:
            mask[index[edge.src], index[edge.dst]] = True
    return mask


def project_inputs(graph: MultiModalGraph, params: GatParams) -> np.ndarray:
    """Map every node feature to d_in via its modality's projection."""
    rows = []
    for node in graph.nodes:
        proj = params.p_text if node.is_text else params.p_visual
        if node.feature.shape != (proj.shape[0],):
            raise DimensionError(
                f"node {node.node_id!r}: feature dim {node.feature.shape} != ({proj.shape[0]},)"
            )
        rows.append(np.asarray(node.feature, dtype=np.float64) @ proj)
    if not rows:
        return np.zeros((0, params.p_text.shape[1]))
    return np.stack(rows)


def _project_inputs_t(graph: MultiModalGraph, p_text: Tensor, p_visual: Tensor) -> Tensor:
    text_idx = [i for i, n in enumerate(graph.nodes) if n.is_text]
    img_idx = [i for i, n in enumerate(graph.nodes) if not n.is_text]
    parts = []
    if text_idx:
        feats = np.stack([np.asarray(graph.nodes[i].feature, dtype=np.float64) for i in text_idx])
        parts.append(ad.matmul(ad.Tensor(feats), p_text))
    if img_idx:
        feats = np.stack([np.asarray(graph.nodes[i].feature, dtype=np.float64) for i in img_idx])
        parts.append(ad.matmul(ad.Tensor(feats), p_visual))
    stacked = parts[0] if len(parts) == 1 else ad.concat(parts, axis=0)
    order = text_idx + img_idx
    inverse = np.argsort(order)
    return ad.gather_rows(stacked, inverse)


def _head_attention(
    x: Tensor, w: Tensor, a: Tensor, head: int, mask_add: np.ndarray, slope: float
) -> tuple[Tensor, Tensor]:
    """One head's (attention (N, N), projected features (N, d_out))."""
    d_out = w.shape[1]
    w_h = ad.reshape(ad.gather_rows(w, [head]), (w.shape[1], w.shape[2]))
    proj = ad.matmul(x, ad.transpose(w_h, (1, 0)))
    a_h = ad.gather_rows(a, [head])  # (1, 2*d_out)
    a_self = ad.transpose(ad.slice_axis(a_h, 1, 0, d_out), (1, 0))  # (d_out, 1)
    a_neigh = ad.transpose(ad.slice_axis(a_h, 1, d_out, 2 * d_out), (1, 0))
    f = ad.matmul(proj, a_self)  # (N, 1) score share of the aggregating node
    g = ad.matmul(proj, a_neigh)  # (N, 1) score share of the neighbor
    scores = ad.add(f, ad.transpose(g, (1, 0)))
    scores = ad.leaky_relu(scores, slope)
    alpha = ad.softmax(ad.add(scores, ad.Tensor(mask_add)), axis=1)
    return alpha, proj


def _gat_layer(
    x: Tensor, w: Tensor, a: Tensor, mask_add: np.ndarray, slope: float, average: bool
) -> Tensor:
    heads = w.shape[0]
    outputs = []
    for h in range(heads):
        alpha, proj = _head_attention(x, w, a, h, mask_add, slope)
        outputs.append(ad.matmul(alpha, proj))
    if not average:
        return ad.concat(outputs, axis=1)
    acc = outputs[0]
    for out in outputs[1:]:
        acc = ad.add(acc, out)
    return ad.mul(acc, 1.0 / heads)


def encode_graph_t(
    graph: MultiModalGraph, tensors: dict[str, Tensor], leaky_slope: float, add_reverse: bool = False
) -> Tensor:
    """Full two-layer encoding as a tape tensor (N, d_model); used by training."""
    mask = adjacency_mask(graph, add_reverse)
    mask_add = np.where(mask, 0.0, NEG_MASK)
    x0 = _project_inputs_t(graph, tensors["p_text"], tensors["p_visual"])
    h1 = ad.elu(_gat_layer(x0, tensors["l1.W"], tensors["l1.a"], mask_add, leaky_slope, average=False))
    return _gat_layer(h1, tensors["l2.W"], tensors["l2.a"], mask_add, leaky_slope, average=True)


def attention_coefficients(
    layer_params: GatLayerParams,
    features: np.ndarray,
    adjacency: np.ndarray,
    leaky_slope: float = 0.2,
) -> np.ndarray:
    """Row-stochastic attention (H, N, N); self-loops are ensured internally."""
    n = features.shape[0]
    if adjacency.shape != (n, n):
        raise DimensionError(f"adjacency {adjacency.shape} does not match {n} nodes")
    mask = adjacency.astype(bool) | np.eye(n, dtype=bool)
    mask_add = np.where(mask, 0.0, NEG_MASK)
    x = ad.Tensor(np.asarray(features, dtype=np.float64))
    w = ad.Tensor(layer_params.W)
    a = ad.Tensor(layer_params.a)
    coeffs = []
    for h in range(layer_params.heads):
        alpha, _ = _head_attention(x, w, a, h, mask_add, leaky_slope)
        coeffs.append(alpha.data)
    return np.stack(coeffs)


def gat_forward(
    graph: MultiModalGraph, params: GatParams, add_reverse: bool = False
) -> list[NodeEncoding]:
    """Deterministic encodings aligned with graph.nodes order."""
    if not graph.nodes:
        return []
    tensors = {k: ad.Tensor(v) for k, v in gat_param_dict(params).items()}
    out = encode_graph_t(graph, tensors, params.leaky_slope, add_reverse)
    return [
        NodeEncoding(node_id=node.node_id, vector=out.data[i].copy())
        for i, node in enumerate(graph.nodes)
    ]


def gat_backward(
    graph: MultiModalGraph,
    params: GatParams,
    upstream_grads: np.ndarray,
    add_reverse: bool = False,
) -> dict[str, np.ndarray]:
    """Exact parameter gradients for the given upstream d(loss)/d(encodings).

    ``upstream_grads`` has shape (N, d_model), rows aligned with graph.nodes.
    """
    names = gat_param_dict(params)
    if not graph.nodes:
        return {k: np.zeros_like(v) for k, v in names.items()}
    upstream = np.asarray(upstream_grads, dtype=np.float64)
    if upstream.shape != (len(graph.nodes), params.d_model):
        raise DimensionError(
            f"upstream grads {upstream.shape} != ({len(graph.nodes)}, {params.d_model})"
        )
    tensors = ad.param_tensors(names)
    out = encode_graph_t(graph, tensors, params.leaky_slope, add_reverse)
    ad.backward(out, seed=upstream)
    return ad.collect_grads(tensors)
