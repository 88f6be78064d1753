"""Graph convolution encoders: plain, direction/label aware, and edge-gated.

Every directed edge src->dst is seen from both endpoints. dst receives src's
feature through ``W[0]`` (along the edge); src receives dst's feature through
``W[1]`` (against the edge, switchable off with ``reverse=False``); each vertex
receives its own feature through ``W[2]``. Bias and gate bias are chosen by the
edge label, with label 0 reserved for self-loops.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import params as P
from .graph import RelationGraph
from .tensor import ShapeError, Tensor, graph_conv, reshape

N_DIRECTIONS = 3


@dataclass
class GcnParams:
    W: Tensor  # (3, D, D): along edge, against edge, self
    b: Tensor  # (L + 1, D) per-label bias, row 0 for self-loops
    gate_w: Tensor  # (3, D)
    gate_b: Tensor  # (L + 1,)

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    @property
    def n_label_rows(self) -> int:
        return self.b.shape[0]

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.W": self.W, f"{prefix}.b": self.b, f"{prefix}.gate_w": self.gate_w, f"{prefix}.gate_b": self.gate_b}

    @classmethod
    def from_named(cls, params: dict[str, Tensor], prefix: str) -> GcnParams:
        return cls(params[f"{prefix}.W"], params[f"{prefix}.b"], params[f"{prefix}.gate_w"], params[f"{prefix}.gate_b"])

    @classmethod
    def init(cls, rng: np.random.Generator, dim: int, n_labels: int) -> GcnParams:
        W = np.stack([P.glorot(rng, (dim, dim), dim, dim).data for _ in range(N_DIRECTIONS)])
        gate_w = P.glorot(rng, (N_DIRECTIONS, dim), dim, 1)
        return cls(Tensor(W), P.zeros((n_labels + 1, dim)), gate_w, P.zeros((n_labels + 1,)))


def layer_prefix(kind: str, layer: int) -> str:
    return f"gcn.{kind}.{layer}"


def init_encoder(rng: np.random.Generator, kind: str, dim: int, n_labels: int, layers: int = 1) -> dict[str, Tensor]:
    out = {}
    for layer in range(layers):
        out.update(GcnParams.init(rng, dim, n_labels).named(layer_prefix(kind, layer)))
    return out


def _check(features: Tensor, graph: RelationGraph, n_label_rows: int | None = None) -> None:
    if features.data.ndim != 2 or features.shape[0] != graph.k:
        raise ShapeError(f"graph has {graph.k} vertices but features have shape {features.shape}")
    if n_label_rows is not None:
        for _, _, label in graph.edges:
            if label >= n_label_rows:
                name = graph.label_names[label] if label < len(graph.label_names) else str(label)
                raise ShapeError(f"edge label {label} ({name!r}) has no bias row; table has {n_label_rows}")


def gcn_vanilla(features: Tensor, graph: RelationGraph, W: Tensor, b: Tensor) -> Tensor:
    """ReLU(sum over neighbour incidences of (W v_j + b)), direction and labels ignored.

    Each vertex counts itself once and every edge touching it once, whichever
    way the edge points.
    """
    _check(features, graph)
    D = features.shape[1]
    tgt, src, wi, bi = graph.incidences(reverse=True)
    zero = np.zeros_like(wi)
    return graph_conv(features, reshape(W, (1, D, D)), reshape(b, (1, D)), None, None, (tgt, src, zero, zero))


def gcn_directional(features: Tensor, graph: RelationGraph, params: GcnParams, reverse: bool = True) -> Tensor:
    _check(features, graph, params.n_label_rows)
    return graph_conv(features, params.W, params.b, None, None, graph.incidences(reverse))


def gcn_gated(features: Tensor, graph: RelationGraph, params: GcnParams, reverse: bool = True) -> Tensor:
    """Each incidence scaled by sigmoid(gate_w[dir] . v_j + gate_b[label])."""
    _check(features, graph, params.n_label_rows)
    return graph_conv(features, params.W, params.b, params.gate_w, params.gate_b, graph.incidences(reverse))


def encode(
    features: Tensor,
    graph: RelationGraph,
    params: dict[str, Tensor],
    kind: str,
    layers: int = 1,
    reverse: bool = True,
) -> Tensor:
    """Stacked gated layers; the output keeps the input shape."""
    x = features
    for layer in range(layers):
        x = gcn_gated(x, graph, GcnParams.from_named(params, layer_prefix(kind, layer)), reverse)
    return x
