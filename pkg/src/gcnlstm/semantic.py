"""Semantic relation classifier and semantic graph construction.

The classifier embeds subject, object and union-box features separately
(affine + ReLU each), concatenates the three embeddings and applies a softmax
layer over ``n_sem`` relation classes plus class 0, "no relation".
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import params as P
from . import tensor as T
from .graph import SELF_NAME, RelationGraph, load_graph_file
from .optim import AdamState, adam_step
from .tensor import ShapeError, Tape, Tensor

PREFIX = "rel"
NO_RELATION = 0
EDGE_THRESHOLD = 0.5


def semantic_labels(n_sem: int) -> tuple[str, ...]:
    return (SELF_NAME,) + tuple(f"rel_{c}" for c in range(1, n_sem + 1))


def embed_width(d_v: int) -> int:
    return math.ceil(d_v / 2)


def init_classifier(rng: np.random.Generator, d_v: int, n_sem: int, d_e: int | None = None) -> dict[str, Tensor]:
    if n_sem < 1:
        raise ValueError("need at least one relation class")
    d_e = d_e or embed_width(d_v)
    out = {}
    for part in ("subj", "obj", "union"):
        out[f"{PREFIX}.{part}.W"] = P.glorot(rng, (d_e, d_v), d_v, d_e)
        out[f"{PREFIX}.{part}.b"] = P.zeros((d_e,))
    out[f"{PREFIX}.cls.W"] = P.glorot(rng, (n_sem + 1, 3 * d_e), 3 * d_e, n_sem + 1)
    out[f"{PREFIX}.cls.b"] = P.zeros((n_sem + 1,))
    return out


def n_relations(params: Mapping[str, Tensor]) -> int:
    return params[f"{PREFIX}.cls.b"].shape[0] - 1


def relation_logits(subj, obj, union, params: Mapping[str, Tensor]) -> Tensor:
    """Logits for one pair (vectors) or a batch of pairs (row matrices)."""
    subj, obj, union = (x if isinstance(x, Tensor) else Tensor(x) for x in (subj, obj, union))
    d_v = params[f"{PREFIX}.subj.W"].shape[1]
    for name, x in (("subject", subj), ("object", obj), ("union", union)):
        if x.shape[-1] != d_v:
            raise ShapeError(f"{name} feature has width {x.shape[-1]}, classifier expects {d_v}")
    parts = [
        T.relu(T.affine(x, params[f"{PREFIX}.{part}.W"], params[f"{PREFIX}.{part}.b"]))
        for part, x in (("subj", subj), ("obj", obj), ("union", union))
    ]
    joint = T.concat(parts, axis=subj.data.ndim - 1)
    return T.affine(joint, params[f"{PREFIX}.cls.W"], params[f"{PREFIX}.cls.b"])


def classify_relation(subj, obj, union, params: Mapping[str, Tensor]) -> np.ndarray:
    """Probabilities over (no relation, rel_1 .. rel_n)."""
    return T._softmax(relation_logits(subj, obj, union, params).data)


def edge_label(probs: np.ndarray) -> int | None:
    """Relation label for a pair, or None when P(no relation) is not below 0.5.

    Ties between relation classes go to the lowest class id.
    """
    if not probs[NO_RELATION] < EDGE_THRESHOLD:
        return None
    return 1 + int(np.argmax(probs[1:]))


def edges_from_probabilities(k: int, pair_probs: Mapping[tuple[int, int], np.ndarray], n_sem: int) -> RelationGraph:
    edges = []
    for (i, j), probs in sorted(pair_probs.items()):
        label = edge_label(np.asarray(probs))
        if label is not None:
            edges.append((i, j, label))
    return RelationGraph.build(k, edges, semantic_labels(n_sem))


def build_semantic_graph(
    features: np.ndarray,
    union_features: Mapping[tuple[int, int], np.ndarray],
    params: Mapping[str, Tensor],
) -> RelationGraph:
    """Classify every ordered pair of distinct regions and keep confident edges."""
    features = np.asarray(features, dtype=np.float64)
    k = features.shape[0]
    pairs = [(i, j) for i in range(k) for j in range(k) if i != j]
    for pair in pairs:
        if pair not in union_features:
            raise KeyError(f"missing union feature for pair {pair}")
    n_sem = n_relations(params)
    if not pairs:
        return RelationGraph.build(k, [], semantic_labels(n_sem))
    idx_i = [i for i, _ in pairs]
    idx_j = [j for _, j in pairs]
    union = np.array([union_features[p] for p in pairs], dtype=np.float64)
    probs = T._softmax(relation_logits(features[idx_i], features[idx_j], union, params).data)
    return edges_from_probabilities(k, dict(zip(pairs, probs)), n_sem)


def load_semantic_edges(path, n_sem: int | None = None) -> RelationGraph:
    """Read an exported edge file; labels must lie in 1..n_sem."""
    labels = semantic_labels(n_sem) if n_sem is not None else None
    return load_graph_file(path, labels=labels)


@dataclass
class RelationTrainConfig:
    steps: int = 400
    lr: float = 1e-2
    d_e: int | None = None
    seed: int = 0


@dataclass
class RelationTrainResult:
    params: dict[str, Tensor]
    initial_loss: float
    final_loss: float


def train_relation_classifier(
    subj: np.ndarray,
    obj: np.ndarray,
    union: np.ndarray,
    labels: np.ndarray,
    n_sem: int,
    config: RelationTrainConfig | None = None,
) -> RelationTrainResult:
    """Full-batch Adam on mean cross-entropy."""
    config = config or RelationTrainConfig()
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() > n_sem:
        raise ValueError(f"labels must lie in 0..{n_sem}")
    missing = sorted(set(range(n_sem + 1)) - set(labels.tolist()))
    if missing:
        warnings.warn(f"relation classes absent from training data: {missing}", stacklevel=2)
    rng = np.random.default_rng(config.seed)
    params = init_classifier(rng, subj.shape[1], n_sem, config.d_e)
    state = AdamState(lr=config.lr)

    def loss_fn():
        return T.cross_entropy(relation_logits(subj, obj, union, params), labels)

    initial = loss_fn().item()
    for _ in range(config.steps):
        with Tape() as tape:
            loss = loss_fn()
        adam_step(state, params, tape.gradient(loss, params))
    return RelationTrainResult(params, initial, loss_fn().item())
