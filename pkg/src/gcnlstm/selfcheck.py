"""Finite-difference check of the whole captioning loss on random small models."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decoder import DecoderDims, init_decoder, sentence_nll
from .gcn import encode, init_encoder
from .gradcheck import GradCheckReport, grad_check
from .spatial import BoundingBox, SPATIAL_LABELS, build_spatial_graph
from .tensor import Tensor


@dataclass
class Instance:
    features: Tensor
    graph: object
    tokens: list[int]
    params: dict[str, Tensor]

    def loss(self) -> Tensor:
        enc = encode(self.features, self.graph, self.params, "spa")
        return sentence_nll(self.tokens, enc, self.params)


def random_instance(rng: np.random.Generator, k_max: int = 5, d_v_max: int = 8, vocab_max: int = 12) -> Instance:
    k = int(rng.integers(2, k_max + 1))
    d_v = int(rng.integers(3, d_v_max + 1))
    vocab = int(rng.integers(5, vocab_max + 1))
    dims = DecoderDims(vocab=vocab, d_v=d_v, d_h=int(rng.integers(3, 7)), d_a=int(rng.integers(2, 6)), d_s=int(rng.integers(2, 6)))
    boxes = []
    while len(boxes) < k:
        x = np.sort(rng.uniform(0, 1, 2))
        y = np.sort(rng.uniform(0, 1, 2))
        if x[1] - x[0] > 0.05 and y[1] - y[0] > 0.05:
            boxes.append(BoundingBox(x[0], y[0], x[1], y[1]))
    graph = build_spatial_graph(boxes)
    params = init_encoder(rng, "spa", d_v, len(SPATIAL_LABELS) - 1)
    params.update(init_decoder(rng, dims))
    # move off the zero-bias initial point so that every term is exercised
    for p in params.values():
        p.data += rng.normal(0.0, 0.2, p.shape)
    n_words = int(rng.integers(1, 4))
    tokens = [0] + [int(t) for t in rng.integers(3, vocab, n_words)] + [1]
    return Instance(Tensor(rng.normal(0.0, 1.0, (k, d_v))), graph, tokens, params)


def full_model_gradcheck(n_instances: int = 5, seed: int = 0, tol: float = 1e-4) -> list[GradCheckReport]:
    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(n_instances):
        inst = random_instance(rng)
        reports.append(grad_check(inst.loss, inst.params, tol=tol))
    return reports
