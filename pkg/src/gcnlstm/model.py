"""One captioning branch: relation graph -> gated GCN -> attention LSTM."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import tensor as T
from .data import Scene
from .decoder import DecoderDims, decoder_dims, init_decoder, sentence_nll
from .gcn import encode, init_encoder
from .graph import RelationGraph
from .params import dumps_checkpoint, load_checkpoint, loads_checkpoint
from .semantic import semantic_labels
from .spatial import SPATIAL_LABELS
from .tensor import Tensor
from .vocab import Vocabulary

KINDS = {"semantic": "sem", "spatial": "spa", "sem": "sem", "spa": "spa"}


def canonical_kind(kind: str) -> str:
    try:
        return KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown graph kind {kind!r}; expected semantic or spatial") from None


def label_names_for(kind: str, n_sem: int) -> tuple[str, ...]:
    return SPATIAL_LABELS if canonical_kind(kind) == "spa" else semantic_labels(n_sem)


@dataclass
class Branch:
    kind: str
    vocab: Vocabulary
    params: dict[str, Tensor]
    label_names: tuple[str, ...]
    layers: int = 1
    reverse: bool = True

    @classmethod
    def init(
        cls,
        kind: str,
        vocab: Vocabulary,
        dims: DecoderDims,
        n_sem: int,
        rng: np.random.Generator,
        layers: int = 1,
        reverse: bool = True,
    ) -> Branch:
        kind = canonical_kind(kind)
        labels = label_names_for(kind, n_sem)
        params = init_encoder(rng, kind, dims.d_v, len(labels) - 1, layers)
        params.update(init_decoder(rng, dims))
        return cls(kind, vocab, params, labels, layers, reverse)

    @property
    def dims(self) -> DecoderDims:
        return decoder_dims(self.params)

    def graph(self, scene: Scene) -> RelationGraph:
        if self.kind == "spa":
            return scene.spatial_graph()
        return scene.semantic_graph(len(self.label_names) - 1)

    def encode(self, features, graph: RelationGraph) -> Tensor:
        x = features if isinstance(features, Tensor) else Tensor(features)
        return encode(x, graph, self.params, self.kind, self.layers, self.reverse)

    def caption_nll(self, features, graph: RelationGraph, tokens: Sequence[str]) -> Tensor:
        return sentence_nll(self.vocab.encode(tokens), self.encode(features, graph), self.params)

    def meta(self, extra: Mapping | None = None) -> dict:
        out = {
            "kind": self.kind,
            "vocab": self.vocab.to_json(),
            "label_names": list(self.label_names),
            "gcn_layers": self.layers,
            "gcn_reverse": self.reverse,
        }
        if extra:
            out.update(extra)
        return out

    def dumps(self, extra_meta: Mapping | None = None) -> str:
        return dumps_checkpoint(self.params, self.meta(extra_meta))

    def save(self, path, extra_meta: Mapping | None = None) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps(extra_meta))

    @classmethod
    def _from(cls, params: dict[str, Tensor], meta: dict) -> Branch:
        try:
            return cls(
                kind=canonical_kind(meta["kind"]),
                vocab=Vocabulary(meta["vocab"]),
                params=params,
                label_names=tuple(meta["label_names"]),
                layers=int(meta.get("gcn_layers", 1)),
                reverse=bool(meta.get("gcn_reverse", True)),
            )
        except KeyError as exc:
            raise ValueError(f"checkpoint metadata lacks {exc}") from None

    @classmethod
    def load(cls, path) -> Branch:
        return cls._from(*load_checkpoint(path))

    @classmethod
    def loads(cls, text: str) -> Branch:
        return cls._from(*loads_checkpoint(text))


def mean_nll(branch: Branch, items: Sequence[tuple[Scene, RelationGraph, Sequence[str]]]) -> Tensor:
    """Mean over (scene, graph, caption) items of the caption NLL."""
    losses = [branch.caption_nll(s.features, g, cap) for s, g, cap in items]
    return T.mul(T.add_n(losses), 1.0 / len(losses))
