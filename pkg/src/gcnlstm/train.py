"""Cross-entropy training of one branch."""
from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .data import Scene
from .decoder import DecoderDims
from .graph import RelationGraph
from .model import Branch, canonical_kind, mean_nll
from .optim import AdamState, adam_step
from .tensor import Tape
from .vocab import build_vocab

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr: float = 5e-4
    batch_size: int = 8
    max_iters: int = 2000
    k_max: int = 8
    d_v: int = 64
    d_h: int = 64
    d_a: int = 32
    d_s: int = 32
    min_count: int = 1
    n_sem: int = 4
    gcn_layers: int = 1
    gcn_reverse: bool = True
    grad_clip: float | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("batch_size", "max_iters", "k_max", "d_v", "d_h", "d_a", "d_s", "min_count", "n_sem", "gcn_layers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not self.lr > 0:
            raise ValueError("lr must be positive")

    @classmethod
    def desk(cls, **overrides) -> TrainConfig:
        return cls(**overrides)

    @classmethod
    def full(cls, **overrides) -> TrainConfig:
        base = dict(
            lr=5e-4, batch_size=1024, max_iters=30000, k_max=36, d_v=2048, d_h=1000, d_a=512, d_s=1000, min_count=5, n_sem=20
        )
        base.update(overrides)
        return cls(**base)

    @property
    def dims_kwargs(self) -> dict:
        return dict(d_v=self.d_v, d_h=self.d_h, d_a=self.d_a, d_s=self.d_s)

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, doc: Mapping) -> TrainConfig:
        preset = doc.get("preset", "desk")
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - fields - {"preset"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values = {k: v for k, v in doc.items() if k in fields}
        if preset == "full":
            return cls.full(**values)
        if preset != "desk":
            raise ValueError(f"unknown preset {preset!r}")
        return cls.desk(**values)

    @classmethod
    def load(cls, path) -> TrainConfig:
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class TrainResult:
    branch: Branch
    losses: list[tuple[int, float]]

    def write_loss_curve(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("iteration,loss\n")
            for it, loss in self.losses:
                fh.write(f"{it},{loss!r}\n")


def scene_graphs(
    scenes: Sequence[Scene], kind: str, n_sem: int, graphs: Mapping[str, RelationGraph] | None = None
) -> list[RelationGraph]:
    kind = canonical_kind(kind)
    out = []
    for s in scenes:
        if graphs is not None and s.image_id in graphs:
            out.append(graphs[s.image_id])
        elif kind == "spa":
            out.append(s.spatial_graph())
        else:
            out.append(s.semantic_graph(n_sem))
        if out[-1].k != s.k:
            raise ValueError(f"graph for scene {s.image_id} has {out[-1].k} vertices, scene has {s.k}")
    return out


def _clip(grads: dict[str, np.ndarray], max_norm: float) -> None:
    norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if norm > max_norm:
        for g in grads.values():
            g *= max_norm / norm


def train_branch(
    scenes: Sequence[Scene],
    kind: str,
    config: TrainConfig,
    graphs: Mapping[str, RelationGraph] | None = None,
    on_step: Callable[[int, float, Branch], bool | None] | None = None,
) -> TrainResult:
    """Adam on the batch-mean caption NLL.

    Scenes are visited in a fresh random order each epoch and each visit draws
    one of the scene's captions uniformly. ``on_step(iteration, loss, branch)``
    runs after every update; returning True stops training early.
    """
    if not scenes:
        raise ValueError("no scenes")
    for s in scenes:
        if s.k > config.k_max:
            raise ValueError(f"scene {s.image_id} has {s.k} regions, k_max is {config.k_max}")
        if s.d_v != config.d_v:
            raise ValueError(f"scene {s.image_id} has feature width {s.d_v}, config expects {config.d_v}")
        if not s.captions:
            raise ValueError(f"scene {s.image_id} has no captions")
    kind = canonical_kind(kind)
    vocab = build_vocab((c for s in scenes for c in s.captions), config.min_count)
    rng = np.random.default_rng(config.seed)
    branch = Branch.init(
        kind,
        vocab,
        DecoderDims(vocab=len(vocab), **config.dims_kwargs),
        config.n_sem,
        rng,
        layers=config.gcn_layers,
        reverse=config.gcn_reverse,
    )
    graph_list = scene_graphs(scenes, kind, config.n_sem, graphs)
    data_rng = np.random.default_rng([config.seed, 1])
    state = AdamState(lr=config.lr)
    losses = []
    order: list[int] = []
    for it in range(config.max_iters):
        batch = []
        while len(batch) < min(config.batch_size, len(scenes)):
            if not order:
                order = data_rng.permutation(len(scenes)).tolist()
            batch.append(order.pop(0))
        items = [
            (scenes[i], graph_list[i], scenes[i].captions[int(data_rng.integers(len(scenes[i].captions)))])
            for i in batch
        ]
        with Tape() as tape:
            loss = mean_nll(branch, items)
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingError(f"non-finite loss {value} at iteration {it}, scenes {[scenes[i].image_id for i in batch]}")
        grads = tape.gradient(loss, branch.params)
        if config.grad_clip is not None:
            _clip(grads, config.grad_clip)
        adam_step(state, branch.params, grads)
        losses.append((it, value))
        if it % 100 == 0:
            log.info("iter %d loss %.6f", it, value)
        if on_step is not None and on_step(it, value, branch):
            break
    return TrainResult(branch, losses)
