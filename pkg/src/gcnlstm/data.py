"""Scenes, the scenes JSONL format, and the synthetic corpus generator."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .graph import RelationGraph
from .semantic import semantic_labels
from .spatial import BoundingBox, build_spatial_graph, classify_spatial
from .vocab import tokenize

K_MAX = 36

CATEGORY_NAMES = (
    "person", "dog", "cat", "horse", "car", "bus", "tree", "table", "chair", "cup", "ball", "kite",
    "bird", "boat", "bench", "bottle", "clock", "vase", "bowl", "plate", "laptop", "phone", "book", "lamp",
    "sheep", "cow", "train", "truck", "bike", "sign", "umbrella", "bag", "hat", "shoe", "sofa", "bed",
    "pizza", "cake", "apple", "banana",
)  # fmt: skip

# relation word between the two named regions, keyed by spatial class
RELATION_WORDS = {
    1: "containing",
    2: "inside",
    3: "overlapping",
    4: "east",
    5: "northeast",
    6: "north",
    7: "northwest",
    8: "west",
    9: "southwest",
    10: "south",
    11: "southeast",
}


@dataclass
class Scene:
    image_id: str
    boxes: list[BoundingBox]
    features: np.ndarray  # (K, D_v)
    captions: list[list[str]]
    union_features: dict[tuple[int, int], np.ndarray] | None = None
    semantic_edges: list[tuple[int, int, int]] | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        k = len(self.boxes)
        if k < 1:
            raise ValueError(f"scene {self.image_id}: needs at least one region")
        if self.features.ndim != 2 or self.features.shape[0] != k:
            raise ValueError(f"scene {self.image_id}: {k} boxes but features of shape {self.features.shape}")

    @property
    def k(self) -> int:
        return len(self.boxes)

    @property
    def d_v(self) -> int:
        return self.features.shape[1]

    def spatial_graph(self) -> RelationGraph:
        return build_spatial_graph(self.boxes)

    def semantic_graph(self, n_sem: int) -> RelationGraph:
        if self.semantic_edges is None:
            raise ValueError(f"scene {self.image_id}: no semantic edges; build them with a relation classifier")
        return RelationGraph.build(self.k, self.semantic_edges, semantic_labels(n_sem))

    def to_json(self) -> dict:
        doc = {
            "image_id": self.image_id,
            "regions": [
                {"box": list(b.as_tuple()), "feature": f.tolist()} for b, f in zip(self.boxes, self.features)
            ],
            "captions": [list(c) for c in self.captions],
        }
        if self.union_features is not None:
            doc["union_features"] = [
                {"i": i, "j": j, "union_feature": v.tolist()} for (i, j), v in sorted(self.union_features.items())
            ]
        if self.semantic_edges is not None:
            doc["semantic_edges"] = [{"src": s, "dst": d, "label": lab} for s, d, lab in sorted(self.semantic_edges)]
        doc.update(self.extra)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> Scene:
        doc = dict(doc)
        regions = doc.pop("regions")
        captions = [tokenize(c) if isinstance(c, str) else [t.lower() for t in c] for c in doc.pop("captions", [])]
        union = doc.pop("union_features", None)
        edges = doc.pop("semantic_edges", None)
        return cls(
            image_id=str(doc.pop("image_id")),
            boxes=[BoundingBox(*r["box"]) for r in regions],
            features=np.array([r["feature"] for r in regions], dtype=np.float64),
            captions=captions,
            union_features=None
            if union is None
            else {(int(u["i"]), int(u["j"])): np.asarray(u["union_feature"], dtype=np.float64) for u in union},
            semantic_edges=None if edges is None else [(int(e["src"]), int(e["dst"]), int(e["label"])) for e in edges],
            extra=doc,
        )


def write_scenes(path, scenes: Iterable[Scene]) -> None:
    with open(path, "w") as fh:
        for s in scenes:
            fh.write(json.dumps(s.to_json(), sort_keys=True) + "\n")


def read_scenes(path) -> list[Scene]:
    out = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(Scene.from_json(json.loads(line)))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"{path}:{n}: bad scene record: {exc}") from exc
    return out


def pair_arrays(scene: Scene) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Subject, object, union features and labels (0 = none) for every ordered pair."""
    if scene.union_features is None:
        raise ValueError(f"scene {scene.image_id}: no union features")
    labels = {(s, d): lab for s, d, lab in scene.semantic_edges or ()}
    pairs = [(i, j) for i in range(scene.k) for j in range(scene.k) if i != j]
    subj = scene.features[[i for i, _ in pairs]] if pairs else np.zeros((0, scene.d_v))
    obj = scene.features[[j for _, j in pairs]] if pairs else np.zeros((0, scene.d_v))
    union = np.array([scene.union_features[p] for p in pairs]).reshape(-1, scene.d_v)
    return subj, obj, union, np.array([labels.get(p, 0) for p in pairs], dtype=np.int64)


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SyntheticSpec:
    d_v: int = 64
    n_sem: int = 4
    n_categories: int = 12
    noise: float = 0.1
    relation_strength: float = 1.0
    relation_density: float = 0.35
    max_captions: int = 5

    def __post_init__(self):
        if self.n_categories > len(CATEGORY_NAMES):
            raise ValueError(f"at most {len(CATEGORY_NAMES)} categories available")
        if self.n_categories + self.n_sem + 1 > self.d_v:
            raise ValueError(
                f"d_v={self.d_v} too small for {self.n_categories} category slots and {self.n_sem + 1} relation slots"
            )

    @property
    def relation_offset(self) -> int:
        return self.n_categories


def relation_table(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """Ground-truth predicate for each ordered category pair (0 = none)."""
    n = spec.n_categories
    has = rng.random((n, n)) < spec.relation_density
    labels = rng.integers(1, spec.n_sem + 1, size=(n, n))
    table = np.where(has, labels, 0)
    np.fill_diagonal(table, 0)
    return table


def category_feature(spec: SyntheticSpec, cat: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(0.0, spec.noise, spec.d_v)
    v[cat] += 1.0
    return v


def union_feature(spec: SyntheticSpec, vi: np.ndarray, vj: np.ndarray, label: int, rng: np.random.Generator) -> np.ndarray:
    u = np.maximum(vi, vj) + rng.normal(0.0, spec.noise, spec.d_v)
    u[spec.relation_offset + label] += spec.relation_strength
    return u


def random_box(rng: np.random.Generator) -> BoundingBox:
    w, h = rng.uniform(0.1, 0.5, 2)
    x1 = rng.uniform(0.0, 1.0 - w)
    y1 = rng.uniform(0.0, 1.0 - h)
    return BoundingBox(x1, y1, x1 + w, y1 + h)


def caption_for(cat_names: Sequence[str], boxes: Sequence[BoundingBox], i: int, j: int) -> list[str] | None:
    cls = classify_spatial(boxes[i], boxes[j])
    if cls is None:
        return None
    return ["a", cat_names[i], RELATION_WORDS[cls], "a", cat_names[j]]


def generate_synthetic_corpus(
    n_scenes: int, k: int, d_v: int = 64, seed: int = 0, spec: SyntheticSpec | None = None
) -> list[Scene]:
    """Random scenes with category-coded features and template captions.

    Each caption names two regions and the spatial class of the ordered pair.
    Categories within a scene are distinct, so the names identify the regions.
    """
    if n_scenes < 1 or k < 1:
        raise ValueError("n_scenes and k must be positive")
    spec = spec or SyntheticSpec(d_v=d_v, n_categories=max(12, k))
    if spec.d_v != d_v:
        raise ValueError(f"spec.d_v={spec.d_v} disagrees with d_v={d_v}")
    if k > spec.n_categories:
        raise ValueError(f"k={k} exceeds the {spec.n_categories} categories")
    rng = np.random.default_rng(seed)
    table = relation_table(spec, rng)
    scenes = []
    for n in range(n_scenes):
        cats = rng.choice(spec.n_categories, size=k, replace=False)
        names = [CATEGORY_NAMES[c] for c in cats]
        while True:
            boxes = [random_box(rng) for _ in range(k)]
            related = [(i, j) for i in range(k) for j in range(k) if i != j and classify_spatial(boxes[i], boxes[j])]
            if related or k == 1:
                break
        feats = np.array([category_feature(spec, c, rng) for c in cats])
        union = {}
        edges = []
        for i in range(k):
            for j in range(k):
                if i == j:
                    continue
                label = int(table[cats[i], cats[j]])
                union[(i, j)] = union_feature(spec, feats[i], feats[j], label, rng)
                if label:
                    edges.append((i, j, label))
        if k == 1:
            captions = [["a", names[0]]]
        else:
            n_cap = int(rng.integers(1, min(spec.max_captions, len(related)) + 1))
            picks = rng.choice(len(related), size=n_cap, replace=False)
            captions = [caption_for(names, boxes, *related[p]) for p in sorted(picks)]
        scenes.append(
            Scene(
                image_id=f"syn{n:05d}",
                boxes=boxes,
                features=feats,
                captions=captions,
                union_features=union,
                semantic_edges=edges,
            )
        )
    return scenes


def make_relation_pairs(
    n: int, spec: SyntheticSpec, seed: int = 0
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Balanced labelled pairs whose union feature carries the label."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, spec.n_sem + 1, size=n)
    subj, obj, union = (np.empty((n, spec.d_v)) for _ in range(3))
    for r in range(n):
        ci, cj = rng.choice(spec.n_categories, size=2, replace=False)
        subj[r] = category_feature(spec, ci, rng)
        obj[r] = category_feature(spec, cj, rng)
        union[r] = union_feature(spec, subj[r], obj[r], int(labels[r]), rng)
    return subj, obj, union, labels.astype(np.int64)
