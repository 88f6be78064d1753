"""Directed, labelled relation graphs over region indices."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SELF_LABEL = 0
SELF_NAME = "self"

# incidence transform slots used by the graph convolution
FORWARD, REVERSE, SELF = 0, 1, 2


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class RelationGraph:
    """``edges`` holds (src, dst, label) triples sorted, self-loops included.

    Label 0 is reserved for self-loops; ``label_names[0] == "self"`` and
    relation labels run from 1 to ``n_labels``.
    """

    k: int
    edges: tuple[tuple[int, int, int], ...]
    label_names: tuple[str, ...]

    @property
    def n_labels(self) -> int:
        return len(self.label_names) - 1

    @property
    def self_label(self) -> int:
        return SELF_LABEL

    @classmethod
    def build(cls, k: int, edges, label_names) -> RelationGraph:
        label_names = tuple(label_names)
        if not label_names or label_names[0] != SELF_NAME:
            raise GraphError(f"label_names must start with {SELF_NAME!r}")
        seen = set()
        out = []
        for src, dst, label in edges:
            src, dst, label = int(src), int(dst), int(label)
            if src == dst:
                raise GraphError(f"explicit self edge {src}->{dst}; self-loops are added automatically")
            if not (0 <= src < k and 0 <= dst < k):
                raise GraphError(f"edge {src}->{dst} out of range for {k} vertices")
            if not 1 <= label < len(label_names):
                raise GraphError(f"edge {src}->{dst} label {label} outside 1..{len(label_names) - 1}")
            if (src, dst) in seen:
                raise GraphError(f"duplicate edge {src}->{dst}")
            seen.add((src, dst))
            out.append((src, dst, label))
        out.extend((i, i, SELF_LABEL) for i in range(k))
        return cls(k, tuple(sorted(out)), label_names)

    def relation_edges(self) -> list[tuple[int, int, int]]:
        return [e for e in self.edges if e[0] != e[1]]

    def incidences(self, reverse: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(target, source, transform slot, label) arrays for :func:`tensor.graph_conv`.

        An edge src->dst sends src's feature to dst through the forward slot and,
        when ``reverse`` is set, dst's feature to src through the reverse slot.
        """
        rows = []
        for src, dst, label in self.edges:
            if src == dst:
                rows.append((src, src, SELF, label))
                continue
            rows.append((dst, src, FORWARD, label))
            if reverse:
                rows.append((src, dst, REVERSE, label))
        arr = np.array(rows, dtype=np.int64).reshape(-1, 4)
        return tuple(np.ascontiguousarray(arr[:, c]) for c in range(4))

    def permuted(self, perm) -> RelationGraph:
        """Graph with vertex ``i`` renamed to ``perm[i]``."""
        perm = [int(p) for p in perm]
        return RelationGraph.build(
            self.k, [(perm[s], perm[d], lab) for s, d, lab in self.relation_edges()], self.label_names
        )

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "edges": [{"src": s, "dst": d, "label": lab} for s, d, lab in self.relation_edges()],
            "labels": list(self.label_names),
        }

    @classmethod
    def from_json(cls, doc: dict) -> RelationGraph:
        return cls.build(doc["k"], [(e["src"], e["dst"], e["label"]) for e in doc["edges"]], doc["labels"])


def dumps_graph(graph: RelationGraph, **extra) -> str:
    """One JSON object on one line (the graph export format)."""
    return json.dumps({**extra, **graph.to_json()}, sort_keys=True)


def format_graph(graph: RelationGraph) -> str:
    """Multi-line export with one edge per line, so errors can cite a line."""
    doc = graph.to_json()
    lines = ["{", '  "edges": [']
    rows = [json.dumps(e, sort_keys=True) for e in doc["edges"]]
    lines += [f"    {r}," for r in rows[:-1]] + [f"    {r}" for r in rows[-1:]]
    lines += ["  ],", f'  "k": {doc["k"]},', f'  "labels": {json.dumps(doc["labels"])}', "}"]
    return "\n".join(lines) + "\n"


def save_graph_file(path, graph: RelationGraph) -> None:
    Path(path).write_text(format_graph(graph))


def load_graph_file(path, labels=None) -> RelationGraph:
    """Load a single exported graph, reporting bad edges with their line number.

    ``labels`` (if given) overrides the label names stored in the file.
    """
    text = Path(path).read_text()
    return parse_graph(text, labels=labels)


def parse_graph(text: str, labels=None, line_offset: int = 0) -> RelationGraph:
    doc = json.loads(text)
    names = tuple(labels) if labels is not None else tuple(doc.get("labels", ()))
    k = int(doc["k"])
    positions = _edge_positions(text)
    seen = set()
    for n, e in enumerate(doc["edges"]):
        line = line_offset + (text.count("\n", 0, positions[n]) + 1 if n < len(positions) else 1)
        src, dst, lab = e.get("src"), e.get("dst"), e.get("label")
        if not all(isinstance(v, int) for v in (src, dst, lab)):
            raise GraphError(f"line {line}: edge #{n} must have integer src, dst, label")
        if not (0 <= src < k and 0 <= dst < k) or src == dst:
            raise GraphError(f"line {line}: edge #{n} {src}->{dst} has an invalid vertex for k={k}")
        if not 1 <= lab < len(names):
            raise GraphError(f"line {line}: edge #{n} label {lab} outside 1..{len(names) - 1}")
        if (src, dst) in seen:
            raise GraphError(f"line {line}: edge #{n} duplicates {src}->{dst}")
        seen.add((src, dst))
    return RelationGraph.build(k, [(e["src"], e["dst"], e["label"]) for e in doc["edges"]], names)


def _edge_positions(text: str) -> list[int]:
    # every edge object carries exactly one "src" key
    out, pos = [], text.find('"src"')
    while pos != -1:
        out.append(pos)
        pos = text.find('"src"', pos + 1)
    return out
