"""Spatial relation graph from bounding boxes.

Eleven relation classes for an ordered region pair (a, b):

1. ``inside``  - a contains b
2. ``cover``   - a is contained in b
3. ``overlap`` - IoU above 0.5 (also used when the centroids coincide)
4..11          - the direction of b's centroid seen from a's, one class per
                 45 degree sector counterclockwise from the +x axis

Pairs whose centroid distance exceeds half the image diagonal get no edge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .graph import SELF_NAME, RelationGraph

SPATIAL_LABELS = (SELF_NAME, "inside", "cover", "overlap") + tuple(f"sector_{s}" for s in range(1, 9))
N_SPATIAL = 11
INSIDE, COVER, OVERLAP = 1, 2, 3


@dataclass(frozen=True)
class BoundingBox:
    """Normalised image coordinates, y growing downward."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(c) and 0.0 <= c <= 1.0 for c in coords):
            raise ValueError(f"box coordinates must lie in [0, 1]: {coords}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"box must have x1 < x2 and y1 < y2: {coords}")

    @property
    def centroid(self) -> tuple[float, float]:
        return 0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2)

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


class Geometry(NamedTuple):
    distance: float
    angle: float  # degrees in [0, 360); nan when the centroids coincide
    ratio: float  # distance / image diagonal
    coincident: bool


def iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def relative_geometry(a: BoundingBox, b: BoundingBox) -> Geometry:
    (xa, ya), (xb, yb) = a.centroid, b.centroid
    dx, dy = xb - xa, ya - yb
    d = math.sqrt(dx * dx + dy * dy)
    if dx == 0.0 and dy == 0.0:
        return Geometry(0.0, math.nan, 0.0, True)
    theta = math.degrees(math.atan2(dy, dx))
    if theta < 0.0:
        theta += 360.0
    if theta >= 360.0:
        theta = 0.0
    return Geometry(d, theta, d / math.sqrt(2.0), False)


def classify_spatial(a: BoundingBox, b: BoundingBox) -> int | None:
    """Class id 1..11 for the ordered pair (a, b), or None when unrelated."""
    cls = kernels.classify_box_pair(*a.as_tuple(), *b.as_tuple())
    return int(cls) or None


def opposite_class(cls: int) -> int:
    """Class of (b, a) given the class of (a, b)."""
    if cls == INSIDE:
        return COVER
    if cls == COVER:
        return INSIDE
    if cls == OVERLAP:
        return OVERLAP
    return (cls - 4 + 4) % 8 + 4


def boxes_array(boxes: Sequence[BoundingBox]) -> np.ndarray:
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64).reshape(-1, 4)


def build_spatial_graph(boxes: Sequence[BoundingBox]) -> RelationGraph:
    k = len(boxes)
    if k < 1:
        raise ValueError("need at least one box")
    arr = boxes_array(boxes)
    ii, jj = np.nonzero(~np.eye(k, dtype=bool))
    classes = kernels.classify_pairs(np.ascontiguousarray(arr[ii]), np.ascontiguousarray(arr[jj]))
    edges = [(int(i), int(j), int(c)) for i, j, c in zip(ii, jj, classes) if c]
    return RelationGraph.build(k, edges, SPATIAL_LABELS)
