"""Relation-aware image captioning: spatial/semantic region graphs, a gated
graph convolution encoder, a two-layer attention LSTM decoder and late fusion
of two decoders, on a small float64 autodiff core."""

from ._accel import USE_NUMBA
from .graph import RelationGraph
from .spatial import BoundingBox, build_spatial_graph, classify_spatial, iou, relative_geometry
from .tensor import Tape, Tensor

__all__ = [
    "USE_NUMBA",
    "BoundingBox",
    "RelationGraph",
    "Tape",
    "Tensor",
    "build_spatial_graph",
    "classify_spatial",
    "iou",
    "relative_geometry",
]
__version__ = "0.1.0"
