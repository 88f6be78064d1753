"""Parameter initialisation and the JSON checkpoint format."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .tensor import Tensor

FORMAT_VERSION = 1
META_KEY = "meta"


def glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> Tensor:
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-a, a, size=shape))


def zeros(shape: tuple[int, ...]) -> Tensor:
    return Tensor(np.zeros(shape))


def dumps_checkpoint(params: dict[str, Tensor], meta: dict | None = None) -> str:
    """Serialise to a JSON document with lexicographically sorted keys.

    Floats are written with ``repr`` precision, so a load reproduces every bit.
    """
    doc: dict = {name: {"shape": list(p.shape), "data": p.data.ravel().tolist()} for name, p in params.items()}
    doc["format_version"] = FORMAT_VERSION
    if meta is not None:
        doc[META_KEY] = meta
    return json.dumps(doc, sort_keys=True, allow_nan=False)


def loads_checkpoint(text: str) -> tuple[dict[str, Tensor], dict]:
    doc = json.loads(text)
    version = doc.pop("format_version", None)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version {version!r}")
    meta = doc.pop(META_KEY, {})
    params = {}
    for name, entry in doc.items():
        data = np.array(entry["data"], dtype=np.float64)
        shape = tuple(entry["shape"])
        if data.size != math.prod(shape):
            raise ValueError(f"checkpoint entry {name!r}: {data.size} values for shape {shape}")
        params[name] = Tensor(data.reshape(shape))
    return params, meta


def save_checkpoint(path, params: dict[str, Tensor], meta: dict | None = None) -> None:
    Path(path).write_text(dumps_checkpoint(params, meta))


def load_checkpoint(path) -> tuple[dict[str, Tensor], dict]:
    return loads_checkpoint(Path(path).read_text())
