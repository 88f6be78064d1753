"""Captioning a scene set, BLEU reports and the fusion-weight sweep."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .bleu import bleu_scores, corpus_bleu
from .data import Scene
from .inference import DEFAULT_BEAM, DEFAULT_MAX_LEN, Caption, generate
from .model import Branch


@dataclass
class EvalReport:
    bleu: dict[str, float]
    captions: list[dict]
    config: dict = field(default_factory=dict)
    seed: int | None = None

    def to_json(self) -> dict:
        return {"bleu": self.bleu, "captions": self.captions, "config": self.config, "seed": self.seed}


def caption_all(
    scenes: Sequence[Scene], branches: Mapping[str, Branch], mode: str, beam: int, alpha: float, max_len: int = DEFAULT_MAX_LEN
) -> list[Caption]:
    return [generate(s, branches, mode=mode, beam=beam, alpha=alpha, max_len=max_len) for s in scenes]


def evaluate_captions(scenes: Sequence[Scene], captions: Sequence[Sequence[str]], config=None, seed=None) -> EvalReport:
    refs = [s.captions for s in scenes]
    return EvalReport(
        bleu=bleu_scores([list(c) for c in captions], refs),
        captions=[{"image_id": s.image_id, "caption": " ".join(c)} for s, c in zip(scenes, captions)],
        config=dict(config or {}),
        seed=seed,
    )


def alpha_sweep(
    scenes: Sequence[Scene],
    branches: Mapping[str, Branch],
    alphas: Sequence[float],
    beam: int = DEFAULT_BEAM,
    max_len: int = DEFAULT_MAX_LEN,
) -> list[tuple[float, float]]:
    """(alpha, corpus BLEU@4) for fused decoding at each alpha."""
    refs = [s.captions for s in scenes]
    rows = []
    for a in alphas:
        caps = caption_all(scenes, branches, "fused", beam, float(a), max_len)
        rows.append((float(a), corpus_bleu([c.words for c in caps], refs, 4)))
    return rows


def alpha_grid(points: int) -> list[float]:
    if points < 2:
        raise ValueError("need at least two grid points")
    return [float(a) for a in np.linspace(0.0, 1.0, points)]


def format_sweep_csv(rows: Sequence[tuple[float, float]]) -> str:
    return "alpha,bleu4\n" + "".join(f"{a!r},{b!r}\n" for a, b in rows)
