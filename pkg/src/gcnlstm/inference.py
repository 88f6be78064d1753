"""Caption generation: greedy, beam search, and two-branch late fusion."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data import Scene
from .decoder import DecoderState, decode_step, prepare
from .graph import RelationGraph
from .model import Branch

MODES = ("sem", "spa", "fused")
DEFAULT_BEAM = 3
DEFAULT_ALPHA = 0.7
DEFAULT_MAX_LEN = 20


def fuse(p_sem: np.ndarray, p_spa: np.ndarray, alpha: float) -> np.ndarray:
    """alpha * p_sem + (1 - alpha) * p_spa."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    p_sem = np.asarray(p_sem, dtype=np.float64)
    p_spa = np.asarray(p_spa, dtype=np.float64)
    if p_sem.shape != p_spa.shape:
        raise ValueError(f"distributions over different vocabularies: {p_sem.shape} vs {p_spa.shape}")
    for name, p in (("p_sem", p_sem), ("p_spa", p_spa)):
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} sums to {p.sum()!r}, not 1")
    return alpha * p_sem + (1.0 - alpha) * p_spa


@dataclass
class Hypothesis:
    tokens: list[int]
    logprob: float
    states: tuple[DecoderState, ...]
    attention: list[tuple[np.ndarray, ...]] = field(default_factory=list)

    @property
    def length(self) -> int:
        return len(self.tokens) - 1

    @property
    def score(self) -> float:
        return self.logprob / max(self.length, 1)


@dataclass
class Caption:
    image_id: str
    words: list[str]
    score: float
    mode: str
    alpha: float | None
    attention: list[dict]

    @property
    def text(self) -> str:
        return " ".join(self.words)

    def to_json(self) -> dict:
        return {"image_id": self.image_id, "caption": self.text, "score": self.score, "mode": self.mode, "alpha": self.alpha}


class _Decoders:
    """The branches that vote on each word, with their per-image contexts."""

    def __init__(self, scene: Scene, branches: Sequence[Branch], weights: Sequence[float], graphs: Sequence[RelationGraph | None]):
        vocab = branches[0].vocab
        for b in branches[1:]:
            if b.vocab != vocab:
                raise ValueError("branches were trained with different vocabularies")
        self.vocab = vocab
        self.branches = branches
        self.weights = weights
        self.contexts = []
        for b, g in zip(branches, graphs):
            g = g if g is not None else b.graph(scene)
            self.contexts.append(prepare(b.encode(scene.features, g), b.params))
        self.blocked = np.zeros(len(vocab), dtype=bool)
        self.blocked[[vocab.bos, vocab.unk]] = True

    def initial_states(self) -> tuple[DecoderState, ...]:
        return tuple(DecoderState.zeros(b.dims.d_h) for b in self.branches)

    def step(self, states, word: int):
        """Log of the combined next-word distribution, new states, attention maps."""
        outs = [decode_step(s, word, ctx, b.params) for s, ctx, b in zip(states, self.contexts, self.branches)]
        # the single-branch path also takes log of probabilities so that alpha = 0 or 1
        # reproduces it bit for bit
        probs = outs[0].probs if len(outs) == 1 else fuse(outs[0].probs, outs[1].probs, self.weights[0])
        with np.errstate(divide="ignore"):
            logp = np.log(probs)
        logp = np.where(self.blocked, -np.inf, logp)
        return logp, tuple(o.state for o in outs), tuple(o.attention.data for o in outs)


def _setup(scene, branches: Mapping[str, Branch], mode: str, alpha: float, graphs) -> _Decoders:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    graphs = graphs or {}
    if mode == "fused":
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        picked = [branches["sem"], branches["spa"]]
        return _Decoders(scene, picked, [alpha, 1.0 - alpha], [graphs.get("sem"), graphs.get("spa")])
    return _Decoders(scene, [branches[mode]], [1.0], [graphs.get(mode)])


def _finish(scene, dec: _Decoders, hyp: Hypothesis, mode: str, alpha) -> Caption:
    names = ("sem", "spa") if mode == "fused" else (mode,)
    attention = [
        {"step": t, "branch": name, "lambda": maps[n].tolist()}
        for t, maps in enumerate(hyp.attention)
        for n, name in enumerate(names)
    ]
    return Caption(scene.image_id, dec.vocab.decode(hyp.tokens), hyp.score, mode, alpha if mode == "fused" else None, attention)


def greedy(
    scene: Scene,
    branches: Mapping[str, Branch],
    mode: str = "fused",
    alpha: float = DEFAULT_ALPHA,
    max_len: int = DEFAULT_MAX_LEN,
    graphs: Mapping[str, RelationGraph] | None = None,
) -> Caption:
    """Take the most probable word at every step (lowest id on ties)."""
    dec = _setup(scene, branches, mode, alpha, graphs)
    hyp = Hypothesis([dec.vocab.bos], 0.0, dec.initial_states())
    for _ in range(max_len):
        logp, states, att = dec.step(hyp.states, hyp.tokens[-1])
        w = int(np.argmax(logp))
        hyp = Hypothesis(hyp.tokens + [w], hyp.logprob + float(logp[w]), states, hyp.attention + [att])
        if w == dec.vocab.eos:
            break
    return _finish(scene, dec, hyp, mode, alpha)


def beam_search(
    scene: Scene,
    branches: Mapping[str, Branch],
    mode: str = "fused",
    beam: int = DEFAULT_BEAM,
    alpha: float = DEFAULT_ALPHA,
    max_len: int = DEFAULT_MAX_LEN,
    graphs: Mapping[str, RelationGraph] | None = None,
) -> Caption:
    """Beam search over the (fused) per-step distribution.

    Each live hypothesis proposes its ``beam`` best next words; the ``beam``
    best proposals overall survive. Hypotheses that emit EOS move to the
    completed pool and are ranked by log-probability per generated token.
    Search stops when no live hypothesis can still beat the best completed one.
    """
    if beam < 1:
        raise ValueError("beam must be at least 1")
    dec = _setup(scene, branches, mode, alpha, graphs)
    live = [Hypothesis([dec.vocab.bos], 0.0, dec.initial_states())]
    completed: list[Hypothesis] = []
    for step in range(max_len):
        proposals = []
        expanded = []
        for h_idx, h in enumerate(live):
            logp, states, att = dec.step(h.states, h.tokens[-1])
            expanded.append((states, att))
            top = np.argsort(-logp, kind="stable")[:beam]
            proposals.extend((h.logprob + float(logp[w]), h_idx, int(w)) for w in top if logp[w] > -np.inf)
        proposals.sort(key=lambda p: (-p[0], p[1], p[2]))
        new_live = []
        for total, h_idx, w in proposals[:beam]:
            parent = live[h_idx]
            states, att = expanded[h_idx]
            child = Hypothesis(parent.tokens + [w], total, states, parent.attention + [att])
            (completed if w == dec.vocab.eos else new_live).append(child)
        live = new_live
        if not live:
            break
        if step == max_len - 1:
            completed.extend(live)
            break
        if completed:
            best_done = max(h.score for h in completed)
            # a live prefix with log-prob L can at best reach L / max_len
            if max(h.logprob for h in live) / max_len <= best_done:
                break
    best = max(completed, key=lambda h: h.score)
    return _finish(scene, dec, best, mode, alpha)


def generate(
    scene: Scene,
    branches: Mapping[str, Branch],
    mode: str = "fused",
    beam: int = DEFAULT_BEAM,
    alpha: float = DEFAULT_ALPHA,
    max_len: int = DEFAULT_MAX_LEN,
    graphs: Mapping[str, RelationGraph] | None = None,
) -> Caption:
    return beam_search(scene, branches, mode=mode, beam=beam, alpha=alpha, max_len=max_len, graphs=graphs)


def fused_step_distributions(scene: Scene, branches: Mapping[str, Branch], tokens: Sequence[int], alpha: float):
    """Per-step (p_sem, p_spa, fused) along a fixed token history."""
    sem, spa = branches["sem"], branches["spa"]
    ctxs = [prepare(b.encode(scene.features, b.graph(scene)), b.params) for b in (sem, spa)]
    states = [DecoderState.zeros(b.dims.d_h) for b in (sem, spa)]
    out = []
    for w in tokens:
        steps = [decode_step(s, w, c, b.params) for s, c, b in zip(states, ctxs, (sem, spa))]
        states = [o.state for o in steps]
        out.append((steps[0].probs, steps[1].probs, fuse(steps[0].probs, steps[1].probs, alpha)))
    return out
