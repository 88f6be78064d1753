"""Two-layer attention LSTM caption decoder.

Per step t, with refined region features V (K x D_v) and their mean v_bar:

    h1, c1 = LSTM1([h2_prev, W_s[:, w_t], v_bar], h1_prev, c1_prev)
    a      = tanh(V W_f^T + W_h h1) W_a^T           (K,)
    lam    = softmax(a)
    v_hat  = sum_i lam_i V_i
    h2, c2 = LSTM2([v_hat, h1], h2_prev, c2_prev)
    logits = W_out h2 + b_out
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import params as P
from . import tensor as T
from .tensor import ShapeError, Tensor

PREFIX = "dec"


@dataclass(frozen=True)
class DecoderDims:
    vocab: int
    d_v: int
    d_h: int = 1000
    d_a: int = 512
    d_s: int = 1000


def init_decoder(rng: np.random.Generator, dims: DecoderDims) -> dict[str, Tensor]:
    V, Dv, H, Da, Ds = dims.vocab, dims.d_v, dims.d_h, dims.d_a, dims.d_s
    n1 = H + Ds + Dv + H
    n2 = Dv + H + H
    return {
        f"{PREFIX}.W_s": P.glorot(rng, (Ds, V), V, Ds),
        f"{PREFIX}.lstm1.W": P.glorot(rng, (4 * H, n1), n1, 4 * H),
        f"{PREFIX}.lstm1.b": P.zeros((4 * H,)),
        f"{PREFIX}.lstm2.W": P.glorot(rng, (4 * H, n2), n2, 4 * H),
        f"{PREFIX}.lstm2.b": P.zeros((4 * H,)),
        f"{PREFIX}.att.W_a": P.glorot(rng, (1, Da), Da, 1),
        f"{PREFIX}.att.W_f": P.glorot(rng, (Da, Dv), Dv, Da),
        f"{PREFIX}.att.W_h": P.glorot(rng, (Da, H), H, Da),
        f"{PREFIX}.out.W": P.glorot(rng, (V, H), H, V),
        f"{PREFIX}.out.b": P.zeros((V,)),
    }


def decoder_dims(params: dict[str, Tensor]) -> DecoderDims:
    Ds, V = params[f"{PREFIX}.W_s"].shape
    Da, Dv = params[f"{PREFIX}.att.W_f"].shape
    H = params[f"{PREFIX}.att.W_h"].shape[1]
    return DecoderDims(vocab=V, d_v=Dv, d_h=H, d_a=Da, d_s=Ds)


class DecoderState(NamedTuple):
    h1: Tensor
    c1: Tensor
    h2: Tensor
    c2: Tensor

    @classmethod
    def zeros(cls, d_h: int) -> DecoderState:
        return cls(*(Tensor(np.zeros(d_h)) for _ in range(4)))


class Context(NamedTuple):
    """Per-image quantities that do not change across decoding steps."""

    regions: Tensor  # (K, D_v) refined features
    mean: Tensor  # (D_v,)
    keys: Tensor  # (K, D_a) = regions W_f^T


def prepare(encoded: Tensor, params: dict[str, Tensor]) -> Context:
    W_f = params[f"{PREFIX}.att.W_f"]
    if encoded.data.ndim != 2 or encoded.shape[1] != W_f.shape[1]:
        raise ShapeError(f"decoder expects regions of width {W_f.shape[1]}, got {encoded.shape}")
    return Context(encoded, T.mean(encoded, axis=0), T.affine(encoded, W_f))


class StepOutput(NamedTuple):
    logits: Tensor
    attention: Tensor
    state: DecoderState

    @property
    def probs(self) -> np.ndarray:
        return T._softmax(self.logits.data)

    @property
    def log_probs(self) -> np.ndarray:
        return T._log_softmax(self.logits.data)


def decode_step(state: DecoderState, word: int, ctx: Context, params: dict[str, Tensor]) -> StepOutput:
    p = params
    W_s = p[f"{PREFIX}.W_s"]
    if not 0 <= word < W_s.shape[1]:
        raise ShapeError(f"word index {word} out of range for vocabulary of {W_s.shape[1]}")
    if state.h1.shape[0] != p[f"{PREFIX}.att.W_h"].shape[1]:
        raise ShapeError(f"state width {state.h1.shape[0]} does not match decoder width {p[f'{PREFIX}.att.W_h'].shape[1]}")
    x1 = T.concat([state.h2, T.embedding(W_s, word), ctx.mean])
    h1, c1 = T.lstm_cell(x1, state.h1, state.c1, p[f"{PREFIX}.lstm1.W"], p[f"{PREFIX}.lstm1.b"])
    scores = T.affine(T.tanh(T.add(ctx.keys, T.matmul(p[f"{PREFIX}.att.W_h"], h1))), p[f"{PREFIX}.att.W_a"])
    lam = T.softmax(T.reshape(scores, (ctx.regions.shape[0],)))
    attended = T.weighted_sum(lam, ctx.regions)
    h2, c2 = T.lstm_cell(T.concat([attended, h1]), state.h2, state.c2, p[f"{PREFIX}.lstm2.W"], p[f"{PREFIX}.lstm2.b"])
    logits = T.affine(h2, p[f"{PREFIX}.out.W"], p[f"{PREFIX}.out.b"])
    return StepOutput(logits, lam, DecoderState(h1, c1, h2, c2))


def sentence_nll(tokens: Sequence[int], encoded: Tensor, params: dict[str, Tensor]) -> Tensor:
    """Summed next-token cross-entropy with teacher forcing.

    ``tokens`` is the full wrapped sequence BOS w_1 .. w_n EOS.
    """
    V = params[f"{PREFIX}.W_s"].shape[1]
    if len(tokens) < 2:
        raise ValueError("caption must contain at least BOS and EOS")
    for t in tokens:
        if not 0 <= t < V:
            raise ValueError(f"token id {t} outside vocabulary of {V}")
    ctx = prepare(encoded, params)
    state = DecoderState.zeros(params[f"{PREFIX}.att.W_h"].shape[1])
    losses = []
    for word, target in zip(tokens[:-1], tokens[1:]):
        out = decode_step(state, word, ctx, params)
        losses.append(T.cross_entropy(out.logits, target))
        state = out.state
    return T.add_n(losses)
