"""Hot inner loops, each in two flavours.

Every kernel exists as an explicit-loop function (compiled with ``numba.njit``
when available) and a vectorised numpy function. The public names at the bottom
of the module dispatch on :data:`gcnlstm._accel.USE_NUMBA`; tests and the
benchmark call both flavours directly.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# spatial relation classes for box pairs


@njit(cache=True)
def _octant(dx, dy):
    # floor(theta / 45deg) for theta = atan2(dy, dx) in [0, 360), evaluated
    # with comparisons only so that (dx, dy) -> (-dx, -dy) maps exactly to
    # the opposite octant.
    if dy >= 0.0 and dx > 0.0:
        return 0 if dy < dx else 1
    if dx <= 0.0 and dy > 0.0:
        return 2 if -dx < dy else 3
    if dy <= 0.0 and dx < 0.0:
        return 4 if -dy < -dx else 5
    return 6 if dx < -dy else 7


@njit(cache=True)
def classify_box_pair(ax1, ay1, ax2, ay2, bx1, by1, bx2, by2):
    """Spatial class of the ordered pair (a, b); 0 means no edge."""
    identical = ax1 == bx1 and ay1 == by1 and ax2 == bx2 and ay2 == by2
    if not identical:
        if ax1 <= bx1 and ay1 <= by1 and bx2 <= ax2 and by2 <= ay2:
            return 1
        if bx1 <= ax1 and by1 <= ay1 and ax2 <= bx2 and ay2 <= by2:
            return 2
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    inter = iw * ih if (iw > 0.0 and ih > 0.0) else 0.0
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if 2.0 * inter > union:
        return 3
    # image y grows downward; flip to the usual counterclockwise convention
    dx = 0.5 * (bx1 + bx2) - 0.5 * (ax1 + ax2)
    dy = 0.5 * (ay1 + ay2) - 0.5 * (by1 + by2)
    if dx == 0.0 and dy == 0.0:
        return 3
    # phi = d / sqrt(2) <= 0.5, squared to keep the boundary free of sqrt rounding
    if dx * dx + dy * dy > 0.5:
        return 0
    return _octant(dx, dy) + 4


@njit(cache=True)
def classify_pairs_loop(a, b):
    n = a.shape[0]
    out = np.zeros(n, dtype=np.int64)
    for k in range(n):
        out[k] = classify_box_pair(a[k, 0], a[k, 1], a[k, 2], a[k, 3], b[k, 0], b[k, 1], b[k, 2], b[k, 3])
    return out


def classify_pairs_numpy(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ax1, ay1, ax2, ay2 = a.T
    bx1, by1, bx2, by2 = b.T
    identical = np.all(a == b, axis=1)
    a_holds_b = (ax1 <= bx1) & (ay1 <= by1) & (bx2 <= ax2) & (by2 <= ay2) & ~identical
    b_holds_a = (bx1 <= ax1) & (by1 <= ay1) & (ax2 <= bx2) & (ay2 <= by2) & ~identical
    iw = np.minimum(ax2, bx2) - np.maximum(ax1, bx1)
    ih = np.minimum(ay2, by2) - np.maximum(ay1, by1)
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    overlap = 2.0 * inter > union
    dx = 0.5 * (bx1 + bx2) - 0.5 * (ax1 + ax2)
    dy = 0.5 * (ay1 + ay2) - 0.5 * (by1 + by2)
    same_centre = (dx == 0) & (dy == 0)
    near = dx * dx + dy * dy <= 0.5
    octant = np.select(
        [
            (dy >= 0) & (dx > 0),
            (dx <= 0) & (dy > 0),
            (dy <= 0) & (dx < 0),
        ],
        [
            np.where(dy < dx, 0, 1),
            np.where(-dx < dy, 2, 3),
            np.where(-dy < -dx, 4, 5),
        ],
        default=np.where(dx < -dy, 6, 7),
    )
    return np.select(
        [a_holds_b, b_holds_a, overlap, same_centre, near],
        [1, 2, 3, 3, octant + 4],
        default=0,
    ).astype(np.int64)


# ---------------------------------------------------------------------------
# gated, labelled graph convolution
#
# An "incidence" e routes a message from vertex src[e] to vertex tgt[e] using
# transform W[wi[e]], bias b[bi[e]] and gate row gw[wi[e]], gate bias gb[bi[e]].
# Messages arriving at a vertex are summed after sorting each component, which
# makes the sum independent of incidence order and vertex numbering.


@njit(cache=True)
def _sigmoid(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


@njit(cache=True)
def graph_conv_forward_loop(X, W, b, gw, gb, tgt, src, wi, bi, gated):
    K, D = X.shape
    M = W.shape[0]
    E = tgt.shape[0]
    T = np.zeros((M, K, D))
    G = np.zeros((M, K))
    for m in range(M):
        for k in range(K):
            for r in range(D):
                s = 0.0
                for c in range(D):
                    s += W[m, r, c] * X[k, c]
                T[m, k, r] = s
            s = 0.0
            for c in range(D):
                s += gw[m, c] * X[k, c]
            G[m, k] = s
    lin = np.empty((E, D))
    gate = np.ones(E)
    for e in range(E):
        for r in range(D):
            lin[e, r] = T[wi[e], src[e], r] + b[bi[e], r]
        if gated:
            gate[e] = _sigmoid(G[wi[e], src[e]] + gb[bi[e]])
    order = np.argsort(tgt, kind="mergesort")
    pre = np.zeros((K, D))
    start = 0
    buf = np.empty(E)
    while start < E:
        v = tgt[order[start]]
        stop = start
        while stop < E and tgt[order[stop]] == v:
            stop += 1
        n = stop - start
        for r in range(D):
            for q in range(n):
                e = order[start + q]
                buf[q] = gate[e] * lin[e, r]
            vals = np.sort(buf[:n])
            s = 0.0
            for q in range(n):
                s += vals[q]
            pre[v, r] = s
        start = stop
    out = np.maximum(pre, 0.0)
    return out, pre, lin, gate


@njit(cache=True)
def graph_conv_backward_loop(dout, X, W, gw, tgt, src, wi, bi, pre, lin, gate, gated, n_bias):
    K, D = X.shape
    M = W.shape[0]
    E = tgt.shape[0]
    dX = np.zeros((K, D))
    dW = np.zeros((M, D, D))
    db = np.zeros((n_bias, D))
    dgw = np.zeros((M, D))
    dgb = np.zeros(n_bias)
    dpre = np.where(pre > 0.0, dout, 0.0)
    for e in range(E):
        t = tgt[e]
        s = src[e]
        m = wi[e]
        l = bi[e]
        g = gate[e]
        if gated:
            dg = 0.0
            for r in range(D):
                dg += dpre[t, r] * lin[e, r]
            dz = dg * g * (1.0 - g)
            dgb[l] += dz
            for c in range(D):
                dgw[m, c] += dz * X[s, c]
                dX[s, c] += dz * gw[m, c]
        for r in range(D):
            dl = g * dpre[t, r]
            if dl != 0.0:
                db[l, r] += dl
                for c in range(D):
                    dW[m, r, c] += dl * X[s, c]
                    dX[s, c] += W[m, r, c] * dl
    return dX, dW, db, dgw, dgb


def _sigmoid_np(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def graph_conv_forward_numpy(X, W, b, gw, gb, tgt, src, wi, bi, gated):
    K, D = X.shape
    # row-wise products reduced along a contiguous axis: bits do not depend on row position
    T = (W[:, None, :, :] * X[None, :, None, :]).sum(axis=-1)
    lin = T[wi, src] + b[bi]
    if gated:
        G = (gw[:, None, :] * X[None, :, :]).sum(axis=-1)
        gate = _sigmoid_np(G[wi, src] + gb[bi])
    else:
        gate = np.ones(len(tgt))
    msg = gate[:, None] * lin
    pre = np.zeros((K, D))
    order = np.argsort(tgt, kind="stable")
    bounds = np.searchsorted(tgt[order], np.arange(K + 1))
    for v in range(K):
        seg = order[bounds[v] : bounds[v + 1]]
        if len(seg):
            pre[v] = np.sort(msg[seg], axis=0).sum(axis=0)
    return np.maximum(pre, 0.0), pre, lin, gate


def graph_conv_backward_numpy(dout, X, W, gw, tgt, src, wi, bi, pre, lin, gate, gated, n_bias):
    K, D = X.shape
    M = W.shape[0]
    dpre = np.where(pre > 0.0, dout, 0.0)
    dm = dpre[tgt]
    dX = np.zeros((K, D))
    dgw = np.zeros((M, D))
    dgb = np.zeros(n_bias)
    if gated:
        dz = np.einsum("ed,ed->e", dm, lin) * gate * (1.0 - gate)
        np.add.at(dgb, bi, dz)
        np.add.at(dgw, wi, dz[:, None] * X[src])
        np.add.at(dX, src, dz[:, None] * gw[wi])
    dlin = gate[:, None] * dm
    db = np.zeros((n_bias, D))
    np.add.at(db, bi, dlin)
    dW = np.zeros((M, D, D))
    for m in range(M):
        sel = wi == m
        if sel.any():
            dW[m] = dlin[sel].T @ X[src[sel]]
            np.add.at(dX, src[sel], dlin[sel] @ W[m])
    return dX, dW, db, dgw, dgb


# ---------------------------------------------------------------------------
# LSTM cell, gate order (input, forget, output, candidate)


@njit(cache=True)
def lstm_forward_loop(x, h, c, W, b):
    H = h.shape[0]
    # the matrix-vector product goes to BLAS through np.dot; the gates are looped
    z = np.dot(W, np.concatenate((x, h))) + b
    acts = np.empty(4 * H)
    for r in range(4 * H):
        acts[r] = _sigmoid(z[r]) if r < 3 * H else math.tanh(z[r])
    c_new = np.empty(H)
    tc = np.empty(H)
    h_new = np.empty(H)
    for k in range(H):
        c_new[k] = acts[H + k] * c[k] + acts[k] * acts[3 * H + k]
        tc[k] = math.tanh(c_new[k])
        h_new[k] = acts[2 * H + k] * tc[k]
    return h_new, c_new, acts, tc


@njit(cache=True)
def lstm_backward_loop(dh_new, dc_new, x, h, c, W, acts, tc):
    H = h.shape[0]
    n_in = x.shape[0]
    xh = np.concatenate((x, h))
    dz = np.empty(4 * H)
    dc = np.empty(H)
    for k in range(H):
        i = acts[k]
        f = acts[H + k]
        o = acts[2 * H + k]
        g = acts[3 * H + k]
        dct = dc_new[k] + dh_new[k] * o * (1.0 - tc[k] * tc[k])
        dz[k] = dct * g * i * (1.0 - i)
        dz[H + k] = dct * c[k] * f * (1.0 - f)
        dz[2 * H + k] = dh_new[k] * tc[k] * o * (1.0 - o)
        dz[3 * H + k] = dct * i * (1.0 - g * g)
        dc[k] = dct * f
    dW = np.outer(dz, xh)
    dxh = np.dot(dz, W)
    return dxh[:n_in], dxh[n_in:], dc, dW, dz


def lstm_forward_numpy(x, h, c, W, b):
    H = h.shape[0]
    z = W @ np.concatenate((x, h)) + b
    acts = np.empty(4 * H)
    acts[: 3 * H] = _sigmoid_np(z[: 3 * H])
    acts[3 * H :] = np.tanh(z[3 * H :])
    i, f, o, g = acts[:H], acts[H : 2 * H], acts[2 * H : 3 * H], acts[3 * H :]
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    return o * tc, c_new, acts, tc


def lstm_backward_numpy(dh_new, dc_new, x, h, c, W, acts, tc):
    H = h.shape[0]
    i, f, o, g = acts[:H], acts[H : 2 * H], acts[2 * H : 3 * H], acts[3 * H :]
    dct = dc_new + dh_new * o * (1.0 - tc * tc)
    dz = np.concatenate(
        (
            dct * g * i * (1.0 - i),
            dct * c * f * (1.0 - f),
            dh_new * tc * o * (1.0 - o),
            dct * i * (1.0 - g * g),
        )
    )
    xh = np.concatenate((x, h))
    dxh = W.T @ dz
    n_in = x.shape[0]
    return dxh[:n_in], dxh[n_in:], dct * f, np.outer(dz, xh), dz


if USE_NUMBA:
    classify_pairs = classify_pairs_loop
    graph_conv_forward = graph_conv_forward_loop
    graph_conv_backward = graph_conv_backward_loop
    lstm_forward = lstm_forward_loop
    lstm_backward = lstm_backward_loop
else:
    classify_pairs = classify_pairs_numpy
    graph_conv_forward = graph_conv_forward_numpy
    graph_conv_backward = graph_conv_backward_numpy
    lstm_forward = lstm_forward_numpy
    lstm_backward = lstm_backward_numpy
