import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcnlstm import kernels
from gcnlstm import tensor as T
from gcnlstm.gcn import GcnParams, gcn_directional, gcn_gated, gcn_vanilla
from gcnlstm.gradcheck import grad_check
from gcnlstm.graph import RelationGraph
from gcnlstm.semantic import semantic_labels
from gcnlstm.tensor import ShapeError, Tensor

N_LAB = 3
LABELS = semantic_labels(N_LAB)


def direct_sum(X, g, W, b, gw=None, gb=None, reverse=True):
    """Walk the edge list and add every message by hand."""
    K, D = X.shape
    pre = np.zeros((K, D))

    def send(to, frm, slot, lab):
        gate = 1.0 if gw is None else 1.0 / (1.0 + np.exp(-(gw[slot] @ X[frm] + gb[lab])))
        pre[to] += gate * (W[slot] @ X[frm] + b[lab])

    for s, d, lab in g.edges:
        if s == d:
            send(s, s, 2, lab)
        else:
            send(d, s, 0, lab)
            if reverse:
                send(s, d, 1, lab)
    return np.maximum(pre, 0.0)


def random_graph(rng, k, density=0.4):
    edges = [(i, j, int(rng.integers(1, N_LAB + 1))) for i in range(k) for j in range(k) if i != j and rng.random() < density]
    return RelationGraph.build(k, edges, LABELS)


def random_params(rng, d, scale=0.5):
    return GcnParams(
        Tensor(rng.normal(0, scale, (3, d, d))),
        Tensor(rng.normal(0, scale, (N_LAB + 1, d))),
        Tensor(rng.normal(0, scale, (3, d))),
        Tensor(rng.normal(0, scale, N_LAB + 1)),
    )


def tied(rng, d):
    W = rng.normal(size=(d, d))
    b = rng.normal(size=d)
    # gate_b = 50 puts sigmoid at exactly 1.0 in float64
    p = GcnParams(Tensor(np.stack([W] * 3)), Tensor(np.stack([b] * (N_LAB + 1))), Tensor(np.zeros((3, d))), Tensor(np.full(N_LAB + 1, 50.0)))
    return W, b, p


def test_self_loops_with_identity_copy_input(rng):
    X = rng.uniform(0.1, 1.0, (4, 3))
    g = RelationGraph.build(4, [], LABELS)
    assert np.array_equal(gcn_vanilla(Tensor(X), g, Tensor(np.eye(3)), Tensor(np.zeros(3))).data, X)


def test_one_edge_sums_both_endpoints(rng):
    X = rng.normal(size=(2, 3))
    g = RelationGraph.build(2, [(0, 1, 1)], LABELS)
    out = gcn_vanilla(Tensor(X), g, Tensor(np.eye(3)), Tensor(np.zeros(3))).data
    expected = np.maximum(X[0] + X[1], 0)
    np.testing.assert_allclose(out, [expected, expected], rtol=0, atol=1e-15)


def test_large_negative_bias_clamps_to_zero(rng):
    g = random_graph(rng, 5)
    out = gcn_vanilla(Tensor(rng.normal(size=(5, 4))), g, Tensor(rng.normal(size=(4, 4))), Tensor(np.full(4, -1e6)))
    assert not out.data.any()


def test_reverse_matrix_zero_blocks_backward_flow(rng):
    g = RelationGraph.build(2, [(0, 1, 1)], LABELS)
    p = random_params(rng, 3)
    p.W.data[1] = 0.0
    X = rng.normal(size=(2, 3))
    Y = X.copy()
    Y[1] += 5.0
    a = gcn_directional(Tensor(X), g, p).data
    b = gcn_directional(Tensor(Y), g, p).data
    assert np.array_equal(a[0], b[0])
    assert not np.array_equal(a[1], b[1])
    np.testing.assert_allclose(a, direct_sum(X, g, p.W.data, p.b.data), rtol=0, atol=1e-12)


def test_single_edge_with_zero_features_sees_biases(rng):
    g = RelationGraph.build(2, [(0, 1, 2)], LABELS)
    p = random_params(rng, 3)
    p.b.data[0] = [0.5, -1.0, 0.25]
    p.b.data[2] = [0.25, 0.5, -2.0]
    out = gcn_directional(Tensor(np.zeros((2, 3))), g, p).data
    both = np.maximum(p.b.data[0] + p.b.data[2], 0)
    np.testing.assert_array_equal(out, [both, both])


def test_unknown_label_named(rng):
    g = RelationGraph.build(2, [(0, 1, 3)], LABELS)
    p = random_params(rng, 2)
    p.b = Tensor(np.zeros((3, 2)))
    with pytest.raises(ShapeError, match="rel_3"):
        gcn_directional(Tensor(np.zeros((2, 2))), g, p)


def test_vertex_count_mismatch(rng):
    g = RelationGraph.build(3, [], LABELS)
    with pytest.raises(ShapeError, match="3 vertices"):
        gcn_gated(Tensor(np.zeros((2, 2))), g, random_params(rng, 2))


def test_neutral_gate_halves_self_message():
    p = GcnParams(Tensor(np.stack([np.eye(3)] * 3)), Tensor(np.zeros((2, 3))), Tensor(np.zeros((3, 3))), Tensor(np.zeros(2)))
    g = RelationGraph.build(1, [], semantic_labels(1))
    x = np.array([[0.3, 1.0, 2.5]])
    assert np.array_equal(gcn_gated(Tensor(x), g, p).data, 0.5 * x)


def test_closed_gate_silences_label(rng):
    X = rng.normal(size=(4, 3))
    p = random_params(rng, 3)
    p.gate_b.data[2] = -1000.0
    full = RelationGraph.build(4, [(0, 1, 2), (2, 3, 2), (1, 2, 1)], LABELS)
    pruned = RelationGraph.build(4, [(1, 2, 1)], LABELS)
    np.testing.assert_allclose(gcn_gated(Tensor(X), full, p).data, gcn_gated(Tensor(X), pruned, p).data, rtol=0, atol=1e-300)


@pytest.mark.parametrize("reverse", [True, False])
def test_gated_matches_direct_sum(rng, reverse):
    for _ in range(20):
        k = int(rng.integers(1, 8))
        g = random_graph(rng, k)
        p = random_params(rng, 4)
        X = rng.normal(size=(k, 4))
        expected = direct_sum(X, g, p.W.data, p.b.data, p.gate_w.data, p.gate_b.data, reverse)
        np.testing.assert_allclose(gcn_gated(Tensor(X), g, p, reverse).data, expected, rtol=0, atol=1e-12)


def test_tied_parameters_reduce_all_three_variants(rng):
    for _ in range(100):
        k = int(rng.integers(1, 9))
        g = random_graph(rng, k, density=float(rng.uniform(0, 1)))
        W, b, p = tied(rng, 5)
        X = Tensor(rng.normal(size=(k, 5)))
        v = gcn_vanilla(X, g, Tensor(W), Tensor(b)).data
        assert np.max(np.abs(gcn_directional(X, g, p).data - v)) <= 1e-12
        assert np.max(np.abs(gcn_gated(X, g, p).data - v)) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_permutation_equivariance_is_exact(k, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, k)
    p = random_params(rng, 4)
    X = rng.normal(size=(k, 4))
    perm = rng.permutation(k)
    # vertex i becomes perm[i]: row perm[i] of the new features is row i of the old
    Xp = np.empty_like(X)
    Xp[perm] = X
    gp = g.permuted(perm)
    for f in (lambda x, gr: gcn_gated(x, gr, p), lambda x, gr: gcn_directional(x, gr, p),
              lambda x, gr: gcn_vanilla(x, gr, p.W.data[0], p.b.data[0])):  # fmt: skip
        a = f(Tensor(X), g).data
        b = f(Tensor(Xp), gp).data
        assert np.array_equal(b[perm], a)


def test_gated_layer_gradients(rng):
    g = random_graph(rng, 5, 0.5)
    p = random_params(rng, 3)
    X = Tensor(rng.normal(size=(5, 3)))
    r = rng.normal(size=(5, 3))
    params = {"X": X, **p.named("l")}
    rep = grad_check(lambda: T.sum(T.mul(gcn_gated(X, g, p), r)), params, tol=1e-6)
    assert rep.passed, rep.lines()


@pytest.mark.parametrize("gated", [True, False])
def test_loop_and_numpy_kernels_agree(rng, gated):
    g = random_graph(rng, 7, 0.5)
    p = random_params(rng, 5)
    X = rng.normal(size=(7, 5))
    tgt, src, wi, bi = g.incidences(True)
    args = (X, p.W.data, p.b.data, p.gate_w.data, p.gate_b.data, tgt, src, wi, bi, gated)
    fa = kernels.graph_conv_forward_loop(*args)
    fb = kernels.graph_conv_forward_numpy(*args)
    for a, b in zip(fa, fb):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
    dout = rng.normal(size=(7, 5))
    ba = kernels.graph_conv_backward_loop(dout, X, p.W.data, p.gate_w.data, tgt, src, wi, bi, *fa[1:], gated, N_LAB + 1)
    bb = kernels.graph_conv_backward_numpy(dout, X, p.W.data, p.gate_w.data, tgt, src, wi, bi, *fb[1:], gated, N_LAB + 1)
    for a, b in zip(ba, bb):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_lstm_kernels_agree(rng):
    x, h, c = rng.normal(size=(3, 4))
    W = rng.normal(size=(16, 8))
    b = rng.normal(size=16)
    fa = kernels.lstm_forward_loop(x, h, c, W, b)
    fb = kernels.lstm_forward_numpy(x, h, c, W, b)
    for a, b_ in zip(fa, fb):
        np.testing.assert_allclose(a, b_, rtol=0, atol=1e-13)
    dh, dc = rng.normal(size=(2, 4))
    ba = kernels.lstm_backward_loop(dh, dc, x, h, c, W, fa[2], fa[3])
    bb = kernels.lstm_backward_numpy(dh, dc, x, h, c, W, fb[2], fb[3])
    for a, b_ in zip(ba, bb):
        np.testing.assert_allclose(a, b_, rtol=0, atol=1e-12)
