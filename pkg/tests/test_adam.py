import numpy as np
import pytest

from gcnlstm import tensor as T
from gcnlstm.optim import AdamState, adam_step
from gcnlstm.tensor import Tape, Tensor


def test_first_step_on_unit_gradient_moves_by_lr():
    p = {"w": Tensor([3.0])}
    state = AdamState(lr=0.01)
    adam_step(state, p, {"w": np.array([1.0])})
    assert abs((3.0 - p["w"].data[0]) - 0.01) <= 0.01 * 1e-7
    assert state.step == 1


def test_zero_gradient_keeps_params_and_decays_moments():
    p = {"w": Tensor([1.0, 2.0])}
    state = AdamState()
    adam_step(state, p, {"w": np.array([1.0, -1.0])})
    before = p["w"].data.copy()
    m = state.m["w"].copy()
    v = state.v["w"].copy()
    adam_step(state, p, {"w": np.zeros(2)})
    # the update still uses the decayed first moment; it is only a no-op from a fresh state
    np.testing.assert_allclose(state.m["w"], 0.9 * m)
    np.testing.assert_allclose(state.v["w"], 0.999 * v)
    fresh = {"w": Tensor(before)}
    adam_step(AdamState(), fresh, {"w": np.zeros(2)})
    assert np.array_equal(fresh["w"].data, before)


def test_nan_gradient_names_the_parameter():
    p = {"dec.out.W": Tensor([1.0]), "other": Tensor([2.0])}
    with pytest.raises(ValueError, match="dec.out.W"):
        adam_step(AdamState(), p, {"dec.out.W": np.array([np.nan]), "other": np.array([0.0])})
    assert p["other"].data[0] == 2.0


def test_shape_mismatch_is_reported():
    with pytest.raises(ValueError, match="shape"):
        adam_step(AdamState(), {"w": Tensor([1.0, 2.0])}, {"w": np.zeros(3)})


def test_convex_quadratic_decreases_after_warmup(rng):
    A = rng.normal(size=(5, 5))
    A = A @ A.T + np.eye(5)
    w = {"w": Tensor(rng.normal(size=5))}
    state = AdamState(lr=0.01)
    losses = []
    for _ in range(1000):
        with Tape() as tape:
            loss = T.sum(T.mul(w["w"], T.matmul(A, w["w"])))
        losses.append(loss.item())
        adam_step(state, w, tape.gradient(loss, w))
    # near the optimum Adam's step stays close to lr and the loss wobbles at
    # roundoff scale, so monotonicity is checked until it has dropped 1e6-fold
    stop = int(np.argmax(np.array(losses) < 1e-6 * losses[0]))
    assert stop > 5
    assert np.all(np.diff(losses[5:stop]) < 0)
