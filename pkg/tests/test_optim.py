import numpy as np
import pytest

from voicesep.autodiff import Tensor
from voicesep.errors import StateError
from voicesep.optim import AdamWConfig, OptimizerState, adamw_step


def test_zero_gradient_no_decay_leaves_params():
    p = Tensor([1.0, -2.0], requires_grad=True)
    p.grad = np.zeros(2)
    params = {"p": p}
    state = OptimizerState.initialize(params, AdamWConfig(weight_decay=0.0))
    adamw_step(params, state)
    assert np.array_equal(p.data, [1.0, -2.0])


def test_first_step_moves_by_lr():
    # With g=1 at t=1 the bias-corrected update is lr * 1/(1 + eps) ~ lr.
    p = Tensor([1.0], requires_grad=True)
    p.grad = np.ones(1)
    params = {"p": p}
    state = OptimizerState.initialize(params, AdamWConfig(lr=0.003, weight_decay=0.0))
    adamw_step(params, state)
    assert p.data[0] == pytest.approx(1.0 - 0.003, abs=1e-9)


def test_decoupled_decay_shrinks_params():
    cfg = AdamWConfig(lr=0.003, weight_decay=0.005)
    p = Tensor([2.0], requires_grad=True)
    params = {"p": p}
    state = OptimizerState.initialize(params, cfg)
    for step in range(1, 4):
        p.grad = np.zeros(1)
        adamw_step(params, state)
        assert p.data[0] == pytest.approx(2.0 * (1 - cfg.lr * cfg.weight_decay) ** step, rel=1e-12)
    assert state.step == 3


def test_step_deterministic():
    def run():
        p = Tensor(np.linspace(-1, 1, 5), requires_grad=True)
        params = {"p": p}
        state = OptimizerState.initialize(params)
        for i in range(5):
            p.grad = np.sin(np.arange(5) + i)
            adamw_step(params, state)
        return p.data

    assert np.array_equal(run(), run())


def test_uninitialized_state_rejected():
    p = Tensor([1.0], requires_grad=True)
    p.grad = np.ones(1)
    with pytest.raises(StateError):
        adamw_step({"p": p}, OptimizerState())


def test_missing_grad_treated_as_zero():
    p = Tensor([1.0], requires_grad=True)
    params = {"p": p}
    state = OptimizerState.initialize(params, AdamWConfig(weight_decay=0.0))
    adamw_step(params, state)
    assert p.data[0] == 1.0
