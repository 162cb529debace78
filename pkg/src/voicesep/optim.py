"""AdamW: adaptive moments with decoupled weight decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .errors import StateError

__all__ = ["AdamWConfig", "OptimizerState", "adamw_step"]


@dataclass(frozen=True)
class AdamWConfig:
    lr: float = 0.003
    weight_decay: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class OptimizerState:
    """First/second moment accumulators per parameter name, plus step count."""

    config: AdamWConfig = field(default_factory=AdamWConfig)
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def initialize(cls, params: dict[str, Tensor], config: AdamWConfig | None = None) -> "OptimizerState":
        state = cls(config=config or AdamWConfig())
        for name, p in params.items():
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        return state


def adamw_step(params: dict[str, Tensor], state: OptimizerState) -> None:
    """One decoupled-weight-decay update; parameters are modified in place.

    Weight decay multiplies parameters directly by ``(1 - lr * wd)`` rather
    than flowing through the gradient, and the moment estimates use the
    usual bias correction.
    """
    cfg = state.config
    state.step += 1
    t = state.step
    bias1 = 1.0 - cfg.beta1**t
    bias2 = 1.0 - cfg.beta2**t
    for name, p in params.items():
        if name not in state.m:
            raise StateError(f"optimizer state not initialized for parameter {name!r}")
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        m_hat = m / bias1
        v_hat = v / bias2
        p.data *= 1.0 - cfg.lr * cfg.weight_decay
        p.data -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
