"""Bias-corrected Adam over Tensor parameters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be nonnegative")

    @classmethod
    def for_params(cls, params: list[Tensor], lr: float, **kw) -> "AdamState":
        state = cls(lr=lr, **kw)
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
        return state


def adam_step(params: list[Tensor], state: AdamState):
    """One in-place update; parameters with no gradient are left alone."""
    if len(state.m) != len(params):
        raise ValueError("optimizer state does not match parameter list")
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for i, p in enumerate(params):
        if p.grad is None:
            continue
        g = p.grad
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p.data = p.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def zero_grads(params: list[Tensor]):
    for p in params:
        p.zero_grad()
