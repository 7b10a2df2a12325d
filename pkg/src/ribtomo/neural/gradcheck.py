"""Central finite-difference gradient verification.

Meant to run on float64 tensors: float32 rounding would swamp the
h = 1e-5 differences.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, backward


def finite_difference_check(
    loss_fn, tensors: list[Tensor], h: float = 1e-5, floor: float = 1e-4
) -> float:
    """Max relative error between analytic and numeric gradients.

    loss_fn must rebuild the forward graph from the tensors' current
    data and return the scalar loss Tensor. Relative error uses
    |a - n| / max(|a|, |n|, floor) so near-zero gradients compare on an
    absolute scale.
    """
    for t in tensors:
        t.zero_grad()
    loss = loss_fn()
    backward(loss)
    analytic = [np.array(t.grad, copy=True) if t.grad is not None else np.zeros_like(t.data) for t in tensors]

    worst = 0.0
    for t, ana in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        num = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = float(loss_fn().data)
            flat[i] = orig - h
            lm = float(loss_fn().data)
            flat[i] = orig
            num[i] = (lp - lm) / (2.0 * h)
        a = ana.reshape(-1)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(num)), floor)
        worst = max(worst, float(np.max(np.abs(a - num) / denom)))
    return worst
