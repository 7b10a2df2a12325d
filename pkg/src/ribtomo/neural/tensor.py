"""Minimal reverse-mode autodiff over numpy arrays.

Only the operations the rib-suppression models need: same-padding
convolutions (2D/3D), ReLU, elementwise add, 2x average pool with
nearest unpool, and a weighted mean-absolute-error loss. Compute dtype
follows the input arrays; float64 is used by the gradient-check tests.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import StateError


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.grad is not None})"


def _result(data, parents, backward_fn) -> Tensor:
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def backward(loss: Tensor):
    """Reverse-mode sweep from a scalar loss; fills .grad on the graph."""
    if loss.data.size != 1:
        raise ValueError("backward expects a scalar loss")
    if not loss._parents and loss._backward is None:
        raise StateError("backward called without a recorded forward graph")

    order: list[Tensor] = []
    seen: set[int] = set()

    def visit(t: Tensor):
        if id(t) in seen:
            return
        seen.add(id(t))
        for p in t._parents:
            visit(p)
        order.append(t)

    visit(loss)
    loss.grad = np.ones_like(loss.data)
    for t in reversed(order):
        if t._backward is not None and t.grad is not None:
            t._backward(t.grad)


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0)

    def bk(g):
        if x.requires_grad:
            x._accumulate(g * (x.data > 0))

    return _result(out, (x,), bk)


def add(x: Tensor, y: Tensor) -> Tensor:
    if x.data.shape != y.data.shape:
        raise ValueError(f"add shape mismatch {x.data.shape} vs {y.data.shape}")
    out = x.data + y.data

    def bk(g):
        if x.requires_grad:
            x._accumulate(g)
        if y.requires_grad:
            y._accumulate(g)

    return _result(out, (x, y), bk)


def _conv_checks(x, w, b, dims):
    k = w.data.shape[2]
    if x.data.ndim != dims + 2 or w.data.ndim != dims + 2:
        raise ValueError(f"conv{dims}d expects {dims + 2}-d input and weight")
    if any(s != k for s in w.data.shape[2:]):
        raise ValueError("conv kernel must be cubic")
    if k % 2 != 1:
        raise ValueError(f"conv kernel must be odd-sized, got {k}")
    if x.data.shape[1] != w.data.shape[1]:
        raise ValueError(
            f"input channels {x.data.shape[1]} != weight channels {w.data.shape[1]}"
        )
    if b.data.shape != (w.data.shape[0],):
        raise ValueError("bias shape must be (out_channels,)")


def conv(x: Tensor, w: Tensor, b: Tensor, dims: int) -> Tensor:
    """Same-padding, stride-1 cross-correlation in 2 or 3 dimensions."""
    _conv_checks(x, w, b, dims)
    k = w.data.shape[2]
    pad = k // 2
    widths = [(0, 0), (0, 0)] + [(pad, pad)] * dims
    xp = np.pad(x.data, widths)
    fwd = kernels.conv_fwd_2d if dims == 2 else kernels.conv_fwd_3d
    dw_fn = kernels.conv_dw_2d if dims == 2 else kernels.conv_dw_3d
    out = fwd(xp, w.data, b.data)

    def bk(g):
        g = np.ascontiguousarray(g)
        if b.requires_grad:
            b._accumulate(g.sum(axis=tuple(i for i in range(g.ndim) if i != 1)))
        if w.requires_grad:
            w._accumulate(dw_fn(xp, g))
        if x.requires_grad:
            # input gradient is a convolution of g with the flipped,
            # channel-transposed kernel
            flip = (slice(None), slice(None)) + (slice(None, None, -1),) * dims
            wt = np.ascontiguousarray(np.swapaxes(w.data[flip], 0, 1))
            gp = np.pad(g, widths)
            zero_b = np.zeros(x.data.shape[1], dtype=x.data.dtype)
            x._accumulate(fwd(gp, wt, zero_b))

    return _result(out, (x, w, b), bk)


def conv2d(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return conv(x, w, b, 2)


def conv3d(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return conv(x, w, b, 3)


def avg_pool2(x: Tensor, dims: int) -> Tensor:
    """Average pooling with factor 2 along every spatial axis."""
    sp = x.data.shape[2:]
    if any(s % 2 for s in sp):
        raise ValueError(f"avg_pool2 needs even spatial dims, got {sp}")
    shape = x.data.shape[:2] + sum(((s // 2, 2) for s in sp), ())
    axes = tuple(3 + 2 * i for i in range(dims))
    out = x.data.reshape(shape).mean(axis=axes)
    inv = 1.0 / (2**dims)

    def bk(g):
        if x.requires_grad:
            gg = g.astype(x.data.dtype) * inv
            for ax in range(2, 2 + dims):
                gg = np.repeat(gg, 2, axis=ax)
            x._accumulate(gg)

    return _result(out, (x,), bk)


def unpool2(x: Tensor, dims: int) -> Tensor:
    """Nearest-neighbor upsampling with factor 2 along every spatial axis."""
    out = x.data
    for ax in range(2, 2 + dims):
        out = np.repeat(out, 2, axis=ax)

    def bk(g):
        if x.requires_grad:
            sp = x.data.shape[2:]
            shape = g.shape[:2] + sum(((s, 2) for s in sp), ())
            axes = tuple(3 + 2 * i for i in range(dims))
            x._accumulate(g.reshape(shape).sum(axis=axes))

    return _result(out, (x,), bk)


def l1_loss(pred: Tensor, target: Tensor | np.ndarray, weight: float = 1.0) -> Tensor:
    """weight * mean(|pred - target|); subgradient at zero residual is 0."""
    tdata = target.data if isinstance(target, Tensor) else np.asarray(target)
    if pred.data.shape != tdata.shape:
        raise ValueError(f"l1 shape mismatch {pred.data.shape} vs {tdata.shape}")
    diff = pred.data - tdata
    out = np.asarray(weight * np.mean(np.abs(diff)))

    def bk(g):
        if pred.requires_grad:
            pred._accumulate(g * np.sign(diff) * (weight / diff.size))

    return _result(out, (pred,), bk)
