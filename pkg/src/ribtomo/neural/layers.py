"""Residual convolutional networks built on the Tensor ops.

A network is stem conv -> ReLU, N single-conv residual blocks
(y = relu(y + conv(y))), and a zero-initialized head conv, so every
freshly created model is the zero predictor. An optional pool/unpool
pair around the blocks exists for ablation runs. All convolutions are
same-padding stride 1, so spatial shape is preserved end to end.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import MissingArtifactError
from . import tensor as T


@dataclass(frozen=True)
class BlockSpec:
    channels: int = 16
    kernel: int = 3
    stride: int = 1

    def __post_init__(self):
        if self.channels < 1:
            raise ValueError("block channels must be positive")
        if self.kernel % 2 != 1 or self.kernel < 1:
            raise ValueError("block kernel must be odd")
        if self.stride != 1:
            raise ValueError("only stride 1 is supported")


@dataclass(frozen=True)
class ConvNetSpec:
    dims: int
    in_channels: int
    blocks: tuple[BlockSpec, ...] = field(default_factory=lambda: (BlockSpec(),) * 4)
    out_channels: int = 1
    pool: bool = False

    def __post_init__(self):
        if self.dims not in (2, 3):
            raise ValueError("dims must be 2 or 3")
        if len(self.blocks) < 1:
            raise ValueError("need at least one residual block")
        if len({b.channels for b in self.blocks}) != 1:
            raise ValueError("residual blocks must share one channel width")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be positive")

    @property
    def channels(self) -> int:
        return self.blocks[0].channels


class Conv:
    """One convolution layer holding weight and bias parameters."""

    def __init__(self, dims, in_ch, out_ch, kernel, rng, dtype=np.float32, zero=False):
        shape = (out_ch, in_ch) + (kernel,) * dims
        if zero:
            w = np.zeros(shape, dtype=dtype)
        else:
            fan_in = in_ch * kernel**dims
            bound = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-bound, bound, shape).astype(dtype)
        self.dims = dims
        self.w = T.Tensor(w, requires_grad=True)
        self.b = T.Tensor(np.zeros(out_ch, dtype=dtype), requires_grad=True)

    def __call__(self, x: T.Tensor) -> T.Tensor:
        return T.conv(x, self.w, self.b, self.dims)


class ConvNet:
    def __init__(self, spec: ConvNetSpec, rng: np.random.Generator, dtype=np.float32):
        self.spec = spec
        ch = spec.channels
        k = spec.blocks[0].kernel
        self.stem = Conv(spec.dims, spec.in_channels, ch, k, rng, dtype)
        self.blocks = [Conv(spec.dims, ch, ch, b.kernel, rng, dtype) for b in spec.blocks]
        self.head = Conv(spec.dims, ch, spec.out_channels, k, rng, dtype, zero=True)

    def parameters(self) -> list[T.Tensor]:
        out = [self.stem.w, self.stem.b]
        for blk in self.blocks:
            out.extend([blk.w, blk.b])
        out.extend([self.head.w, self.head.b])
        return out

    def forward(self, x: np.ndarray | T.Tensor) -> T.Tensor:
        t = x if isinstance(x, T.Tensor) else T.Tensor(x)
        y = T.relu(self.stem(t))
        if self.spec.pool:
            y = T.avg_pool2(y, self.spec.dims)
        for blk in self.blocks:
            y = T.relu(T.add(y, blk(y)))
        if self.spec.pool:
            y = T.unpool2(y, self.spec.dims)
        return self.head(y)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x).data

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def param_bytes(self) -> bytes:
        return b"".join(
            np.ascontiguousarray(p.data, dtype="<f4").tobytes() for p in self.parameters()
        )


# -- checkpoints ------------------------------------------------------------

_CKPT_MAGIC = b"RCK1"


def save_checkpoint(path: str | Path, net: ConvNet, step_count: int, adam=None):
    """Header (network spec echo + step count) then f32 parameter payload;
    Adam moment buffers are appended when given."""
    spec = net.spec
    lines = [
        f"dims={spec.dims}",
        f"in_channels={spec.in_channels}",
        f"out_channels={spec.out_channels}",
        f"n_blocks={len(spec.blocks)}",
        f"channels={spec.channels}",
        f"kernel={spec.blocks[0].kernel}",
        f"pool={int(spec.pool)}",
        f"step_count={step_count}",
        f"has_adam={int(adam is not None)}",
    ]
    if adam is not None:
        lines += [f"adam_lr={adam.lr!r}", f"adam_step={adam.step}"]
    header = ("\n".join(lines) + "\n").encode()
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(net.param_bytes())
        if adam is not None:
            for buf in adam.m + adam.v:
                fh.write(np.ascontiguousarray(buf, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path, load_adam: bool = False):
    """Returns (net, step_count[, adam]) rebuilt from the stored spec."""
    from .optim import AdamState

    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"no such checkpoint: {path}")
    raw = path.read_bytes()
    if raw[:4] != _CKPT_MAGIC:
        raise ValueError(f"{path}: bad checkpoint magic")
    (hlen,) = struct.unpack("<I", raw[4:8])
    fields = dict(
        line.split("=", 1) for line in raw[8 : 8 + hlen].decode().splitlines() if line
    )
    spec = ConvNetSpec(
        dims=int(fields["dims"]),
        in_channels=int(fields["in_channels"]),
        blocks=(BlockSpec(channels=int(fields["channels"]), kernel=int(fields["kernel"])),)
        * int(fields["n_blocks"]),
        out_channels=int(fields["out_channels"]),
        pool=bool(int(fields["pool"])),
    )
    net = ConvNet(spec, np.random.default_rng(0))
    offset = 8 + hlen
    for p in net.parameters():
        n = p.data.size
        p.data = (
            np.frombuffer(raw, dtype="<f4", count=n, offset=offset)
            .reshape(p.data.shape)
            .copy()
        )
        offset += 4 * n
    step_count = int(fields["step_count"])
    if not load_adam:
        return net, step_count
    if not int(fields.get("has_adam", "0")):
        raise ValueError(f"{path}: checkpoint has no optimizer state")
    adam = AdamState.for_params(net.parameters(), lr=float(fields["adam_lr"]))
    adam.step = int(fields["adam_step"])
    for buf in adam.m + adam.v:
        n = buf.size
        buf[:] = np.frombuffer(raw, dtype="<f4", count=n, offset=offset).reshape(buf.shape)
        offset += 4 * n
    return net, step_count, adam
