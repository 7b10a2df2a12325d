"""Binary containers and image export.

Volumes and masks share one container: a 64-byte little-endian header
(magic, dtype code, shape, spacing) followed by the raw C-order payload.
Projection stacks store a fixed header, the angle list, then the f32
view-major payload. Everything round-trips bit-exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import MissingArtifactError
from .geometry import AngleSet, ConeBeamGeometry
from .phantom import Mask3, Volume3
from .projector import Projection2D, ProjectionSet

_VOL_MAGIC = b"RVL1"
_PROJ_MAGIC = b"RPS1"
_DTYPE_F32 = 1
_DTYPE_U8 = 2


def write_volume(path: str | Path, vol: Volume3 | Mask3):
    """Write a volume or mask to the 64-byte-header container."""
    code = _DTYPE_F32 if vol.data.dtype == np.float32 else _DTYPE_U8
    header = struct.pack(
        "<4sBxxx3I3d",
        _VOL_MAGIC,
        code,
        *[int(n) for n in vol.shape],
        *[float(s) for s in vol.spacing_mm],
    )
    header = header.ljust(64, b"\0")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(vol.data).tobytes())


def read_volume(path: str | Path) -> Volume3 | Mask3:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"no such volume file: {path}")
    raw = path.read_bytes()
    magic, code, n0, n1, n2, s0, s1, s2 = struct.unpack("<4sBxxx3I3d", raw[:44])
    if magic != _VOL_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    shape = (n0, n1, n2)
    spacing = (s0, s1, s2)
    count = n0 * n1 * n2
    if code == _DTYPE_F32:
        data = np.frombuffer(raw, dtype="<f4", count=count, offset=64).reshape(shape)
        return Volume3(shape, spacing, data.copy())
    if code == _DTYPE_U8:
        data = np.frombuffer(raw, dtype=np.uint8, count=count, offset=64).reshape(shape)
        return Mask3(shape, spacing, data.copy())
    raise ValueError(f"{path}: unknown dtype code {code}")


def write_projection_set(path: str | Path, ps: ProjectionSet):
    """Header: magic, n_views, rows, cols, pixel_mm, angle list. Payload f32."""
    with open(path, "wb") as fh:
        fh.write(
            struct.pack(
                "<4s3Id",
                _PROJ_MAGIC,
                ps.angles.n_views,
                ps.geometry.detector_rows,
                ps.geometry.detector_cols,
                ps.projections[0].pixel_mm,
            )
        )
        fh.write(struct.pack("<d", ps.angles.alpha_deg))
        fh.write(np.asarray(ps.angles.angles, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ps.stack()).tobytes())


def read_projection_set(path: str | Path, geom: ConeBeamGeometry) -> ProjectionSet:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"no such projection file: {path}")
    raw = path.read_bytes()
    magic, n_views, rows, cols, pixel_mm = struct.unpack("<4s3Id", raw[:24])
    if magic != _PROJ_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    (alpha_deg,) = struct.unpack("<d", raw[24:32])
    angles = np.frombuffer(raw, dtype="<f8", count=n_views, offset=32)
    offset = 32 + 8 * n_views
    stack = np.frombuffer(raw, dtype="<f4", count=n_views * rows * cols, offset=offset)
    stack = stack.reshape(n_views, rows, cols)
    aset = AngleSet(angles=tuple(float(a) for a in angles), alpha_deg=alpha_deg, n_views=n_views)
    projs = tuple(
        Projection2D(rows, cols, pixel_mm, float(angles[i]), stack[i].copy())
        for i in range(n_views)
    )
    return ProjectionSet(geometry=geom, angles=aset, projections=projs)


# -- PNG export -----------------------------------------------------------

_SLICE_AXES = {"axial": 0, "coronal": 1, "sagittal": 2}


def to_window_u8(data: np.ndarray, window: float, level: float) -> np.ndarray:
    lo = level - 0.5 * window
    u8 = np.clip((data.astype(np.float64) - lo) / window, 0.0, 1.0) * 255.0
    return np.round(u8).astype(np.uint8)


def export_slice_png(
    path: str | Path,
    vol: Volume3,
    axis: str = "coronal",
    index: int | None = None,
    window: float | None = None,
    level: float | None = None,
):
    """Save one slice as an 8-bit PNG with the given window/level.

    axial slices fix the x (superior-inferior) index, coronal the y
    (anterior-posterior) index, sagittal the z index. Defaults: central
    slice, full data range.
    """
    if axis not in _SLICE_AXES:
        raise ValueError(f"axis must be one of {sorted(_SLICE_AXES)}")
    ax = _SLICE_AXES[axis]
    if index is None:
        index = vol.shape[ax] // 2
    if not (0 <= index < vol.shape[ax]):
        raise ValueError(f"slice index {index} out of range for axis {axis}")
    sl = np.take(vol.data, index, axis=ax)
    if window is None or level is None:
        lo, hi = float(sl.min()), float(sl.max())
        window = max(hi - lo, 1e-12)
        level = 0.5 * (hi + lo)
    Image.fromarray(to_window_u8(sl, window, level)).save(path)


def export_image_png(path: str | Path, data: np.ndarray, window: float, level: float):
    Image.fromarray(to_window_u8(data, window, level)).save(path)


# -- plain-text manifests ---------------------------------------------------


def write_manifest(path: str | Path, entries: dict[str, str]):
    lines = [f"{k}={entries[k]}" for k in sorted(entries)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"no such manifest: {path}")
    out = {}
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out
