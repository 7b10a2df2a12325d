"""Cone-beam tomosynthesis acquisition geometry.

World coordinates are millimetres with the isocenter at the origin.
Axis 0 (x) is the patient superior-inferior direction and the default
source motion axis, axis 1 (y) points from the isocenter toward the
source at the central view, axis 2 (z) is the remaining lateral axis.

The detector is stationary in the plane y = sid_mm - sdd_mm with normal
+y. Projection images are stored data[row, col]: the column index runs
along the source motion axis (so ramp filtering acts along the motion
direction), the row index along the other in-plane axis. The source
travels on the line y = sid_mm, offset by sid_mm * tan(theta) along the
motion axis, so theta = 0 places it straight above the isocenter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

_AXES = {"x": 0, "z": 2}


@dataclass(frozen=True)
class AngleSet:
    """Equiangular view angles, inclusive of both endpoints."""

    angles: tuple[float, ...]
    alpha_deg: float
    n_views: int

    def __post_init__(self):
        if self.n_views < 1 or len(self.angles) != self.n_views:
            raise ValueError("angle count mismatch")
        if any(b <= a for a, b in zip(self.angles, self.angles[1:])):
            raise ValueError("angles must be strictly increasing")

    @property
    def spacing_deg(self) -> float:
        if self.n_views == 1:
            return 0.0
        return self.alpha_deg / (self.n_views - 1)

    @property
    def spacing_rad(self) -> float:
        """Angular step used to scale backprojection; 1.0 for a single view."""
        if self.n_views == 1:
            return 1.0
        return math.radians(self.spacing_deg)


def make_angle_set(alpha_deg: float, n_views: int) -> AngleSet:
    """Build the symmetric angle set spanning [-alpha/2, +alpha/2].

    The angles are computed from integer numerators so that
    angles[i] == -angles[n-1-i] holds bit-exactly.
    """
    if alpha_deg < 0:
        raise ValueError(f"alpha_deg must be >= 0, got {alpha_deg}")
    if n_views < 1:
        raise ValueError(f"n_views must be >= 1, got {n_views}")
    if n_views == 1:
        return AngleSet(angles=(0.0,), alpha_deg=float(alpha_deg), n_views=1)
    half = 0.5 * alpha_deg
    denom = n_views - 1
    angles = tuple(half * ((2 * i - denom) / denom) for i in range(n_views))
    return AngleSet(angles=angles, alpha_deg=float(alpha_deg), n_views=n_views)


@dataclass(frozen=True)
class ConeBeamGeometry:
    """Stationary-detector, linearly scanned source geometry."""

    sid_mm: float = 1000.0
    sdd_mm: float = 1200.0
    detector_rows: int = 64
    detector_cols: int = 64
    detector_pixel_mm: float = 7.68
    fov_mm: tuple[float, float, float] = (409.6, 300.0, 409.6)
    volume_shape: tuple[int, int, int] = (64, 32, 64)
    motion_axis: str = "x"

    def __post_init__(self):
        if not (self.sdd_mm > self.sid_mm > 0):
            raise ValueError("need sdd_mm > sid_mm > 0")
        if self.detector_rows < 1 or self.detector_cols < 1:
            raise ValueError("detector shape must be positive")
        if self.detector_pixel_mm <= 0:
            raise ValueError("detector_pixel_mm must be positive")
        if any(f <= 0 for f in self.fov_mm) or any(n < 1 for n in self.volume_shape):
            raise ValueError("fov and volume shape must be positive")
        if self.motion_axis not in _AXES:
            raise ValueError(f"motion_axis must be 'x' or 'z', got {self.motion_axis!r}")

    @property
    def voxel_spacing_mm(self) -> tuple[float, float, float]:
        return tuple(f / n for f, n in zip(self.fov_mm, self.volume_shape))

    @property
    def volume_origin_mm(self) -> tuple[float, float, float]:
        """Minimum corner of the volume bounding box (volume is centered)."""
        return tuple(-0.5 * f for f in self.fov_mm)

    # -- detector frame -------------------------------------------------

    @property
    def motion_dir(self) -> np.ndarray:
        m = np.zeros(3)
        m[_AXES[self.motion_axis]] = 1.0
        return m

    @property
    def detector_normal(self) -> np.ndarray:
        return np.array([0.0, 1.0, 0.0])

    @property
    def col_dir(self) -> np.ndarray:
        """Unit vector along increasing column index (the source motion axis)."""
        return self.motion_dir

    @property
    def row_dir(self) -> np.ndarray:
        """Unit vector along increasing row index (in-plane, orthogonal to col_dir)."""
        r = np.zeros(3)
        r[2 if self.motion_axis == "x" else 0] = 1.0
        return r

    @property
    def detector_center_mm(self) -> np.ndarray:
        return np.array([0.0, self.sid_mm - self.sdd_mm, 0.0])

    def detector_origin_mm(self) -> np.ndarray:
        """Physical center of pixel (row 0, col 0)."""
        half_r = 0.5 * (self.detector_rows - 1) * self.detector_pixel_mm
        half_c = 0.5 * (self.detector_cols - 1) * self.detector_pixel_mm
        return self.detector_center_mm - half_r * self.row_dir - half_c * self.col_dir

    def pixel_center_mm(self, row: float, col: float) -> np.ndarray:
        return (
            self.detector_origin_mm()
            + row * self.detector_pixel_mm * self.row_dir
            + col * self.detector_pixel_mm * self.col_dir
        )


def source_position(geom: ConeBeamGeometry, theta_deg: float) -> np.ndarray:
    """Source location for view angle theta, on the line parallel to the
    motion axis at height sid_mm above the isocenter plane."""
    if abs(theta_deg) >= 90.0:
        raise ValueError(f"|theta| must be < 90 deg, got {theta_deg}")
    offset = geom.sid_mm * math.tan(math.radians(theta_deg))
    pos = offset * geom.motion_dir
    pos[1] = geom.sid_mm
    return pos


def ray_through(
    geom: ConeBeamGeometry, theta_deg: float, detector_u: float, detector_v: float
) -> tuple[np.ndarray, np.ndarray]:
    """Ray from the source at theta to the center of detector pixel (u, v).

    u is the (fractional) row index, v the column index. Returns
    (origin, unit direction).
    """
    if not (0.0 <= detector_u <= geom.detector_rows - 1):
        raise ValueError(f"row index {detector_u} outside detector")
    if not (0.0 <= detector_v <= geom.detector_cols - 1):
        raise ValueError(f"col index {detector_v} outside detector")
    origin = source_position(geom, theta_deg)
    target = geom.pixel_center_mm(detector_u, detector_v)
    d = target - origin
    return origin, d / np.linalg.norm(d)


# -- plain-text config section ------------------------------------------

_GEOM_KEYS = (
    "sid_mm",
    "sdd_mm",
    "detector_rows",
    "detector_cols",
    "detector_pixel_mm",
    "fov_mm_x",
    "fov_mm_y",
    "fov_mm_z",
    "vol_nx",
    "vol_ny",
    "vol_nz",
    "alpha_deg",
    "n_views",
)
_GEOM_OPTIONAL = ("motion_axis",)


def geometry_to_config(geom: ConeBeamGeometry, angles: AngleSet) -> dict[str, str]:
    """Flatten geometry plus angle set to the key=value section format."""
    return {
        "sid_mm": repr(geom.sid_mm),
        "sdd_mm": repr(geom.sdd_mm),
        "detector_rows": str(geom.detector_rows),
        "detector_cols": str(geom.detector_cols),
        "detector_pixel_mm": repr(geom.detector_pixel_mm),
        "fov_mm_x": repr(geom.fov_mm[0]),
        "fov_mm_y": repr(geom.fov_mm[1]),
        "fov_mm_z": repr(geom.fov_mm[2]),
        "vol_nx": str(geom.volume_shape[0]),
        "vol_ny": str(geom.volume_shape[1]),
        "vol_nz": str(geom.volume_shape[2]),
        "alpha_deg": repr(angles.alpha_deg),
        "n_views": str(angles.n_views),
        "motion_axis": geom.motion_axis,
    }


def geometry_from_config(section: dict[str, str]) -> tuple[ConeBeamGeometry, AngleSet]:
    """Parse the geometry section, rejecting unknown or missing keys."""
    known = set(_GEOM_KEYS) | set(_GEOM_OPTIONAL)
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown geometry keys: {sorted(unknown)}")
    missing = set(_GEOM_KEYS) - set(section)
    if missing:
        raise ConfigError(f"missing geometry keys: {sorted(missing)}")
    try:
        geom = ConeBeamGeometry(
            sid_mm=float(section["sid_mm"]),
            sdd_mm=float(section["sdd_mm"]),
            detector_rows=int(section["detector_rows"]),
            detector_cols=int(section["detector_cols"]),
            detector_pixel_mm=float(section["detector_pixel_mm"]),
            fov_mm=(
                float(section["fov_mm_x"]),
                float(section["fov_mm_y"]),
                float(section["fov_mm_z"]),
            ),
            volume_shape=(
                int(section["vol_nx"]),
                int(section["vol_ny"]),
                int(section["vol_nz"]),
            ),
            motion_axis=section.get("motion_axis", "x"),
        )
        angles = make_angle_set(float(section["alpha_deg"]), int(section["n_views"]))
    except ValueError as exc:
        raise ConfigError(f"invalid geometry value: {exc}") from exc
    return geom, angles
