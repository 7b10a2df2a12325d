"""Cone-beam forward projection of attenuation volumes (the DRR operator).

Each detector pixel value is the attenuation line integral from the
source through the pixel center: trilinear samples (clamped to the grid
edge) taken at step_mm intervals along the ray's intersection with the
volume box, combined with trapezoid endpoint weights. Nodes sit only at
whole multiples of the step, so the estimator converges first order in
step_mm. Polyenergetic beams combine per-energy-bin integrals p_b as
-ln(sum_b eta_b * exp(-p_b)); the single-bin case returns the line
integral itself, bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import GeometryMismatchError
from .geometry import AngleSet, ConeBeamGeometry, source_position
from .phantom import Spectrum, Volume3


@dataclass(frozen=True)
class Projection2D:
    """One log-projection image. data[row, col], float32."""

    rows: int
    cols: int
    pixel_mm: float
    theta_deg: float
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != (self.rows, self.cols):
            raise ValueError(f"projection data shape {self.data.shape} != ({self.rows}, {self.cols})")
        if self.data.dtype != np.float32:
            raise ValueError("Projection2D data must be float32")

    def like(self, data: np.ndarray) -> "Projection2D":
        return Projection2D(
            self.rows, self.cols, self.pixel_mm, self.theta_deg,
            np.ascontiguousarray(data, dtype=np.float32),
        )


@dataclass(frozen=True)
class ProjectionSet:
    """Angle-sorted projections matching one geometry/angle set."""

    geometry: ConeBeamGeometry
    angles: AngleSet
    projections: tuple[Projection2D, ...]

    def __post_init__(self):
        if len(self.projections) != self.angles.n_views:
            raise ValueError("projection count does not match angle set")
        for p, theta in zip(self.projections, self.angles.angles):
            if p.theta_deg != theta:
                raise ValueError(f"projection angle {p.theta_deg} != {theta}")
            if (p.rows, p.cols) != (self.geometry.detector_rows, self.geometry.detector_cols):
                raise ValueError("projection shape does not match detector")

    def stack(self) -> np.ndarray:
        return np.stack([p.data for p in self.projections])

    def like(self, stack: np.ndarray) -> "ProjectionSet":
        if stack.shape[0] != self.angles.n_views:
            raise ValueError("stack view count mismatch")
        projs = tuple(p.like(stack[i]) for i, p in enumerate(self.projections))
        return ProjectionSet(self.geometry, self.angles, projs)


def default_step_mm(vol: Volume3) -> float:
    return 0.5 * min(vol.spacing_mm)


def line_integral(vol: Volume3, ray: tuple[np.ndarray, np.ndarray], step_mm: float) -> float:
    """Integrate the volume along one ray. Rays that miss return 0."""
    if step_mm <= 0:
        raise ValueError(f"step_mm must be positive, got {step_mm}")
    origin, direction = ray
    direction = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-6:
        raise ValueError("ray direction must be unit length")
    out = kernels.line_integrals(
        vol.data,
        np.asarray(vol.spacing_mm),
        np.asarray(vol.origin_mm),
        np.asarray(origin, dtype=np.float64).reshape(1, 3),
        direction.reshape(1, 3),
        float(step_mm),
    )
    return float(out[0])


def _pixel_rays(geom: ConeBeamGeometry, theta_deg: float, supersample: int):
    """Ray origins/directions for every detector pixel (and subpixel)."""
    src = source_position(geom, theta_deg)
    det00 = geom.detector_origin_mm()
    r_dir = geom.row_dir
    c_dir = geom.col_dir
    n = supersample
    offs = (np.arange(n) + 0.5) / n - 0.5
    rr = (np.arange(geom.detector_rows)[:, None] + offs[None, :]).ravel()
    cc = (np.arange(geom.detector_cols)[:, None] + offs[None, :]).ravel()
    pix = (
        det00[None, None, :]
        + rr[:, None, None] * geom.detector_pixel_mm * r_dir[None, None, :]
        + cc[None, :, None] * geom.detector_pixel_mm * c_dir[None, None, :]
    ).reshape(-1, 3)
    dirs = pix - src[None, :]
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    origins = np.broadcast_to(src, dirs.shape).copy()
    return origins, dirs


def forward_project(
    vols_by_energy: list[Volume3] | Volume3,
    geom: ConeBeamGeometry,
    theta_deg: float,
    spectrum: Spectrum | None = None,
    step_mm: float | None = None,
    supersample: int = 1,
) -> Projection2D:
    """Project the volume(s) onto the detector at one view angle."""
    if isinstance(vols_by_energy, Volume3):
        vols_by_energy = [vols_by_energy]
    spectrum = spectrum or Spectrum.mono()
    if len(vols_by_energy) != spectrum.n_bins:
        raise ValueError(
            f"{len(vols_by_energy)} volumes for {spectrum.n_bins} spectrum bins"
        )
    if supersample < 1:
        raise ValueError("supersample must be >= 1")
    step = float(step_mm) if step_mm is not None else default_step_mm(vols_by_energy[0])
    if step <= 0:
        raise ValueError(f"step_mm must be positive, got {step}")

    origins, dirs = _pixel_rays(geom, theta_deg, supersample)
    shape = (geom.detector_rows, geom.detector_cols)

    def integrate(vol: Volume3) -> np.ndarray:
        ints = kernels.line_integrals(
            vol.data, np.asarray(vol.spacing_mm), np.asarray(vol.origin_mm),
            origins, dirs, step,
        )
        if supersample > 1:
            n = supersample
            ints = ints.reshape(shape[0], n, shape[1], n).mean(axis=(1, 3))
        return ints.reshape(shape)

    if spectrum.n_bins == 1 and spectrum.weights[0] == 1.0:
        img = integrate(vols_by_energy[0])
    else:
        trans = np.zeros(shape)
        for vol, w in zip(vols_by_energy, spectrum.weights):
            trans += w * np.exp(-integrate(vol))
        img = -np.log(trans)
    return Projection2D(
        rows=shape[0], cols=shape[1], pixel_mm=geom.detector_pixel_mm,
        theta_deg=float(theta_deg), data=img.astype(np.float32),
    )


def project_all(
    vol: Volume3 | list[Volume3],
    geom: ConeBeamGeometry,
    angles: AngleSet,
    spectrum: Spectrum | None = None,
    step_mm: float | None = None,
    supersample: int = 1,
) -> ProjectionSet:
    """One forward projection per angle, ordered by angle."""
    projs = []
    for theta in angles.angles:
        try:
            projs.append(
                forward_project(vol, geom, theta, spectrum, step_mm, supersample)
            )
        except Exception as exc:
            raise type(exc)(f"view theta_deg={theta}: {exc}") from exc
    return ProjectionSet(geometry=geom, angles=angles, projections=tuple(projs))


def check_same_geometry(ps: ProjectionSet, geom: ConeBeamGeometry):
    if ps.geometry != geom:
        raise GeometryMismatchError("projection set was built for a different geometry")
