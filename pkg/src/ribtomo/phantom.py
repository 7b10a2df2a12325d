"""Procedural chest phantoms with exact rib, lung and lesion masks.

A phantom is a labeled voxel grid (air, soft tissue, lung, rib, spine,
lesion) rendered to linear attenuation values (mm^-1) through a small
material table. The rib-free companion volume is produced by writing
soft tissue into rib voxels, so the full/rib-free difference is exactly
the rib contrast on the rib mask and zero elsewhere.

Axis order matches the acquisition geometry: data[ix, iy, iz] with x the
superior-inferior axis, y anterior-posterior (toward the source), z
lateral. Volumes are centered on the isocenter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LesionPlacementError

LABEL_AIR = 0
LABEL_SOFT = 1
LABEL_LUNG = 2
LABEL_RIB = 3
LABEL_SPINE = 4
LABEL_LESION = 5

# Lesions are rendered as soft-tissue nodules at reduced density.
LESION_SOFT_FRACTION = 0.6


@dataclass(frozen=True)
class Volume3:
    """3D scalar grid with physical spacing, C-order data[ix, iy, iz]."""

    shape: tuple[int, int, int]
    spacing_mm: tuple[float, float, float]
    data: np.ndarray

    def __post_init__(self):
        if tuple(self.data.shape) != tuple(self.shape):
            raise ValueError(f"data shape {self.data.shape} != {self.shape}")
        if self.data.dtype != np.float32:
            raise ValueError("Volume3 data must be float32")

    @property
    def fov_mm(self) -> tuple[float, float, float]:
        return tuple(n * s for n, s in zip(self.shape, self.spacing_mm))

    @property
    def origin_mm(self) -> tuple[float, float, float]:
        return tuple(-0.5 * f for f in self.fov_mm)

    def like(self, data: np.ndarray) -> "Volume3":
        return Volume3(self.shape, self.spacing_mm, np.ascontiguousarray(data, dtype=np.float32))


@dataclass(frozen=True)
class Mask3:
    """Binary companion grid to a Volume3."""

    shape: tuple[int, int, int]
    spacing_mm: tuple[float, float, float]
    data: np.ndarray

    def __post_init__(self):
        if tuple(self.data.shape) != tuple(self.shape):
            raise ValueError(f"mask shape {self.data.shape} != {self.shape}")
        if self.data.dtype != np.uint8:
            raise ValueError("Mask3 data must be uint8")

    @property
    def count(self) -> int:
        return int(self.data.sum())

    def as_bool(self) -> np.ndarray:
        return self.data.astype(bool)


@dataclass(frozen=True)
class Spectrum:
    """Normalized X-ray energy distribution over discrete bins."""

    energy_bins_keV: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.energy_bins_keV) < 1 or len(self.energy_bins_keV) != len(self.weights):
            raise ValueError("spectrum needs matching, nonempty bins and weights")
        if any(w < 0 for w in self.weights):
            raise ValueError("spectrum weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("spectrum weights must sum to 1")

    @property
    def n_bins(self) -> int:
        return len(self.energy_bins_keV)

    @classmethod
    def mono(cls, energy_kev: float = 60.0) -> "Spectrum":
        return cls((float(energy_kev),), (1.0,))


@dataclass(frozen=True)
class MaterialTable:
    """Tabulated linear attenuation (mm^-1) per material over energy (keV)."""

    energies_keV: tuple[float, ...]
    coefficients: dict[str, tuple[float, ...]]

    def __post_init__(self):
        if len(self.energies_keV) < 2:
            raise ValueError("need at least two energy nodes")
        if any(b <= a for a, b in zip(self.energies_keV, self.energies_keV[1:])):
            raise ValueError("energies must be strictly increasing")
        for name, vals in self.coefficients.items():
            if len(vals) != len(self.energies_keV):
                raise ValueError(f"material {name!r} has wrong value count")
            if any(v <= 0 for v in vals):
                raise ValueError(f"material {name!r} has nonpositive coefficients")


def default_material_table() -> MaterialTable:
    # 60 keV column holds the working defaults (soft 0.02, lung 0.004,
    # bone 0.048 mm^-1); other nodes follow standard water/bone energy
    # dependence scaled to those values.
    return MaterialTable(
        energies_keV=(30.0, 45.0, 60.0, 90.0, 120.0),
        coefficients={
            "soft": (0.0378, 0.0242, 0.0200, 0.0172, 0.0158),
            "lung": (0.00756, 0.00484, 0.0040, 0.00344, 0.00316),
            "bone": (0.1466, 0.0718, 0.0480, 0.0311, 0.0259),
        },
    )


def attenuation_at_energy(table: MaterialTable, material: str, energy_kev: float) -> float:
    """Log-log linear interpolation of the material table.

    Queries at a tabulated node return the table value exactly; energies
    outside the table range raise ValueError.
    """
    if material not in table.coefficients:
        raise ValueError(f"unknown material {material!r}")
    e = table.energies_keV
    if not (e[0] <= energy_kev <= e[-1]):
        raise ValueError(f"energy {energy_kev} keV outside table range [{e[0]}, {e[-1]}]")
    vals = table.coefficients[material]
    for i, node in enumerate(e):
        if energy_kev == node:
            return vals[i]
    i = int(np.searchsorted(e, energy_kev)) - 1
    t = (math.log(energy_kev) - math.log(e[i])) / (math.log(e[i + 1]) - math.log(e[i]))
    return math.exp((1.0 - t) * math.log(vals[i]) + t * math.log(vals[i + 1]))


@dataclass(frozen=True)
class PhantomConfig:
    shape: tuple[int, int, int] = (64, 32, 64)
    fov_mm: tuple[float, float, float] = (409.6, 300.0, 409.6)
    energy_kev: float = 60.0
    n_rib_pairs: int = 6
    rib_tube_mm: float = 6.0
    lesion_count: tuple[int, int] = (1, 3)
    lesion_radius_mm: tuple[float, float] = (7.0, 12.0)
    materials: MaterialTable = field(default_factory=default_material_table)

    def __post_init__(self):
        if any(n < 4 for n in self.shape):
            raise ValueError("phantom shape too small")
        if any(f <= 0 for f in self.fov_mm):
            raise ValueError("fov must be positive")
        if self.n_rib_pairs < 0 or self.rib_tube_mm <= 0:
            raise ValueError("invalid rib parameters")
        lo, hi = self.lesion_count
        if lo < 0 or hi < lo:
            raise ValueError("invalid lesion count range")

    @property
    def spacing_mm(self) -> tuple[float, float, float]:
        return tuple(f / n for f, n in zip(self.fov_mm, self.shape))


@dataclass(frozen=True)
class Phantom:
    """Attenuation phantom plus its exact masks and rib-free companion."""

    full: Volume3
    rib_free: Volume3
    rib_mask: Mask3
    lung_mask: Mask3
    lesion_mask: Mask3
    seed: int
    labels: np.ndarray
    config: PhantomConfig


def rib_free_of(phantom: Phantom) -> Volume3:
    """The stored rib-free volume (identical to full outside the rib mask)."""
    return phantom.rib_free


def _attenuation_lut(cfg: PhantomConfig, energy_kev: float, rib_free: bool) -> np.ndarray:
    soft = attenuation_at_energy(cfg.materials, "soft", energy_kev)
    lung = attenuation_at_energy(cfg.materials, "lung", energy_kev)
    bone = attenuation_at_energy(cfg.materials, "bone", energy_kev)
    rib = soft if rib_free else bone
    return np.array(
        [0.0, soft, lung, rib, bone, LESION_SOFT_FRACTION * soft], dtype=np.float32
    )


def phantom_volume_at_energy(phantom: Phantom, energy_kev: float, rib_free: bool = False) -> Volume3:
    """Render the phantom's label grid at another beam energy."""
    lut = _attenuation_lut(phantom.config, energy_kev, rib_free)
    return Volume3(phantom.full.shape, phantom.full.spacing_mm, lut[phantom.labels])


def generate_phantom(seed: int, config: PhantomConfig | None = None) -> Phantom:
    """Deterministically synthesize a chest phantom for the given seed.

    Thorax and lungs are ellipsoids, ribs are partial elliptical-torus
    arcs (anterior and posterior, per side) kept outside the lungs, the
    spine is a posterior cylinder, and lesions are spheres placed fully
    inside a lung. Painting order soft -> ribs -> spine -> lungs ->
    lesions guarantees lung voxels never carry bone.
    """
    cfg = config or PhantomConfig()
    rng = np.random.default_rng(seed)
    nx, ny, nz = cfg.shape
    sx, sy, sz = cfg.spacing_mm
    hx, hy, hz = (0.5 * f for f in cfg.fov_mm)

    xs = (np.arange(nx) + 0.5) * sx - hx
    ys = (np.arange(ny) + 0.5) * sy - hy
    zs = (np.arange(nz) + 0.5) * sz - hz
    gx = xs[:, None, None]
    gy = ys[None, :, None]
    gz = zs[None, None, :]

    labels = np.zeros(cfg.shape, dtype=np.uint8)

    # thorax
    tsem = np.array([0.92 * hx, 0.72 * hy, 0.80 * hz]) * (1.0 + rng.uniform(-0.02, 0.02, 3))
    thorax = (gx / tsem[0]) ** 2 + (gy / tsem[1]) ** 2 + (gz / tsem[2]) ** 2 <= 1.0
    labels[thorax] = LABEL_SOFT

    # lungs (painted later so they always win over bone); parameters drawn
    # now to keep the rng stream order independent of rib count
    lung_params = []
    for side in (+1.0, -1.0):
        semi = np.array([0.586 * hx, 0.507 * hy, 0.3027 * hz]) * (
            1.0 + rng.uniform(-0.02, 0.02, 3)
        )
        center = np.array(
            [
                -0.02 * hx + rng.uniform(-2.0, 2.0),
                0.04 * hy + rng.uniform(-2.0, 2.0),
                side * (0.3125 * hz) + rng.uniform(-2.0, 2.0),
            ]
        )
        lung_params.append((center, semi))

    # ribs: for each level and side, an anterior and a posterior arc of an
    # elliptical torus in the y-z plane, drifting in x like sloped ribs
    rib_ry = 0.68 * hy * (1.0 + rng.uniform(0.0, 0.03))
    rib_rz = 0.7324 * hz * (1.0 + rng.uniform(0.0, 0.03))
    tube = cfg.rib_tube_mm * rng.uniform(0.9, 1.1)
    drift = 0.078 * hx
    n_ribs = cfg.n_rib_pairs
    if n_ribs > 0:
        levels = np.linspace(-0.53 * hx, 0.56 * hx, n_ribs) + rng.uniform(-3.0, 3.0, n_ribs)
        rho = np.sqrt((gy / rib_ry) ** 2 + (gz / rib_rz) ** 2)
        psi = np.arctan2(np.abs(gz) / rib_rz, gy / rib_ry)  # 0 anterior, pi posterior
        ring_dist = (rho - 1.0) * np.hypot(gy, gz) / np.maximum(rho, 1e-9)
        arc = ((psi >= 0.08 * math.pi) & (psi <= 0.42 * math.pi)) | (
            (psi >= 0.56 * math.pi) & (psi <= 0.92 * math.pi)
        )
        x_off = drift * (psi / math.pi - 0.5)
        rib_region = np.zeros(cfg.shape, dtype=bool)
        pad = tube + 0.6 * drift + sx
        for x_lvl in levels:
            i0 = max(0, int(np.floor((x_lvl - pad + hx) / sx)))
            i1 = min(nx, int(np.ceil((x_lvl + pad + hx) / sx)) + 1)
            if i0 >= i1:
                continue
            dist2 = ring_dist**2 + (gx[i0:i1] - (x_lvl + x_off)) ** 2
            rib_region[i0:i1] |= (dist2 <= tube**2) & arc
        labels[rib_region & thorax] = LABEL_RIB

    # spine: posterior cylinder along x, clipped to the thorax
    spine_r = 0.0867 * hy
    spine = (gy - (-0.52 * hy)) ** 2 + gz**2 <= spine_r**2
    labels[spine & thorax & (np.abs(gx) <= 0.88 * hx)] = LABEL_SPINE

    # lungs overwrite everything painted so far
    for center, semi in lung_params:
        lung = (
            ((gx - center[0]) / semi[0]) ** 2
            + ((gy - center[1]) / semi[1]) ** 2
            + ((gz - center[2]) / semi[2]) ** 2
            <= 1.0
        )
        labels[lung] = LABEL_LUNG

    # lesions: spheres fully inside a lung ellipsoid
    n_lesions = int(rng.integers(cfg.lesion_count[0], cfg.lesion_count[1] + 1))
    for _ in range(n_lesions):
        placed = False
        for _attempt in range(200):
            center, semi = lung_params[int(rng.integers(0, len(lung_params)))]
            u = rng.uniform(-1.0, 1.0, 3)
            if np.dot(u, u) > 1.0:
                continue
            radius = rng.uniform(*cfg.lesion_radius_mm)
            pos = center + semi * u
            margin = np.sqrt(np.sum(((pos - center) / semi) ** 2)) + radius / semi.min()
            if margin >= 1.0:
                continue
            sphere = (gx - pos[0]) ** 2 + (gy - pos[1]) ** 2 + (gz - pos[2]) ** 2 <= radius**2
            sphere &= labels == LABEL_LUNG
            if not sphere.any():
                continue
            labels[sphere] = LABEL_LESION
            placed = True
            break
        if not placed:
            raise LesionPlacementError(
                f"could not place lesion inside lungs (seed={seed}); lungs too small"
            )

    lut_full = _attenuation_lut(cfg, cfg.energy_kev, rib_free=False)
    lut_free = _attenuation_lut(cfg, cfg.energy_kev, rib_free=True)
    full = Volume3(cfg.shape, cfg.spacing_mm, lut_full[labels])
    free = Volume3(cfg.shape, cfg.spacing_mm, lut_free[labels])

    lung_mask = ((labels == LABEL_LUNG) | (labels == LABEL_LESION)).astype(np.uint8)
    return Phantom(
        full=full,
        rib_free=free,
        rib_mask=Mask3(cfg.shape, cfg.spacing_mm, (labels == LABEL_RIB).astype(np.uint8)),
        lung_mask=Mask3(cfg.shape, cfg.spacing_mm, lung_mask),
        lesion_mask=Mask3(cfg.shape, cfg.spacing_mm, (labels == LABEL_LESION).astype(np.uint8)),
        seed=seed,
        labels=labels,
        config=cfg,
    )
