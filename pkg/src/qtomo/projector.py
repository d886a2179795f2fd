"""Parallel-beam Radon projector with exact (Siddon) intersection lengths.

Angle ``theta`` projects along the direction ``(-sin theta, cos theta)``, so
0 degrees integrates along image columns. Detector bin ``s`` of ``S`` sits at
signed offset ``(s - (S - 1) / 2) * pixel`` along ``(cos theta, sin theta)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import FormatError, InvalidArgument

_AXIS_EPS = 1e-12
_MIN_SEG = 1e-12


@dataclass(frozen=True)
class Geometry:
    """Square image of ``image_size`` pixels per side seen at ``angles`` (deg).

    ``pixel_size`` is the physical width of one working pixel relative to the
    original acquisition; it becomes ``d`` after a ``d``-fold downscale and is
    what lets a sinogram's ``path_scale`` be checked for consistency.
    """

    image_size: int
    angles: tuple[float, ...]
    detectors: int
    pixel_size: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        if self.image_size < 1:
            raise InvalidArgument("image_size must be >= 1")
        if self.detectors < 1:
            raise InvalidArgument("detectors must be >= 1")
        a = np.asarray(self.angles)
        if a.size == 0:
            raise InvalidArgument("need at least one angle")
        if np.any(a < 0) or np.any(a >= 180):
            raise InvalidArgument("angles must lie in [0, 180)")
        if np.any(np.diff(a) <= 0):
            raise InvalidArgument("angles must be strictly increasing")
        if not self.pixel_size > 0:
            raise InvalidArgument("pixel_size must be positive")

    @classmethod
    def uniform(cls, image_size: int, n_angles: int, detectors: int | None = None):
        """``n_angles`` angles evenly spaced on [0, 180), endpoint excluded."""
        angles = np.arange(n_angles) * (180.0 / n_angles)
        return cls(image_size, tuple(angles), detectors or image_size)

    @property
    def n_angles(self) -> int:
        return len(self.angles)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_angles, self.detectors)

    @property
    def n_rays(self) -> int:
        return self.n_angles * self.detectors


@dataclass
class Sinogram:
    """Line integrals indexed ``(angle, detector)``.

    ``path_scale`` records the multiplicative path-length correction already
    applied to ``values`` (1 for an untouched projection).
    """

    geometry: Geometry
    values: np.ndarray
    path_scale: float = 1.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.geometry.shape:
            raise InvalidArgument(
                f"sinogram shape {v.shape} != geometry shape {self.geometry.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("sinogram contains non-finite values")
        self.values = v
        self.path_scale = float(self.path_scale)

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class Region:
    row0: int
    col0: int
    height: int
    width: int

    @property
    def n_pixels(self) -> int:
        return self.height * self.width

    def slices(self):
        return (slice(self.row0, self.row0 + self.height), slice(self.col0, self.col0 + self.width))

    def check_inside(self, shape) -> None:
        h, w = shape
        if (
            self.height < 1
            or self.width < 1
            or self.row0 < 0
            or self.col0 < 0
            or self.row0 + self.height > h
            or self.col0 + self.width > w
        ):
            raise InvalidArgument(f"{self} does not lie inside a {h}x{w} image")

    def pixel_indices(self, image_width: int) -> np.ndarray:
        """Flat (row-major) image indices of the region's pixels, row-major."""
        r = np.arange(self.row0, self.row0 + self.height)
        c = np.arange(self.col0, self.col0 + self.width)
        return (r[:, None] * image_width + c[None, :]).ravel()


# -- ray tracing ------------------------------------------------------------


def _trace(t: float, theta_deg: float, n: int):
    """Siddon traversal of one ray through an ``n x n`` unit-pixel grid.

    Returns (flat pixel indices, intersection lengths).
    """
    th = np.deg2rad(theta_deg)
    ux, uy = np.cos(th), np.sin(th)
    vx, vy = -uy, ux
    px, py = t * ux, t * uy
    half = n / 2.0
    lo, hi = -np.inf, np.inf
    planes = []
    for p, v in ((px, vx), (py, vy)):
        if abs(v) < _AXIS_EPS:
            # parallel to this axis: either always inside the slab or never
            if p <= -half or p >= half:
                return np.empty(0, np.int64), np.empty(0)
            continue
        a0, a1 = (-half - p) / v, (half - p) / v
        lo, hi = max(lo, min(a0, a1)), min(hi, max(a0, a1))
        planes.append((np.arange(n + 1) - half - p) / v)
    if not hi - lo > _MIN_SEG:
        return np.empty(0, np.int64), np.empty(0)
    lam = np.concatenate([[lo, hi]] + planes)
    lam = np.unique(lam[(lam >= lo) & (lam <= hi)])
    seg = np.diff(lam)
    keep = seg > _MIN_SEG
    mid = 0.5 * (lam[:-1] + lam[1:])[keep]
    seg = seg[keep]
    col = np.floor(px + mid * vx + half).astype(np.int64)
    row = np.floor(half - (py + mid * vy)).astype(np.int64)
    np.clip(col, 0, n - 1, out=col)
    np.clip(row, 0, n - 1, out=row)
    return row * n + col, seg


def detector_offsets(geometry: Geometry) -> np.ndarray:
    return np.arange(geometry.detectors) - (geometry.detectors - 1) / 2.0


def ray_weights(geometry: Geometry, angle_index: int, detector_index: int):
    """Pixels crossed by one ray and their exact intersection lengths.

    Returns ``(pixel_index, weight)`` pairs sorted by pixel index; pixel
    indices are row-major into the ``image_size`` square.
    """
    if not 0 <= angle_index < geometry.n_angles:
        raise IndexError(f"angle index {angle_index} out of range")
    if not 0 <= detector_index < geometry.detectors:
        raise IndexError(f"detector index {detector_index} out of range")
    t = detector_offsets(geometry)[detector_index]
    idx, w = _trace(t, geometry.angles[angle_index], geometry.image_size)
    order = np.argsort(idx, kind="stable")
    return [(int(i), float(x)) for i, x in zip(idx[order], w[order])]


@lru_cache(maxsize=16)
def system_matrix(geometry: Geometry) -> sp.csr_matrix:
    """Sparse ``(n_rays, n_pixels)`` matrix of weights ``c_ij``.

    Row ``a * detectors + s`` holds ray ``(angle a, detector s)``. The result
    is cached and must be treated as read-only.
    """
    n = geometry.image_size
    offsets = detector_offsets(geometry)
    rows, cols, vals = [], [], []
    for a, theta in enumerate(geometry.angles):
        for s, t in enumerate(offsets):
            idx, w = _trace(t, theta, n)
            rows.append(np.full(idx.size, a * geometry.detectors + s, np.int64))
            cols.append(idx)
            vals.append(w)
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(geometry.n_rays, n * n),
    )
    A.sum_duplicates()
    A.sort_indices()
    A.data.setflags(write=False)
    return A


def _as_pixels(image, geometry: Geometry) -> np.ndarray:
    px = np.asarray(image, dtype=float)
    if px.shape != (geometry.image_size, geometry.image_size):
        raise InvalidArgument(
            f"image shape {px.shape} does not match geometry size {geometry.image_size}"
        )
    return px


def radon(image, geometry: Geometry) -> Sinogram:
    """Forward projection: ``P(theta, s) = sum_ij c_ij I_ij``."""
    px = _as_pixels(image, geometry)
    vals = (system_matrix(geometry) @ px.ravel()).reshape(geometry.shape)
    return Sinogram(geometry, vals, path_scale=1.0 / geometry.pixel_size)


def region_only(image, region: Region) -> np.ndarray:
    """Copy of ``image`` with every pixel outside ``region`` set to zero."""
    px = np.asarray(image, dtype=float)
    region.check_inside(px.shape)
    out = np.zeros_like(px)
    out[region.slices()] = px[region.slices()]
    return out


def zero_masked_sinogram(image, region: Region, geometry: Geometry) -> Sinogram:
    """Projection of ``image`` with ``region`` zeroed out."""
    px = _as_pixels(image, geometry).copy()
    region.check_inside(px.shape)
    px[region.slices()] = 0.0
    return radon(px, geometry)


def region_contribution(P: Sinogram, Pz: Sinogram) -> Sinogram:
    """Difference sinogram ``D = P - Pz``: the region's isolated contribution."""
    if P.shape != Pz.shape or P.geometry.angles != Pz.geometry.angles:
        raise InvalidArgument("P and Pz have different geometry")
    if not np.isclose(P.path_scale, Pz.path_scale, rtol=1e-12, atol=0):
        raise InvalidArgument(
            f"path_scale mismatch: {P.path_scale} vs {Pz.path_scale}"
        )
    return Sinogram(P.geometry, P.values - Pz.values, P.path_scale)


def with_geometry(sino: Sinogram, geometry: Geometry) -> Sinogram:
    return replace(sino, geometry=geometry)


# -- file format ------------------------------------------------------------


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def save_sinogram(sino: Sinogram, path) -> None:
    g = sino.geometry
    lines = [
        f"SINO {g.n_angles} {g.detectors} {_fmt(sino.path_scale)}",
        " ".join(_fmt(a) for a in g.angles),
    ]
    lines += [" ".join(_fmt(v) for v in row) for row in sino.values]
    Path(path).write_text("\n".join(lines) + "\n")


def load_sinogram(path, image_size: int | None = None) -> Sinogram:
    """Read the text sinogram format.

    The file does not store the image size; it defaults to the detector
    count, and the working pixel size is recovered as ``1 / path_scale``.
    """
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise FormatError(f"{path}: truncated sinogram file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "SINO":
        raise FormatError(f"{path}: bad header {lines[0]!r}")
    try:
        na, nd, scale = int(head[1]), int(head[2]), float(head[3])
        angles = [float(t) for t in lines[1].split()]
        vals = [float(t) for ln in lines[2:] for t in ln.split()]
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if len(angles) != na:
        raise FormatError(f"{path}: header says {na} angles, found {len(angles)}")
    if len(vals) != na * nd:
        raise FormatError(f"{path}: expected {na * nd} values, found {len(vals)}")
    if not scale > 0:
        raise FormatError(f"{path}: path_scale must be positive")
    try:
        geom = Geometry(image_size or nd, tuple(angles), nd, pixel_size=1.0 / scale)
    except InvalidArgument as exc:
        raise FormatError(f"{path}: {exc}") from None
    return Sinogram(geom, np.array(vals).reshape(na, nd), scale)
