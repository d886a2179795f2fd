"""Sinogram downscaling, image upscaling and Gaussian smoothing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .phantom import Image
from .projector import Geometry, Sinogram

_AGGREGATES = {"mean": np.mean, "max": np.max, "min": np.min}
_ANGLE_MODES = ("pick_second", "mean_projection")


@dataclass(frozen=True)
class DownscaleSpec:
    """Block reduction over ``d1`` angles by ``d2`` detector bins.

    ``angle_mode`` only decides which angle labels the reduced rows:
    ``pick_second`` keeps the last (highest) angle of each group,
    ``mean_projection`` uses the group's mean angle. Values are always
    aggregated over the whole ``d1 x d2`` patch.
    """

    d1: int = 2
    d2: int = 2
    aggregate: str = "mean"
    angle_mode: str = "pick_second"

    def __post_init__(self):
        if self.d1 < 1 or self.d2 < 1:
            raise InvalidArgument(f"d1, d2 must be >= 1, got {self.d1}, {self.d2}")
        if self.aggregate not in _AGGREGATES:
            raise InvalidArgument(f"unknown aggregate {self.aggregate!r}")
        if self.angle_mode not in _ANGLE_MODES:
            raise InvalidArgument(f"unknown angle_mode {self.angle_mode!r}")


def _check_axis_alignment(detectors: int, d2: int) -> None:
    if detectors % d2:
        raise InvalidArgument(f"{detectors} detectors not divisible by d2={d2}")
    if d2 > 1 and (detectors // d2) % 2:
        # an odd group count puts one group across the rotation axis
        raise InvalidArgument(
            f"{detectors} detectors in groups of {d2} cannot be split "
            "symmetrically about the rotation axis"
        )


def _block_reduce(values: np.ndarray, d1: int, d2: int, how: str) -> np.ndarray:
    na, nd = values.shape
    blocks = values.reshape(na // d1, d1, nd // d2, d2)
    return _AGGREGATES[how](blocks, axis=(1, 3))


def downscale_full_view(sino: Sinogram, spec: DownscaleSpec) -> Sinogram:
    """Reduce a full-view sinogram by ``d1 x d2`` patches.

    The result is multiplied by ``1 / d2`` so its line integrals match an
    image with ``d2``-times fewer (and ``d2``-times wider) pixels.
    """
    g = sino.geometry
    if g.n_angles % spec.d1:
        raise InvalidArgument(f"{g.n_angles} angles not divisible by d1={spec.d1}")
    _check_axis_alignment(g.detectors, spec.d2)
    if g.image_size % spec.d2:
        raise InvalidArgument(f"image size {g.image_size} not divisible by d2={spec.d2}")
    ang = np.asarray(g.angles).reshape(-1, spec.d1)
    new_angles = ang[:, -1] if spec.angle_mode == "pick_second" else ang.mean(axis=1)
    scale = 1.0 / spec.d2
    vals = _block_reduce(sino.values, spec.d1, spec.d2, spec.aggregate) * scale
    geom = Geometry(
        g.image_size // spec.d2,
        tuple(new_angles),
        g.detectors // spec.d2,
        pixel_size=g.pixel_size * spec.d2,
    )
    return Sinogram(geom, vals, sino.path_scale * scale)


def downscale_sparse_view(sino: Sinogram, d: int, aggregate: str = "mean") -> Sinogram:
    """Reduce only the detector axis (``1 x d`` patches); angles are kept."""
    return downscale_full_view(sino, DownscaleSpec(1, d, aggregate, "pick_second"))


# -- upscaling --------------------------------------------------------------


def _keys_cubic(x: np.ndarray, a: float = -0.5) -> np.ndarray:
    x = np.abs(x)
    out = np.zeros_like(x)
    m1 = x <= 1
    m2 = (x > 1) & (x < 2)
    out[m1] = (a + 2) * x[m1] ** 3 - (a + 3) * x[m1] ** 2 + 1
    out[m2] = a * x[m2] ** 3 - 5 * a * x[m2] ** 2 + 8 * a * x[m2] - 4 * a
    return out


def interpolation_matrix(n: int, target: int, method: str) -> np.ndarray:
    """``(target, n)`` matrix mapping a length-``n`` signal onto ``target``
    samples with pixel-centre alignment and edge replication."""
    k = np.arange(target)
    src = (k + 0.5) * n / target - 0.5
    W = np.zeros((target, n))
    if method == "nearest":
        idx = np.clip(np.floor((k + 0.5) * n / target).astype(int), 0, n - 1)
        W[k, idx] = 1.0
    elif method == "bilinear":
        i0 = np.floor(src).astype(int)
        f = src - i0
        np.add.at(W, (k, np.clip(i0, 0, n - 1)), 1 - f)
        np.add.at(W, (k, np.clip(i0 + 1, 0, n - 1)), f)
    elif method == "bicubic":
        i0 = np.floor(src).astype(int)
        for off in (-1, 0, 1, 2):
            w = _keys_cubic(src - (i0 + off))
            np.add.at(W, (k, np.clip(i0 + off, 0, n - 1)), w)
    else:
        raise InvalidArgument(f"unknown interpolation method {method!r}")
    return W


def upscale_image(image, target_size: int, method: str = "nearest") -> Image:
    """Resize to ``target_size x target_size``. Discrete levels are dropped.

    Bicubic output can overshoot slightly below zero near sharp edges; it is
    clipped at zero to keep intensities physical.
    """
    px = np.asarray(image, dtype=float)
    h, w = px.shape
    if target_size < max(h, w):
        raise InvalidArgument(f"target {target_size} smaller than source {h}x{w}")
    Wy = interpolation_matrix(h, target_size, method)
    Wx = interpolation_matrix(w, target_size, method)
    out = Wy @ px @ Wx.T
    return Image(np.maximum(out, 0.0))


# -- smoothing --------------------------------------------------------------


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalised 1-D Gaussian truncated at radius ``ceil(3 sigma)``."""
    if not sigma > 0:
        raise InvalidArgument(f"sigma must be > 0, got {sigma}")
    r = math.ceil(3 * sigma)
    x = np.arange(-r, r + 1)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _convolve_axis(px: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    r = kernel.size // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    # numpy "symmetric" repeats the edge sample: d c b a | a b c d
    padded = np.pad(px, pad, mode="symmetric")
    n = px.shape[axis]
    out = np.zeros_like(px)
    for i, w in enumerate(kernel):
        sl = [slice(None), slice(None)]
        sl[axis] = slice(i, i + n)
        out += w * padded[tuple(sl)]
    return out


def gaussian_filter(image, sigma: float) -> Image:
    kernel = gaussian_kernel(sigma)
    px = np.asarray(image, dtype=float)
    out = _convolve_axis(_convolve_axis(px, kernel, 0), kernel, 1)
    return Image(np.maximum(out, 0.0))
