import math

import numpy as np
import pytest
import scipy.ndimage as ndi
from hypothesis import given, settings
from hypothesis import strategies as st

from qtomo.errors import InvalidArgument
from qtomo.phantom import disk_phantom
from qtomo.projector import Geometry, Sinogram, radon
from qtomo.resample import (
    DownscaleSpec,
    downscale_full_view,
    downscale_sparse_view,
    gaussian_filter,
    gaussian_kernel,
    interpolation_matrix,
    upscale_image,
)


def test_four_by_four_hand_reduction():
    g = Geometry(4, (0.0, 45.0, 90.0, 135.0), 4)
    vals = np.arange(16, dtype=float).reshape(4, 4)
    out = downscale_full_view(Sinogram(g, vals), DownscaleSpec(2, 2))
    # patch means: (0+1+4+5)/4 = 2.5, (2+3+6+7)/4 = 4.5, ...; then halved
    assert np.array_equal(out.values, np.array([[2.5, 4.5], [10.5, 12.5]]) / 2)
    assert out.geometry.angles == (45.0, 135.0)
    assert out.geometry.image_size == 2 and out.geometry.pixel_size == 2.0
    assert out.path_scale == 0.5


def test_mean_projection_labels_and_max():
    g = Geometry(4, (0.0, 45.0, 90.0, 135.0), 4)
    vals = np.arange(16, dtype=float).reshape(4, 4)
    out = downscale_full_view(Sinogram(g, vals), DownscaleSpec(2, 2, "max", "mean_projection"))
    assert out.geometry.angles == (22.5, 112.5)
    assert np.array_equal(out.values, np.array([[5.0, 7.0], [13.0, 15.0]]) / 2)


@settings(max_examples=30)
@given(seed=st.integers(0, 2**16), d1=st.sampled_from([1, 2, 4]), d2=st.sampled_from([1, 2, 4]))
def test_mean_stays_within_patch_bounds(seed, d1, d2):
    g = Geometry.uniform(8, 8)
    vals = np.random.default_rng(seed).random(g.shape) * 10
    out = downscale_full_view(Sinogram(g, vals), DownscaleSpec(d1, d2)).values
    blocks = vals.reshape(8 // d1, d1, 8 // d2, d2)
    lo, hi = blocks.min(axis=(1, 3)) / d2, blocks.max(axis=(1, 3)) / d2
    assert np.all(out >= lo - 1e-12) and np.all(out <= hi + 1e-12)


def test_sparse_keeps_angles():
    g = Geometry(8, (0.0, 10.0, 100.0), 8)
    out = downscale_sparse_view(Sinogram(g, np.ones((3, 8))), 2)
    assert out.geometry.angles == g.angles and out.shape == (3, 4)


@pytest.mark.parametrize("size,radius", [(64, 20.0), (64, 12.0), (32, 9.0)])
def test_path_correction_matches_coarse_projection(size, radius):
    img = disk_phantom(size, radius).pixels
    g = Geometry.uniform(size, 16)
    coarse = img.reshape(size // 2, 2, size // 2, 2).mean(axis=(1, 3))
    reduced = downscale_full_view(radon(img, g), DownscaleSpec(2, 2, "mean", "mean_projection"))
    direct = radon(coarse, reduced.geometry).values
    rel = np.sqrt(np.mean((direct - reduced.values) ** 2)) / np.sqrt(np.mean(direct**2))
    assert rel < 0.05


@pytest.mark.parametrize("detectors,d2", [(10, 4), (6, 2)])
def test_misaligned_detector_groups(detectors, d2):
    g = Geometry(detectors, (0.0,), detectors)
    with pytest.raises(InvalidArgument):
        downscale_full_view(Sinogram(g, np.zeros((1, detectors))), DownscaleSpec(1, d2))


def test_angle_count_not_divisible():
    g = Geometry.uniform(4, 3)
    with pytest.raises(InvalidArgument):
        downscale_full_view(Sinogram(g, np.zeros(g.shape)), DownscaleSpec(2, 2))


@pytest.mark.parametrize("kw", [dict(d1=0), dict(aggregate="sum"), dict(angle_mode="first")])
def test_spec_validation(kw):
    with pytest.raises(InvalidArgument):
        DownscaleSpec(**kw)


def test_nearest_is_block_replication(rng):
    x = rng.random((4, 4))
    assert np.array_equal(upscale_image(x, 8, "nearest").pixels, np.kron(x, np.ones((2, 2))))


@settings(max_examples=30)
@given(n=st.integers(2, 9), factor=st.integers(1, 4), seed=st.integers(0, 999))
def test_bilinear_rows_match_np_interp(n, factor, seed):
    row = np.random.default_rng(seed).random(n)
    t = n * factor
    src = (np.arange(t) + 0.5) / factor - 0.5
    want = np.interp(src, np.arange(n), row)  # clamps at the ends
    assert np.allclose(interpolation_matrix(n, t, "bilinear") @ row, want, atol=1e-12)


@pytest.mark.parametrize("method", ["nearest", "bilinear", "bicubic"])
def test_rows_sum_to_one(method):
    W = interpolation_matrix(5, 15, method)
    assert np.allclose(W.sum(axis=1), 1.0)


def test_bicubic_reproduces_quadratic_in_interior():
    n, t = 12, 24
    x = np.arange(n, dtype=float)
    f = 0.3 * x**2 - x + 2
    src = (np.arange(t) + 0.5) * n / t - 0.5
    got = interpolation_matrix(n, t, "bicubic") @ f
    inner = (src >= 1) & (src <= n - 2)
    assert np.allclose(got[inner], (0.3 * src**2 - src + 2)[inner], atol=1e-12)


def test_upscale_rejects_shrinking():
    with pytest.raises(InvalidArgument):
        upscale_image(np.zeros((4, 4)), 2)


def test_kernel_table():
    k = gaussian_kernel(1.0)
    assert k.size == 7 and math.isclose(k.sum(), 1.0)
    raw = np.exp(-0.5 * np.arange(-3, 4) ** 2)
    assert np.allclose(k, raw / raw.sum(), atol=1e-15)
    assert gaussian_kernel(0.5).size == 5
    with pytest.raises(InvalidArgument):
        gaussian_kernel(0.0)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 1.7])
def test_gaussian_matches_scipy_reflect(sigma, rng):
    x = rng.random((13, 9))
    want = ndi.gaussian_filter(x, sigma, mode="reflect", radius=math.ceil(3 * sigma))
    assert np.allclose(gaussian_filter(x, sigma).pixels, want, atol=1e-12)


def test_gaussian_preserves_constant():
    assert np.allclose(gaussian_filter(np.full((6, 6), 3.0), 1.2).pixels, 3.0)
