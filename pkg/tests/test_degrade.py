import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_image
from gandetect.degrade import (
    BLUR_JPEG, CHROMA_TABLE, DCT8, LUMA_TABLE, STRONG, AugmentPolicy, add_gaussian_noise, apply_policy,
    brightness_contrast, cutout, gaussian_blur, gaussian_kernel1d, jpeg_roundtrip, psnr, scaled_table,
)
from gandetect.imagecore import ImageBuffer, InvalidInputError
from gandetect.rng import Rng
from gandetect.spectral import fft2_array, signed_freqs


def test_quality_50_is_base_table():
    np.testing.assert_array_equal(scaled_table(LUMA_TABLE, 50), LUMA_TABLE)
    np.testing.assert_array_equal(scaled_table(CHROMA_TABLE, 50), CHROMA_TABLE)


@pytest.mark.parametrize("q,expect00", [(10, 80), (25, 32), (75, 8), (90, 3), (100, 1)])
def test_scaled_table_entries(q, expect00):
    # hand evaluation of floor((16 * S + 50) / 100) for the luma DC entry
    assert scaled_table(LUMA_TABLE, q)[0, 0] == expect00


@pytest.mark.parametrize("q", [0, 101, -5])
def test_quality_out_of_range(q):
    with pytest.raises(InvalidInputError):
        jpeg_roundtrip(ImageBuffer(np.zeros((8, 8))), q)


def test_dct_is_orthonormal():
    np.testing.assert_allclose(DCT8 @ DCT8.T, np.eye(8), atol=1e-14)


def _reference_jpeg_gray(plane, quality):
    """Independent per-block loop with scalar DCT sums."""
    q = scaled_table(LUMA_TABLE, quality).astype(float)
    h, w = plane.shape
    p = np.pad(plane, ((0, -h % 8), (0, -w % 8)), mode="edge") - 128.0
    out = np.zeros_like(p)
    n = np.arange(8)
    c = np.where(n == 0, math.sqrt(1 / 8), math.sqrt(2 / 8))
    basis = c[:, None] * np.cos(np.pi * (2 * n[None, :] + 1) * n[:, None] / 16)
    for by in range(0, p.shape[0], 8):
        for bx in range(0, p.shape[1], 8):
            b = p[by:by + 8, bx:bx + 8]
            coef = np.einsum("ux,vy,xy->uv", basis, basis, b)
            v = coef / q
            coef = np.sign(v) * np.floor(np.abs(v) + 0.5) * q
            out[by:by + 8, bx:bx + 8] = np.einsum("ux,vy,uv->xy", basis, basis, coef)
    return np.clip(out[:h, :w] + 128.0, 0, 255)


@pytest.mark.parametrize("quality", [10, 50, 90])
def test_gray_jpeg_matches_reference(rng, quality):
    img = random_image(rng, 13, 19, 1, smooth=True)
    np.testing.assert_allclose(jpeg_roundtrip(img, quality).plane, _reference_jpeg_gray(img.plane, quality), atol=1e-9)


@pytest.mark.parametrize("gray", [0, 37, 128, 200, 255])
@pytest.mark.parametrize("quality", [60, 75, 100])
def test_constant_gray_survives(gray, quality):
    # DC error is at most q_dc / 16, strictly below one unit once q_dc < 16
    img = ImageBuffer(np.full((16, 24, 3), float(gray)))
    out = jpeg_roundtrip(img, quality)
    assert np.max(np.abs(out.data - gray)) < 1.0


@pytest.mark.parametrize("gray", [37, 255])
def test_constant_gray_quality_50_tie(gray):
    # q_dc = 16: a DC value on a half step rounds away, an error of exactly one unit
    out = jpeg_roundtrip(ImageBuffer(np.full((8, 8), float(gray))), 50)
    assert np.max(np.abs(out.data - gray)) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("quality", [1, 10, 30])
def test_mid_gray_exact_any_quality(quality):
    img = ImageBuffer(np.full((8, 8, 3), 128.0))
    assert np.max(np.abs(jpeg_roundtrip(img, quality).data - 128.0)) < 1e-9


def test_psnr_monotone_in_quality(rng):
    for _ in range(10):
        img = random_image(rng, 32, 32, 3, smooth=True)
        values = [psnr(img, jpeg_roundtrip(img, q)) for q in (10, 30, 50, 70, 90, 100)]
        assert all(a <= b for a, b in zip(values, values[1:]))
        assert values[-1] > 40.0
        assert psnr(img, jpeg_roundtrip(img, 95)) > psnr(img, jpeg_roundtrip(img, 10))


def test_jpeg_odd_sizes_keep_shape(rng):
    img = random_image(rng, 7, 11, 3)
    out = jpeg_roundtrip(img, 60)
    assert out.data.shape == img.data.shape
    assert out.data.min() >= 0 and out.data.max() <= 255


def test_gaussian_kernel():
    k = gaussian_kernel1d(1.0)
    assert len(k) == 7 and k.sum() == pytest.approx(1.0)
    assert len(gaussian_kernel1d(0.4)) == 5


def test_blur_identity_and_constant(rng):
    img = random_image(rng, 9, 9)
    assert gaussian_blur(img, 0.0) == img
    const = ImageBuffer(np.full((9, 9, 3), 77.0))
    np.testing.assert_allclose(gaussian_blur(const, 1.7).data, 77.0, atol=1e-12)
    with pytest.raises(InvalidInputError):
        gaussian_blur(img, -1.0)


def test_blur_impulse_center():
    x = np.zeros((21, 21))
    x[10, 10] = 255.0
    k = gaussian_kernel1d(1.0)
    out = gaussian_blur(ImageBuffer(x), 1.0)
    assert out.plane[10, 10] == pytest.approx(255.0 * k[3] * k[3], rel=1e-12)


def test_blur_reduces_high_frequency_energy(rng):
    n = 64
    f = signed_freqs(n)
    high = np.hypot(f[:, None], f[None, :]) > n / 4
    for sigma in (1.0, 1.5, 2.5):
        x = rng.uniform(0, 255, (n, n))
        frac = lambda a: np.abs(fft2_array(a - a.mean())) ** 2
        before, after = frac(x), frac(gaussian_blur(ImageBuffer(x), sigma).plane)
        assert after[high].sum() / after.sum() < before[high].sum() / before.sum()


def test_noise():
    img = ImageBuffer(np.full((64, 64), 128.0))
    assert add_gaussian_noise(img, 0.0, Rng(1)) == img
    a = add_gaussian_noise(img, 5.0, Rng(1))
    assert a == add_gaussian_noise(img, 5.0, Rng(1))
    assert 4.5 <= a.data.std() <= 5.5


def test_cutout():
    img = ImageBuffer(np.full((10, 10, 3), 3.0))
    assert np.all(cutout(img, 0.999, Rng(0)).data == 128.0)
    out = cutout(img, 0.3, Rng(5))
    assert np.count_nonzero(np.any(out.data != img.data, axis=2)) == 9
    assert out == cutout(img, 0.3, Rng(5))
    with pytest.raises(InvalidInputError):
        cutout(img, 0.05, Rng(0))


def test_brightness_contrast():
    img = ImageBuffer(np.full((2, 2), 100.0))
    assert brightness_contrast(img, 0, 1) == img
    assert np.all(brightness_contrast(img, 10, 1).data == 110)
    assert brightness_contrast(ImageBuffer(np.array([[192.0]])), 0, 2).data.item() == 255
    with pytest.raises(InvalidInputError):
        brightness_contrast(img, 0, 0)


def test_policy_identity_and_collapse(rng):
    img = random_image(rng, 16, 16)
    assert apply_policy(img, AugmentPolicy(), Rng(3)) == img
    p = AugmentPolicy(jpeg_prob=1.0, jpeg_quality_range=(75, 75))
    assert apply_policy(img, p, Rng(3)) == jpeg_roundtrip(img, 75)


@given(st.integers(0, 2**32), st.sampled_from([BLUR_JPEG, STRONG]))
@settings(max_examples=20, deadline=None)
def test_policy_determinism_and_range(seed, policy):
    img = random_image(np.random.default_rng(seed), 16, 16)
    a = apply_policy(img, policy, Rng(seed))
    assert a == apply_policy(img, policy, Rng(seed))
    assert a.data.shape == img.data.shape
    assert a.data.min() >= 0 and a.data.max() <= 255


def test_policy_serialization():
    assert AugmentPolicy.from_dict(STRONG.to_dict()) == STRONG
    with pytest.raises(InvalidInputError):
        AugmentPolicy.from_dict({"bogus": 1})
    with pytest.raises(InvalidInputError):
        AugmentPolicy(jpeg_prob=1.5)
    with pytest.raises(InvalidInputError):
        AugmentPolicy(blur_sigma_range=(2.0, 1.0))
