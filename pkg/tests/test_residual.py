import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gandetect.imagecore import ImageBuffer, InvalidInputError, load_image, luma_plane
from gandetect.residual import (
    THIRD_ORDER, Fingerprint, attribute, correlate, denoise_residual, estimate_fingerprint, export_fingerprint,
    highpass_residual,
)
from gandetect.synthgen import KERNELS, GeneratorConfig, gen_fake


def test_highpass_annihilates_low_order():
    assert np.all(highpass_residual(ImageBuffer(np.full((5, 9), 42.0))) == 0)
    ramp = np.tile(np.arange(10.0), (4, 1))
    assert np.all(highpass_residual(ramp) == 0)
    quad = np.tile(np.arange(10.0) ** 2, (4, 1))
    assert np.all(highpass_residual(quad) == 0)


@pytest.mark.parametrize("pos", [2, 3, 5])
def test_highpass_impulse_matches_convolution(pos):
    row = np.zeros(10)
    row[pos] = 255.0
    out = highpass_residual(np.tile(row, (4, 1)))[0]
    np.testing.assert_array_equal(out, np.convolve(row, THIRD_ORDER, mode="valid"))
    if pos >= 3:
        # all four taps fall inside the valid range
        np.testing.assert_array_equal(out[pos - 3:pos + 1], [255, -765, 765, -255])


def test_highpass_vertical_and_errors(rng):
    x = rng.uniform(0, 255, (7, 6))
    np.testing.assert_array_equal(highpass_residual(x, "vertical"), highpass_residual(x.T).T)
    assert highpass_residual(x).shape == (7, 3)
    with pytest.raises(InvalidInputError):
        highpass_residual(np.zeros((3, 8)))
    with pytest.raises(InvalidInputError):
        highpass_residual(x, "diagonal")


def _median_oracle(x):
    p = np.pad(x, 1, mode="edge")
    h, w = x.shape
    return np.array([[np.median(p[y:y + 3, c:c + 3]) for c in range(w)] for y in range(h)])


def test_denoise_impulse():
    x = np.zeros((7, 7))
    x[3, 3] = 255.0
    r = denoise_residual(x)
    assert r[3, 3] == 255 and np.count_nonzero(r) == 1


def test_denoise_checkerboard_matches_oracle():
    y, x = np.mgrid[:8, :8]
    board = 255.0 * ((x + y) % 2)
    r = denoise_residual(board)
    np.testing.assert_array_equal(r, board - _median_oracle(board))
    # interior 3x3 windows hold five of one parity and four of the other,
    # so the median is the center value itself
    assert np.all(r[1:-1, 1:-1] == 0)


@given(arrays(np.float64, st.tuples(st.integers(3, 9), st.integers(3, 9)), elements=st.floats(0, 255)))
@settings(max_examples=40, deadline=None)
def test_denoise_matches_oracle_and_range(x):
    r = denoise_residual(x)
    np.testing.assert_array_equal(r, x - _median_oracle(x))
    assert np.all(np.abs(r) <= 255)


def test_fingerprint_contract(rng):
    img = ImageBuffer(rng.uniform(0, 255, (16, 16)))
    fp = estimate_fingerprint([img] * 8, "x")
    r = denoise_residual(img)
    np.testing.assert_allclose(fp.values, r - r.mean(), atol=1e-12)
    assert abs(fp.values.mean()) < 1e-9 and fp.count == 8
    with pytest.raises(InvalidInputError):
        estimate_fingerprint([img] * 7)
    with pytest.raises(InvalidInputError):
        estimate_fingerprint([img] * 7 + [ImageBuffer(np.zeros((8, 8)))])


def test_fingerprint_improves_with_count(rng):
    pattern = 128 + 20 * np.sign(rng.normal(size=(32, 32)))
    clean = denoise_residual(pattern)

    def corr(n):
        imgs = [ImageBuffer(np.clip(pattern + rng.normal(0, 30, pattern.shape), 0, 255)) for _ in range(n)]
        return correlate(clean, estimate_fingerprint(imgs))

    assert corr(128) > corr(8)


def test_fingerprint_is_linear(rng):
    imgs = [ImageBuffer(rng.uniform(0, 255, (12, 12))) for _ in range(24)]
    a, b = estimate_fingerprint(imgs[:8]), estimate_fingerprint(imgs[8:])
    whole = estimate_fingerprint(imgs)
    np.testing.assert_allclose(whole.values, (8 * a.values + 16 * b.values) / 24, atol=1e-9)


def test_correlate(rng):
    fp = Fingerprint(rng.normal(size=(16, 16)), 8)
    assert correlate(fp.values, fp) == pytest.approx(1.0)
    assert correlate(-fp.values, fp) == pytest.approx(-1.0)
    assert correlate(3.5 * fp.values + 2, fp) == pytest.approx(1.0)
    assert correlate(np.zeros((16, 16)), fp) == 0.0
    with pytest.raises(InvalidInputError):
        correlate(np.zeros((8, 8)), fp)


def test_correlate_random_patterns_near_zero():
    for seed in range(100):
        r = np.random.default_rng(seed)
        assert abs(correlate(r.normal(size=(64, 64)), r.normal(size=(64, 64)))) < 0.1


@given(st.floats(0.01, 100))
@settings(max_examples=30, deadline=None)
def test_correlate_scale_invariant(alpha):
    r = np.random.default_rng(0)
    res, fp = r.normal(size=(16, 16)), Fingerprint(r.normal(size=(16, 16)), 8)
    assert correlate(alpha * res, fp) == pytest.approx(correlate(res, fp), abs=1e-12)


def test_attribute_ties_and_errors(rng):
    img = ImageBuffer(rng.uniform(0, 255, (16, 16)))
    fp = Fingerprint(rng.normal(size=(16, 16)), 8)
    assert attribute(img, [fp])[0] == 0
    assert attribute(img, [fp, fp, fp])[0] == 0
    with pytest.raises(InvalidInputError):
        attribute(img, [])


def test_attribution_between_generators():
    a = GeneratorConfig("a", 32, 1, "zero-insertion", KERNELS["k-a"], 0.8)
    b = GeneratorConfig("b", 32, 1, "zero-insertion", KERNELS["k-b"], 0.8)
    fps = [estimate_fingerprint([gen_fake(s, g) for s in range(64)], g.tag) for g in (a, b)]
    hits = sum(attribute(gen_fake(1000 + s, a), fps)[0] == 0 for s in range(200))
    assert hits >= 180


def test_export_roundtrip(tmp_path, rng):
    fp = Fingerprint(rng.normal(size=(8, 8)), 12, "gan-a")
    export_fingerprint(fp, tmp_path / "fp.pgm")
    img = load_image(tmp_path / "fp.pgm")
    assert (img.width, img.height) == (8, 8)
    assert img.data.min() == 0 and img.data.max() == 255
    side = dict(line.split("\t") for line in (tmp_path / "fp.txt").read_text().splitlines())
    assert side["count"] == "12" and side["source"] == "gan-a"
    # the sidecar inverts the rescale to within one quantization step
    back = luma_plane(img) / float(side["scale"]) + float(side["offset"])
    assert np.max(np.abs(back - fp.values)) <= 0.5 / float(side["scale"]) + 1e-12
