import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gandetect.imagecore import (
    DatasetManifest, FormatError, ImageBuffer, InvalidInputError, ManifestEntry, center_crop,
    extract_patches, fit_to_side, load_image, read_manifest, resize_bilinear, save_image, to_luma,
    write_manifest,
)


def test_load_p5(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5 2 2 255\n" + bytes([0, 128, 255, 64]))
    img = load_image(p)
    assert (img.width, img.height, img.channels) == (2, 2, 1)
    assert img.samples().tolist() == [0, 128, 255, 64]


def test_load_p6(tmp_path):
    p = tmp_path / "a.ppm"
    p.write_bytes(b"P6\n1 1\n255\n" + bytes([255, 0, 0]))
    img = load_image(p)
    assert img.channels == 3
    assert img.samples().tolist() == [255.0, 0.0, 0.0]


@pytest.mark.parametrize("blob", [
    b"P5 2 2 65535\n" + bytes(8),
    b"P5 2 2 255\n" + bytes(3),
    b"P3 1 1 255\n0 0 0",
    b"P5 2 x 255\n" + bytes(4),
    b"P5 2",
])
def test_load_rejects_malformed(tmp_path, blob):
    p = tmp_path / "bad.pgm"
    p.write_bytes(blob)
    with pytest.raises(FormatError):
        load_image(p)


def test_save_load_roundtrip(tmp_path, rng):
    for c in (1, 3):
        img = ImageBuffer(rng.integers(0, 256, (4, 4, c)).astype(float))
        save_image(img, tmp_path / "x.pnm")
        assert load_image(tmp_path / "x.pnm") == img


def test_save_rounding(tmp_path):
    save_image(ImageBuffer(np.array([[127.5, 127.4, 0.5, 254.5]])), tmp_path / "r.pgm")
    assert load_image(tmp_path / "r.pgm").samples().tolist() == [128, 127, 1, 255]


def test_save_unwritable(tmp_path):
    with pytest.raises(OSError):
        save_image(ImageBuffer(np.zeros((2, 2))), tmp_path / "missing" / "x.pgm")


@given(arrays(np.uint8, st.tuples(st.integers(1, 6), st.integers(1, 6), st.sampled_from([1, 3]))))
@settings(max_examples=30, deadline=None)
def test_roundtrip_property(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("rt") / "x.pnm"
    img = ImageBuffer(a.astype(float))
    save_image(img, p)
    assert load_image(p) == img


def test_to_luma():
    img = ImageBuffer(np.array([[[255, 0, 0], [0, 255, 0], [77, 77, 77]]], dtype=float))
    y = to_luma(img).samples()
    assert y[0] == pytest.approx(76.245)
    assert y[1] == pytest.approx(149.685)
    assert y[2] == pytest.approx(77.0)
    with pytest.raises(InvalidInputError):
        to_luma(ImageBuffer(np.zeros((2, 2))))


def test_center_crop():
    img = ImageBuffer(np.arange(16, dtype=float).reshape(4, 4))
    assert center_crop(img, 2, 2).samples().tolist() == [5, 6, 9, 10]
    assert center_crop(img, 4, 4) == img
    with pytest.raises(InvalidInputError):
        center_crop(img, 5, 5)


def test_resize_examples():
    img = ImageBuffer(np.array([[0.0, 100.0]]))
    up = resize_bilinear(img, 2.0)
    # the single row is doubled too; both copies carry the interpolated values
    assert (up.width, up.height) == (4, 2)
    assert up.plane.tolist() == [[0, 25, 75, 100]] * 2
    const = ImageBuffer(np.full((5, 7, 3), 42.0))
    for s in (0.3, 0.5, 1.7, 3.0):
        out = resize_bilinear(const, s)
        assert out.width == round(7 * s) and np.all(out.data == 42.0)
    with pytest.raises(InvalidInputError):
        resize_bilinear(img, float("nan"))
    with pytest.raises(InvalidInputError):
        resize_bilinear(img, 0.1)


def test_resize_identity(rng):
    img = ImageBuffer(rng.uniform(0, 255, (5, 6, 3)))
    assert resize_bilinear(img, 1.0) == img


@given(arrays(np.float64, (5, 4, 3), elements=st.floats(0, 255)), st.floats(0.3, 3.0))
@settings(max_examples=40, deadline=None)
def test_resize_stays_in_range(a, s):
    out = resize_bilinear(ImageBuffer(a), s).data
    for c in range(3):
        assert a[..., c].min() - 1e-9 <= out[..., c].min()
        assert out[..., c].max() <= a[..., c].max() + 1e-9


def test_extract_patches_counts():
    assert len(extract_patches(ImageBuffer(np.zeros((64, 64))), 32, 32)) == 4
    img = ImageBuffer(np.zeros((64, 65)))
    patches = extract_patches(img, 32, 32)
    assert len(patches) == 6
    one = ImageBuffer(np.arange(9.0).reshape(3, 3))
    assert extract_patches(one, 3, 1) == [one]
    with pytest.raises(InvalidInputError):
        extract_patches(img, 70, 8)


def test_extract_patches_anchor_positions():
    # x-anchors {0, 32, 33} on a 65-wide image; column index encodes x
    img = ImageBuffer(np.tile(np.arange(65.0), (64, 1)))
    firsts = [p.data[0, 0, 0] for p in extract_patches(img, 32, 32)]
    assert firsts == [0, 32, 33, 0, 32, 33]


@given(st.integers(4, 20), st.integers(4, 20), st.integers(1, 4), st.integers(1, 6))
@settings(max_examples=60, deadline=None)
def test_patches_cover_every_pixel(h, w, patch, stride):
    patch = min(patch, h, w)
    stride = min(stride, patch)  # gaps between patches are expected when stride > patch
    # pixel ids as sample values; a pixel is covered if its id shows up in a patch
    ids = np.arange(h * w, dtype=float).reshape(h, w)
    seen = set()
    for p in extract_patches(ImageBuffer(ids), patch, stride):
        assert p.width == p.height == patch
        seen.update(p.samples().astype(int).tolist())
    assert seen == set(range(h * w))


def test_fit_to_side():
    img = ImageBuffer(np.zeros((32, 32, 3)))
    assert fit_to_side(img, 64).width == 64
    big = ImageBuffer(np.arange(100.0).reshape(10, 10))
    assert fit_to_side(big, 4) == center_crop(big, 4, 4)


def test_manifest_roundtrip(tmp_path):
    m = DatasetManifest((
        ManifestEntry("train/real/0.ppm", 0, "real", 17),
        ManifestEntry("train/fake/0.ppm", 1, "gan-a", None),
        ManifestEntry("test/fake/0.ppm", 1, "gan-b", 2**63 - 1),
    ))
    write_manifest(m, tmp_path / "m.tsv")
    text = (tmp_path / "m.tsv").read_text()
    assert text.splitlines()[0] == "train/real/0.ppm\t0\treal\t17"
    back = read_manifest(tmp_path / "m.tsv")
    assert back.entries == m.entries
    assert back.split("train").sources() == ["gan-a", "real"]
    assert back.splits() == ["test", "train"]


def test_manifest_invariants(tmp_path):
    e = ManifestEntry("a.ppm", 0, "real")
    with pytest.raises(InvalidInputError):
        DatasetManifest((e, e))
    with pytest.raises(InvalidInputError):
        DatasetManifest((ManifestEntry("b.ppm", 2, "x"),))
    with pytest.raises(InvalidInputError):
        DatasetManifest((e,)).check_trainable()
    (tmp_path / "bad.tsv").write_text("a.ppm\t0\treal\n")
    with pytest.raises(FormatError):
        read_manifest(tmp_path / "bad.tsv")


def test_image_buffer_invariants():
    with pytest.raises(InvalidInputError):
        ImageBuffer(np.zeros((2, 2, 2)))
    with pytest.raises(InvalidInputError):
        ImageBuffer(np.array([[np.nan]]))
    img = ImageBuffer(np.zeros((2, 3, 3)))
    assert img.samples().size == 2 * 3 * 3
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 1.0
