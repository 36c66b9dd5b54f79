import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from mfc.errors import InputError
from mfc.raster import (
    Label,
    MaskLayer,
    Scene,
    ViewSunGeometry,
    downsample,
    load_scene,
    mask_from_binary,
    read_mask,
    upsample_mask,
    write_mask,
    write_scene,
)

LABEL_CODES = [int(v) for v in Label]


def _scene(rng, shape=(6, 5), geometry=None):
    bands = rng.uniform(0.0, 0.6, size=(4, *shape))
    return Scene(bands, np.ones(shape, bool), geometry=geometry)


def test_identity_calibration_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    s = _scene(rng, geometry=ViewSunGeometry(30.0, 120.0, 5.0, 200.0))
    hdr = write_scene(s, tmp_path / "a", dtype="float64")
    back = load_scene(hdr)
    np.testing.assert_array_equal(back.bands, s.bands)
    assert back.geometry == s.geometry
    assert back.pixel_size == s.pixel_size


def test_linear_calibration(tmp_path):
    dn = np.full((4, 2, 3), 100.0)
    Scene(dn, np.ones((2, 3), bool))
    s = write_scene(Scene(dn, np.ones((2, 3), bool)), tmp_path / "dn", dtype="uint16", nodata=0)
    back = load_scene(s, calibration=[(0.002, 0.0)] * 4)
    np.testing.assert_allclose(back.bands, 0.2, rtol=0, atol=1e-15)


def test_nodata_marks_invalid(tmp_path):
    rng = np.random.default_rng(1)
    valid = np.ones((4, 4), bool)
    valid[1, 2] = False
    s = Scene(rng.uniform(0.1, 0.5, (4, 4, 4)), valid)
    back = load_scene(write_scene(s, tmp_path / "n"))
    np.testing.assert_array_equal(back.valid, valid)
    assert np.all(back.bands[:, 1, 2] == 0)


def test_band_count_error(tmp_path):
    s = write_scene(_scene(np.random.default_rng(2)), tmp_path / "b")
    s.write_text(s.read_text().replace("bands = 4", "bands = 2"))
    with pytest.raises(InputError, match="band-count"):
        load_scene(s)
    with pytest.raises(InputError, match="band-count"):
        Scene(np.zeros((2, 3, 3)), np.ones((3, 3), bool))


def test_dimension_mismatch(tmp_path):
    s = write_scene(_scene(np.random.default_rng(3)), tmp_path / "d")
    s.write_text(s.read_text().replace("width = 5", "width = 7"))
    with pytest.raises(InputError, match="dimension mismatch"):
        load_scene(s)


def test_missing_scene(tmp_path):
    with pytest.raises(InputError):
        load_scene(tmp_path / "nope.hdr")


def test_geometry_absent_without_angles(tmp_path):
    s = write_scene(_scene(np.random.default_rng(4)), tmp_path / "g")
    assert load_scene(s).geometry is None


@pytest.mark.parametrize("kw", [dict(sun_zenith=90.0, sun_azimuth=0.0), dict(sun_zenith=10.0, sun_azimuth=360.0)])
def test_geometry_ranges(kw):
    with pytest.raises(InputError):
        ViewSunGeometry(**kw)


def test_scene_is_read_only():
    s = _scene(np.random.default_rng(5))
    with pytest.raises(ValueError):
        s.bands[0, 0, 0] = 1.0


def test_all_clear_mask_bytes(tmp_path):
    m = MaskLayer(np.full((2, 2), Label.CLEAR, np.uint8))
    write_mask(m, tmp_path / "m.raw")
    assert (tmp_path / "m.raw").read_bytes() == bytes([1, 1, 1, 1])


def test_mixed_mask_bytes(tmp_path):
    labels = np.array([[255, 128], [1, 0]], np.uint8)
    write_mask(MaskLayer(labels), tmp_path / "m.raw")
    assert (tmp_path / "m.raw").read_bytes() == bytes([255, 128, 1, 0])


def test_mask_rejects_foreign_codes():
    with pytest.raises(InputError):
        MaskLayer(np.array([[2]], np.uint8))


def test_mask_from_binary_encoding():
    out = mask_from_binary(np.array([[True, False, True]]), np.array([[True, True, False]]))
    assert out.tolist() == [[255, 1, 0]]


@settings(max_examples=40, deadline=None)
@given(
    labels=hnp.arrays(np.uint8, hnp.array_shapes(min_dims=2, max_dims=2, max_side=12), elements=st.sampled_from(LABEL_CODES)),
    suffix=st.sampled_from([".raw", ".png", ".tif"]),
)
def test_mask_roundtrip(tmp_path_factory, labels, suffix):
    path = tmp_path_factory.mktemp("m") / f"mask{suffix}"
    m = MaskLayer(labels)
    write_mask(m, path)
    assert read_mask(path) == m


def test_downsample_identity():
    s = _scene(np.random.default_rng(6))
    d = downsample(s, 1)
    np.testing.assert_array_equal(d.bands, s.bands)
    np.testing.assert_array_equal(d.valid, s.valid)


def test_downsample_constant_quarter():
    s = Scene(np.full((4, 8, 12), 0.37), np.ones((8, 12), bool))
    d = downsample(s, 4)
    assert d.shape == (2, 3)
    assert np.all(d.bands == 0.37)
    assert d.pixel_size == 4 * s.pixel_size


def test_downsample_block_mean():
    b = np.array([[0.1, 0.2], [0.3, 0.4]])
    d = downsample(Scene.from_bands(b, b, b, b), 2)
    assert d.bands[:, 0, 0] == pytest.approx([0.25] * 4, abs=1e-15)


def test_downsample_partial_invalid_block():
    b = np.array([[0.1, 0.2], [0.3, 0.4]])
    valid = np.array([[True, False], [False, False]])
    d = downsample(Scene.from_bands(b, b, b, b, valid=valid), 2)
    assert d.valid[0, 0]
    assert d.bands[0, 0, 0] == 0.1
    d = downsample(Scene.from_bands(b, b, b, b, valid=np.zeros((2, 2), bool)), 2)
    assert not d.valid[0, 0]


def test_downsample_rejects_bad_factor():
    with pytest.raises(InputError):
        downsample(_scene(np.random.default_rng(7)), 0)


def test_upsample_identity_and_replication():
    m = MaskLayer(np.array([[255, 1], [128, 0]], np.uint8))
    assert upsample_mask(m, 1, m.shape) == m
    one = upsample_mask(MaskLayer(np.array([[255]], np.uint8)), 3, (3, 3))
    assert np.all(one.labels == 255)


def test_upsample_checkerboard_matches_nearest_oracle():
    rng = np.random.default_rng(8)
    small = rng.choice(LABEL_CODES, size=(5, 7)).astype(np.uint8)
    factor, target = 3, (14, 20)
    big = upsample_mask(MaskLayer(small), factor, target).labels
    for r in range(target[0]):
        for c in range(target[1]):
            assert big[r, c] == small[r // factor, c // factor]


def test_upsample_dimension_mismatch():
    m = MaskLayer(np.ones((2, 2), np.uint8))
    with pytest.raises(InputError, match="dimension mismatch"):
        upsample_mask(m, 3, (9, 6))
    with pytest.raises(InputError, match="dimension mismatch"):
        upsample_mask(m, 3, (3, 6))


@settings(max_examples=30, deadline=None)
@given(h=st.integers(1, 20), w=st.integers(1, 20), factor=st.integers(1, 7), value=st.floats(0.0, 2.0))
def test_downsample_preserves_constant_mean(h, w, factor, value):
    s = Scene(np.full((4, h, w), value), np.ones((h, w), bool))
    d = downsample(s, factor)
    assert np.all(d.bands == value)
    back = upsample_mask(MaskLayer(mask_from_binary(np.zeros(d.shape, bool), d.valid)), factor, (h, w))
    assert back.shape == (h, w)
