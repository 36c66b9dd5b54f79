import numpy as np
from hypothesis import given, settings, strategies as st

from mfc.shadow import ShadowMatchParams, predict_shadow_offset
from mfc.synthetic import make_scene, texture_patches


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_truth_is_consistent_with_projection(seed):
    syn = make_scene(seed, shape=(160, 160), n_clouds=2, radius=(8, 12), shift=(15, 40))
    g = syn.scene.geometry
    assert 20 <= g.sun_zenith <= 60 and 0 <= g.view_zenith <= 30
    grid = ShadowMatchParams().heights()
    assert not (syn.cloud & syn.shadow).any()
    for k, (h, (oy, ox)) in enumerate(zip(syn.heights, syn.offsets), start=1):
        assert h in grid
        dx, dy = predict_shadow_offset(h, g, syn.scene.pixel_size)
        assert (oy, ox) == (int(np.floor(dy + 0.5)), int(np.floor(dx + 0.5)))
        body = syn.cloud_ids == k
        rr, cc = np.nonzero(body)
        rr, cc = rr + oy, cc + ox
        ok = (rr >= 0) & (rr < 160) & (cc >= 0) & (cc < 160)
        landed = syn.shadow[rr[ok], cc[ok]] | syn.cloud[rr[ok], cc[ok]]
        assert landed.all()


def test_scene_generation_is_seeded():
    a, b = make_scene(4, water=True, road=True, snow=True), make_scene(4, water=True, road=True, snow=True)
    np.testing.assert_array_equal(a.scene.bands, b.scene.bands)
    assert a.heights == b.heights


def test_texture_patches_balanced():
    patches = texture_patches(seed=1, per_class=3, size=40)
    labels = [lab for _, lab in patches]
    assert len(patches) == 12 and len(set(labels)) == 4
    assert all(p.shape == (40, 40) and p.dtype == np.uint8 for p, _ in patches)
