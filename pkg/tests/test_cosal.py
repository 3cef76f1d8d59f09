import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cosaliency import cosal, graph, imagio, superpixel, synthetic
from cosaliency.config import Config
from cosaliency.errors import DegenerateSeeds, DimMismatch


def blocks(n=3, size=4):
    """n x n grid of square segments."""
    idx = np.arange(n * size) // size
    labels = idx[:, None] * n + idx[None, :]
    return superpixel.from_labels(np.zeros((n * size, n * size, 3)), labels)


def test_initial_cosal_examples():
    np.testing.assert_allclose(cosal.initial_cosal([0.9, 0.5, 0.2], [0.2, 0.5, 0.6], 0.5), [0.18, 0.5, 0.36])


def test_initial_cosal_branch_at_tau():
    # delta exactly tau takes the product branch
    assert cosal.initial_cosal([0.75], [0.25], 0.5)[0] == pytest.approx(0.75 * 0.25)
    assert cosal.initial_cosal([0.7499], [0.25], 0.5)[0] == pytest.approx((1 - 0.4999) * 0.7499 + 0.4999 * 0.25)


@settings(max_examples=50, deadline=None)
@given(rs=st.floats(0, 1), es=st.floats(0, 1), tau=st.floats(0.01, 0.99))
def test_initial_cosal_stays_in_unit_interval(rs, es, tau):
    v = cosal.initial_cosal([rs], [es], tau)[0]
    assert -1e-12 <= v <= 1 + 1e-12


def test_seed_rules():
    s = blocks()  # only segment 4 is interior
    ic = np.zeros(9)
    ic[4] = 0.9
    y_s, y_b = cosal.extract_group_seeds([s], [ic], n_clusters=2)
    assert y_s.tolist() == [0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0]
    assert y_b[:9].tolist() == [1, 1, 1, 1, 0, 1, 1, 1, 1] and not y_b[9:].any()
    ic2 = np.zeros(9)
    ic2[0] = 0.9  # top node on the border: in neither set
    with pytest.raises(DegenerateSeeds):
        cosal.extract_group_seeds([s], [ic2], 2)
    y_s, y_b = cosal.extract_group_seeds([s, s], [ic2, ic], 2)
    assert y_s[0] == 0 and y_b[0] == 0


def test_final_cosal_example():
    np.testing.assert_array_equal(cosal.final_cosal([0.2, 0.8], [0.5, 0.1]), [0.5, 0.8])


def test_postprocess_center_and_radial():
    s = blocks()
    cs = np.zeros(9)
    cs[4] = 0.8
    out = cosal.postprocess(s, cs, sigma=0.15)
    assert out[4] == 0.8 and not out[np.arange(9) != 4].any()
    uni = np.full(9, 0.6)
    out = cosal.postprocess(s, uni, sigma=0.2)
    h = w = 12
    pos = s.mean_pos * (w - 1)
    d = np.linalg.norm(pos - [(w - 1) / 2, (h - 1) / 2], axis=1) / np.hypot(w, h)
    np.testing.assert_allclose(out, 0.6 * np.exp(-d**2 / (2 * 0.2**2)), rtol=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_postprocess_never_increases(seg, seed):
    cs = np.random.default_rng(seed).random(seg.n)
    assert np.all(cosal.postprocess(seg, cs) <= cs)


def test_coseg_mask_threshold_convention():
    s = blocks()
    assert not cosal.to_coseg_mask(s, np.full(9, 0.49)).any()
    assert cosal.to_coseg_mask(s, np.full(9, 0.5)).all()
    mixed = np.zeros(9)
    mixed[[1, 7]] = 0.9
    np.testing.assert_array_equal(cosal.to_coseg_mask(s, mixed), np.isin(s.labels, [1, 7]))
    with pytest.raises(DimMismatch):
        cosal.to_coseg_mask(s, np.zeros(3))


def _duplicate_setup(small_group):
    rgb = small_group.rgbs[0]
    seg = superpixel.slic(imagio.rgb_to_lab(rgb), 60)
    ic = superpixel.pool_mean(seg, small_group.gts[0].astype(float))
    layer = graph.build_cluster_layer(np.concatenate([seg.mean_lab, seg.mean_lab]), 10)
    W = graph.integrated_graph([graph.intra_graph(seg)] * 2, np.concatenate([seg.mean_lab] * 2), layer)
    y_s, y_b = cosal.extract_group_seeds([seg, seg], [ic, ic], layer.k)
    return graph.RankingSolver(W, 0.95), y_s, y_b, W


def test_duplicate_images_get_identical_ac(small_group):
    solver, y_s, y_b, W = _duplicate_setup(small_group)
    ac = cosal.auxiliary_cosal(solver, y_s, y_b, W.block_slices()[:-1])
    np.testing.assert_allclose(ac[0], ac[1], atol=1e-12)


def test_huge_eta_gives_zero_field(small_group):
    solver, y_s, y_b, W = _duplicate_setup(small_group)
    ac = cosal.auxiliary_cosal(solver, y_s, y_b, W.block_slices()[:-1], eta=1e15)
    assert all(not a.any() for a in ac)


def test_coseg_mode_uses_affine_map(small_group):
    solver, y_s, y_b, W = _duplicate_setup(small_group)
    sl = W.block_slices()[:-1]
    raw = graph.contrast(solver.rank(y_s), solver.rank(y_b), 2.0)
    ac = cosal.auxiliary_cosal(solver, y_s, y_b, sl, coseg_mode=True)
    np.testing.assert_allclose(ac[0], (raw[sl[0]] + 1) / 2, atol=1e-12)


def test_detect_group_fields_and_determinism(small_group):
    cfg = Config(scales=(60, 30), clusters=20)
    a = cosal.detect_group(small_group.rgbs, small_group.oracle_iris(), config=cfg)
    b = cosal.detect_group(small_group.rgbs, small_group.oracle_iris(), config=cfg)
    for name in ("rs", "es", "ic", "ac", "cs"):
        for v in getattr(a, name):
            assert v.min() >= 0 and v.max() <= 1
    for x, y in zip(a.cs_maps(), b.cs_maps()):
        np.testing.assert_array_equal(x, y)
    for fused, final in zip(a.cs_fused, a.cs):
        assert np.all(final <= fused)


def test_detect_group_input_checks(small_group):
    with pytest.raises(DimMismatch):
        cosal.detect_group(small_group.rgbs, small_group.oracle_iris()[:2])
    maps = small_group.oracle_iris()
    maps[0] = maps[0][:10]
    with pytest.raises(DimMismatch):
        cosal.detect_group(small_group.rgbs, maps)


def test_training_samples_labels(small_group):
    cfg = Config(scales=(60,))
    x, y, rs, cs_gt, layout = cosal.training_samples(small_group.rgbs, small_group.oracle_iris(),
                                                     small_group.gts, None, cfg)
    assert x.shape == (len(y), layout.total)
    np.testing.assert_array_equal(y, (cs_gt >= 0.5).astype(int))
    assert 0 < y.mean() < 1


def test_synthetic_groups_are_reproducible():
    a, b = synthetic.make_group(7), synthetic.make_group(7)
    assert len(a.images) == len(b.images) and 5 <= len(a.images) <= 8
    for x, y in zip(a.images, b.images):
        np.testing.assert_array_equal(x.rgb, y.rgb)
        assert (x.gt <= x.salient).all()
