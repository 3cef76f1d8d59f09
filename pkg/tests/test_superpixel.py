import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from cosaliency import imagio, kernels, superpixel
from cosaliency.errors import DimMismatch, InvalidArg


def check_segmentation(seg):
    labels = seg.labels
    assert labels.min() == 0 and labels.max() == seg.n - 1
    assert seg.sizes.sum() == labels.size
    for i in range(seg.n):
        _, nc = ndimage.label(labels == i)
        assert nc == 1, f"segment {i} is not 4-connected"
    # edges: every 4-adjacent label pair appears once with i < j
    a = np.concatenate([labels[:, :-1].ravel(), labels[:-1, :].ravel()])
    b = np.concatenate([labels[:, 1:].ravel(), labels[1:, :].ravel()])
    d = a != b
    want = {(min(x, y), max(x, y)) for x, y in zip(a[d], b[d])}
    assert want == {tuple(e) for e in seg.edges.tolist()}
    border = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    np.testing.assert_array_equal(np.flatnonzero(seg.boundary), border)


def test_slic_segments_are_connected_partitions(small_group):
    for rgb in small_group.rgbs:
        seg = superpixel.slic(imagio.rgb_to_lab(rgb), 80)
        check_segmentation(seg)
        assert 40 <= seg.n <= 120


@settings(max_examples=15, deadline=None)
@given(h=st.integers(8, 40), w=st.integers(8, 40), k=st.integers(2, 30), seed=st.integers(0, 1000))
def test_slic_invariants_random_images(h, w, k, seed):
    lab = np.random.default_rng(seed).random((h, w, 3))
    seg = superpixel.slic(lab, min(k, h * w))
    check_segmentation(seg)
    assert 1 <= seg.n <= h * w


@pytest.mark.skipif(len(kernels.available_backends()) < 2, reason="compiled extension not built")
def test_slic_identical_across_backends(small_group):
    lab = imagio.rgb_to_lab(small_group.rgbs[1])
    a = superpixel.slic(lab, 70, backend="cython")
    b = superpixel.slic(lab, 70, backend="python")
    np.testing.assert_array_equal(a.labels, b.labels)


def test_uniform_image_gives_even_grid():
    seg = superpixel.slic(np.full((64, 64, 3), 0.5), 4)
    assert seg.n == 4
    assert seg.sizes.min() >= 0.8 * seg.sizes.max()


def test_photo_scale_segment_count(rng):
    # smooth random texture at photo size
    lab = np.stack([ndimage.gaussian_filter(rng.random((321, 321)), 6) for _ in range(3)], -1)
    lab = (lab - lab.min()) / (lab.max() - lab.min())
    seg = superpixel.slic(lab, 200)
    assert 150 <= seg.n <= 260


def test_slic_follows_color_edges():
    lab = np.zeros((40, 40, 3))
    lab[:, 20:] = [0.9, 0.2, 0.8]
    seg = superpixel.slic(lab, 16)
    for i in range(seg.n):
        cols = np.flatnonzero((seg.labels == i).any(0))
        assert cols.max() < 20 or cols.min() >= 20


def test_slic_rejects_bad_count():
    lab = np.zeros((4, 4, 3))
    with pytest.raises(InvalidArg):
        superpixel.slic(lab, 1)
    with pytest.raises(InvalidArg):
        superpixel.slic(lab, 17)


def test_segment_statistics(seg):
    for i in range(0, seg.n, 7):
        m = seg.labels == i
        np.testing.assert_allclose(seg.mean_lab[i], seg.lab[m].mean(0), atol=1e-12)
        ys, xs = np.nonzero(m)
        h, w = seg.labels.shape
        np.testing.assert_allclose(seg.mean_pos[i], [xs.mean() / (w - 1), ys.mean() / (h - 1)], atol=1e-12)
        np.testing.assert_array_equal(seg.neighbors(i), seg.adjacency_lists()[i])


def test_pool_median_matches_numpy(seg, rng):
    v = rng.random(seg.labels.shape)
    got = superpixel.pool_median(seg, v)
    want = [np.median(v[seg.labels == i]) for i in range(seg.n)]
    np.testing.assert_allclose(got, want, atol=0)


def test_pool_median_constant_and_quartet():
    s = superpixel.from_labels(np.zeros((1, 6, 3)), np.array([[0, 0, 0, 0, 1, 1]]))
    np.testing.assert_allclose(superpixel.pool_median(s, np.array([[0, 0, 0, 1, 0.3, 0.3]])), [0.0, 0.3])


def test_pool_median_even_count_midpoint():
    labels = np.array([[0, 0, 1, 1]])
    s = superpixel.from_labels(np.zeros((1, 4, 3)), labels)
    np.testing.assert_allclose(superpixel.pool_median(s, np.array([[0.1, 0.3, 0.9, 0.2]])), [0.2, 0.55])


def test_pool_mean_and_back_projection(seg, rng):
    v = rng.random(seg.labels.shape)
    mean = superpixel.pool_mean(seg, v)
    np.testing.assert_allclose(mean[3], v[seg.labels == 3].mean())
    px = superpixel.field_to_pixels(seg, mean)
    assert px.shape == seg.labels.shape and px[seg.labels == 3][0] == mean[3]


def test_pool_shape_checks(seg):
    with pytest.raises(DimMismatch):
        superpixel.pool_median(seg, np.zeros((3, 3)))
    with pytest.raises(DimMismatch):
        superpixel.field_to_pixels(seg, np.zeros(seg.n + 1))


def test_from_labels_rejects_gaps():
    with pytest.raises(InvalidArg):
        superpixel.from_labels(np.zeros((2, 2, 3)), np.array([[0, 0], [2, 2]]))


def test_boundary_overlay_marks_edges():
    labels = np.array([[0, 0, 1], [0, 0, 1]])
    out = superpixel.boundary_overlay(np.zeros((2, 3, 3), np.uint8), labels)
    assert (out[:, 1] == [255, 0, 0]).all() and (out[:, 0] == 0).all()
