import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from skimage.measure import label as sk_label

from cosaliency import kernels

BACKENDS = sorted(kernels.available_backends())


def brute_assign(lab, centers, step, spatial_weight):
    """Dense oracle: every pixel takes the nearest center among those whose window covers it."""
    h, w = lab.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w]
    best = np.full((h, w), np.inf)
    out = np.full((h, w), -1, dtype=np.int32)
    for k, (cl, ca, cb, cy, cx) in enumerate(centers):
        inside = (ys >= max(int(cy - step), 0)) & (ys <= int(cy + step)) & \
                 (xs >= max(int(cx - step), 0)) & (xs <= int(cx + step))
        d = ((lab - [cl, ca, cb]) ** 2).sum(-1) + ((ys - cy) ** 2 + (xs - cx) ** 2) * spatial_weight
        take = inside & (d < best)
        best[take] = d[take]
        out[take] = k
    return out


def random_centers(rng, h, w, k):
    return np.column_stack([rng.random((k, 3)), rng.uniform(0, h - 1, k), rng.uniform(0, w - 1, k)])


@pytest.mark.parametrize("backend", BACKENDS)
def test_slic_assign_matches_brute_force(backend, rng):
    for _ in range(5):
        h, w = rng.integers(5, 30, 2)
        lab = rng.random((h, w, 3))
        c = random_centers(rng, h, w, int(rng.integers(1, 12)))
        step = int(rng.integers(2, 8))
        got = kernels.slic_assign(lab, c, step, 0.01, backend=backend)
        np.testing.assert_array_equal(got, brute_assign(lab, c, step, 0.01))


def same_partition(a, b):
    pairs = np.unique(np.stack([a.ravel(), b.ravel()], 1), axis=0)
    return len(pairs) == len(np.unique(a)) == len(np.unique(b))


@settings(max_examples=40, deadline=None)
@given(h=st.integers(1, 15), w=st.integers(1, 15), k=st.integers(1, 4), seed=st.integers(0, 10_000))
def test_label_components_backends_agree_with_skimage(h, w, k, seed):
    labels = np.random.default_rng(seed).integers(0, k, (h, w)).astype(np.int32)
    ref = sk_label(labels + 1, connectivity=1, background=0)
    for b in BACKENDS:
        comp, n = kernels.label_components(labels, backend=b)
        assert n == ref.max()
        assert same_partition(comp, ref)
        # numbered by first occurrence in raster order
        _, first = np.unique(comp.ravel(), return_index=True)
        assert np.all(np.diff(first) > 0)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")
def test_backends_bitwise_equal(rng):
    lab = rng.random((40, 50, 3))
    c = random_centers(rng, 40, 50, 20)
    a = kernels.slic_assign(lab, c, 6, 0.004, backend="cython")
    b = kernels.slic_assign(lab, c, 6, 0.004, backend="python")
    np.testing.assert_array_equal(a, b)
    ca, na = kernels.label_components(a, backend="cython")
    cb, nb = kernels.label_components(b, backend="python")
    assert na == nb
    np.testing.assert_array_equal(ca, cb)


def test_backend_flag_is_known():
    assert kernels.BACKEND in BACKENDS
