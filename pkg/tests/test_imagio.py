import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image
from skimage.color import rgb2lab

from cosaliency import imagio
from cosaliency.errors import FormatError, IoError


def keys(x, a=-0.5):
    x = abs(x)
    if x <= 1:
        return (a + 2) * x**3 - (a + 3) * x**2 + 1
    if x < 2:
        return a * x**3 - 5 * a * x**2 + 8 * a * x - 4 * a
    return 0.0


def bicubic_loop(v, width, height):
    """Direct per-pixel evaluation of corner-aligned, edge-clamped Keys interpolation."""
    h, w = v.shape
    out = np.zeros((height, width))
    for i in range(height):
        sy = i * (h - 1) / (height - 1) if height > 1 else 0.0
        for j in range(width):
            sx = j * (w - 1) / (width - 1) if width > 1 else 0.0
            acc = 0.0
            for yy in range(int(np.floor(sy)) - 1, int(np.floor(sy)) + 3):
                for xx in range(int(np.floor(sx)) - 1, int(np.floor(sx)) + 3):
                    acc += keys(sy - yy) * keys(sx - xx) * v[min(max(yy, 0), h - 1), min(max(xx, 0), w - 1)]
            out[i, j] = acc
    return out


def test_lab_matches_skimage(rng):
    rgb = rng.integers(0, 256, (20, 30, 3)).astype(np.uint8)
    ref = rgb2lab(rgb, illuminant="D65")
    ref = np.stack([ref[..., 0] / 100, (ref[..., 1] + 128) / 255, (ref[..., 2] + 128) / 255], -1)
    np.testing.assert_allclose(imagio.rgb_to_lab(rgb), np.clip(ref, 0, 1), atol=2e-4)


def test_lab_anchor_colors():
    lab = imagio.rgb_to_lab(np.array([[[255, 255, 255], [0, 0, 0]]], dtype=np.uint8))
    np.testing.assert_allclose(lab[0, 0], [1.0, 128 / 255, 128 / 255], atol=1e-4)
    np.testing.assert_allclose(lab[0, 1], [0.0, 128 / 255, 128 / 255], atol=1e-9)


def test_bicubic_matches_direct_loop(rng):
    v = rng.random((7, 9))
    for w, h in [(13, 11), (4, 3), (9, 7), (20, 5)]:
        np.testing.assert_allclose(imagio.resize_bicubic(v, w, h), bicubic_loop(v, w, h), atol=1e-12)


def test_bicubic_keeps_constants_and_corners(rng):
    np.testing.assert_allclose(imagio.resize_bicubic(np.full((5, 6), 0.3), 17, 11), 0.3, atol=1e-12)
    v = rng.random((6, 8))
    out = imagio.resize_bicubic(v, 15, 12)
    assert out[0, 0] == pytest.approx(v[0, 0]) and out[-1, -1] == pytest.approx(v[-1, -1])


def test_cubic_weights_partition_of_unity():
    t = np.linspace(0, 0.999, 50)
    np.testing.assert_allclose(imagio.cubic_weights(t).sum(-1), 1.0, atol=1e-12)


def test_scalar_map_roundtrip_8_and_16_bit(tmp_path, rng):
    v = rng.random((10, 12))
    p8 = tmp_path / "a.png"
    imagio.save_scalar_png(p8, v)
    np.testing.assert_allclose(imagio.load_scalar_map(p8, 12, 10), np.rint(v * 255) / 255, atol=1e-12)
    p16 = tmp_path / "b.png"
    Image.fromarray((v * 65535).round().astype(np.uint16)).save(p16)
    np.testing.assert_allclose(imagio.load_scalar_map(p16, 12, 10), v, atol=1e-4)


def test_mask_nearest_resize(tmp_path):
    m = np.zeros((4, 4), dtype=np.uint8)
    m[:2, :2] = 255
    imagio.save_png(tmp_path / "m.png", m)
    big = imagio.load_mask(tmp_path / "m.png", 8, 8)
    assert big.dtype == bool and big[:4, :4].all() and not big[4:, :].any()


@settings(max_examples=30, deadline=None)
@given(h=st.integers(1, 6), w=st.integers(1, 6), c=st.integers(1, 4), seed=st.integers(0, 1000))
def test_csgt_roundtrip(tmp_path_factory, h, w, c, seed):
    data = np.random.default_rng(seed).normal(size=(h, w, c)).astype(np.float32)
    p = tmp_path_factory.mktemp("t") / "x.csgt"
    imagio.save_tensor(data, p)
    np.testing.assert_array_equal(imagio.load_tensor(p), data)


def test_csgt_rejects_bad_files(tmp_path):
    p = tmp_path / "x.csgt"
    imagio.save_tensor(np.zeros((2, 2, 1), np.float32), p)
    raw = p.read_bytes()
    (tmp_path / "magic.csgt").write_bytes(b"XXXX" + raw[4:])
    (tmp_path / "ver.csgt").write_bytes(raw[:4] + b"\x02" + raw[5:])
    (tmp_path / "short.csgt").write_bytes(raw[:-4])
    for name in ("magic", "ver", "short"):
        with pytest.raises(FormatError):
            imagio.load_tensor(tmp_path / f"{name}.csgt")


def test_load_errors(tmp_path):
    with pytest.raises(IoError):
        imagio.load_image(tmp_path / "missing.png")
    (tmp_path / "junk.png").write_bytes(b"not an image")
    with pytest.raises(FormatError):
        imagio.load_image(tmp_path / "junk.png")


def test_feature_tensor_validates_shape():
    with pytest.raises(FormatError):
        imagio.FeatureTensor(np.zeros((4, 4), np.float32), 8, 8)
    with pytest.raises(FormatError):
        imagio.FeatureTensor(np.zeros((16, 4, 2), np.float32), 8, 8)
    t = imagio.FeatureTensor(np.zeros((2, 3, 5), np.float32), 8, 8)
    assert (t.grid_height, t.grid_width, t.channels) == (2, 3, 5)
