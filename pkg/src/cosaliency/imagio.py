"""Image and map I/O, sRGB to normalized CIELAB, bicubic resampling and the CSGT tensor format.

Images are plain numpy arrays throughout the package:

* RGB images: ``uint8`` arrays of shape ``(H, W, 3)``
* Lab images: ``float64`` arrays of shape ``(H, W, 3)`` with every channel in [0, 1]
* scalar maps: ``float64`` arrays of shape ``(H, W)`` in [0, 1]
* feature tensors: :class:`FeatureTensor`
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import FormatError, InvalidArg, IoError

CSGT_MAGIC = b"CSGT"
CSGT_VERSION = 1
_HEADER = struct.Struct("<4sBIII")

# sRGB primaries, D65 white
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_D65 = np.array([0.95047, 1.0, 1.08883])


@dataclass(frozen=True)
class FeatureTensor:
    """A per-image feature grid (e.g. conv activations) with its source image size."""

    data: np.ndarray  # (gridHeight, gridWidth, channels), float32
    source_width: int
    source_height: int

    def __post_init__(self):
        if self.data.ndim != 3:
            raise FormatError(f"feature tensor must be 3-D, got shape {self.data.shape}")
        gh, gw, _ = self.data.shape
        if gw > self.source_width or gh > self.source_height:
            raise FormatError("feature grid larger than its source image")

    @property
    def grid_width(self) -> int:
        return self.data.shape[1]

    @property
    def grid_height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


def _open(path) -> Image.Image:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        img = Image.open(io.BytesIO(raw))
        img.load()
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise FormatError(f"cannot decode {path}: {exc}") from exc
    return img


def load_image(path) -> np.ndarray:
    """Decode a PNG/JPEG file into an ``(H, W, 3)`` uint8 array."""
    img = _open(path)
    return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()


def save_png(path, array: np.ndarray) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(array).save(path, format="PNG")


def save_scalar_png(path, values: np.ndarray) -> None:
    """Write a [0, 1] map as 8-bit gray, value = round(255 * v)."""
    q = np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)
    save_png(path, q)


def save_label_png(path, labels: np.ndarray) -> None:
    save_png(path, labels.astype(np.uint16))


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """sRGB (D65) to CIELAB with channels rescaled to [0, 1].

    L is divided by 100 and a, b are mapped by ``(v + 128) / 255``; results are clamped.
    """
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _RGB_TO_XYZ.T / _D65
    eps = (6.0 / 29.0) ** 3
    f = np.where(xyz > eps, np.cbrt(xyz), xyz / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = (116.0 * f[..., 1] - 16.0) / 100.0
    lab[..., 1] = (500.0 * (f[..., 0] - f[..., 1]) + 128.0) / 255.0
    lab[..., 2] = (200.0 * (f[..., 1] - f[..., 2]) + 128.0) / 255.0
    return np.clip(lab, 0.0, 1.0)


def cubic_weights(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    """Keys cubic kernel evaluated at offsets ``t + 1, t, 1 - t, 2 - t`` (t in [0, 1))."""
    t = np.asarray(t, dtype=np.float64)[..., None]
    x = np.abs(np.concatenate([t + 1.0, t, 1.0 - t, 2.0 - t], axis=-1))
    near = ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    far = ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    return np.where(x <= 1.0, near, np.where(x < 2.0, far, 0.0))


def _resample_matrix(n_in: int, n_out: int) -> np.ndarray:
    # corner-aligned sampling: output ends land exactly on input ends
    if n_out == 1 or n_in == 1:
        pos = np.zeros(n_out)
    else:
        pos = np.arange(n_out) * (n_in - 1) / (n_out - 1)
    base = np.floor(pos).astype(int)
    base = np.minimum(base, n_in - 1)
    w = cubic_weights(pos - base)
    R = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for k, off in enumerate((-1, 0, 1, 2)):
        idx = np.clip(base + off, 0, n_in - 1)
        np.add.at(R, (rows, idx), w[:, k])
    return R


def resize_bicubic(values: np.ndarray, width: int, height: int) -> np.ndarray:
    """Separable Catmull-Rom resampling of a 2-D map (edge-replicated, corner-aligned)."""
    values = np.asarray(values, dtype=np.float64)
    h, w = values.shape
    if (h, w) == (height, width):
        return values.copy()
    return _resample_matrix(h, height) @ values @ _resample_matrix(w, width).T


def resize_nearest(values: np.ndarray, width: int, height: int) -> np.ndarray:
    h, w = values.shape[:2]
    ys = np.minimum((np.arange(height) + 0.5) * h / height, h - 1).astype(int)
    xs = np.minimum((np.arange(width) + 0.5) * w / width, w - 1).astype(int)
    return values[ys[:, None], xs[None, :]]


def read_gray(path) -> np.ndarray:
    """Single-channel map in [0, 1] at its native size (8/16-bit PNG, float image or C=1 CSGT)."""
    path = Path(path)
    if path.suffix.lower() == ".csgt":
        t = load_tensor(path)
        if t.shape[2] != 1:
            raise FormatError(f"{path}: scalar map tensors need C=1, got C={t.shape[2]}")
        return t[:, :, 0].astype(np.float64)
    img = _open(path)
    if img.mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = np.asarray(img, dtype=np.float64)
        return arr / 65535.0
    if img.mode == "F":
        return np.asarray(img, dtype=np.float64)
    arr = np.asarray(img.convert("L"), dtype=np.float64)
    return arr / 255.0


def load_scalar_map(path, width: int, height: int) -> np.ndarray:
    """Load a saliency-style map, rescale to [0, 1], bicubic-resize to ``(height, width)``."""
    if width <= 0 or height <= 0:
        raise InvalidArg("target dimensions must be positive")
    values = read_gray(path)
    return np.clip(resize_bicubic(values, width, height), 0.0, 1.0)


def load_mask(path, width: int, height: int) -> np.ndarray:
    """Load a ground-truth mask as boolean, nearest-neighbour resized."""
    values = read_gray(path)
    return resize_nearest(values, width, height) >= 0.5


def save_tensor(tensor, path) -> None:
    """Write an ``(H, W, C)`` array (or :class:`FeatureTensor`) in CSGT format."""
    data = tensor.data if isinstance(tensor, FeatureTensor) else tensor
    data = np.asarray(data)
    if data.ndim == 2:
        data = data[:, :, None]
    if data.ndim != 3:
        raise FormatError(f"tensor must be 2-D or 3-D, got shape {data.shape}")
    h, w, c = data.shape
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CSGT_MAGIC, CSGT_VERSION, h, w, c))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def load_tensor(path) -> np.ndarray:
    """Read a CSGT file into a float32 ``(H, W, C)`` array."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, h, w, c = _HEADER.unpack_from(raw)
    if magic != CSGT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != CSGT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    n = h * w * c
    body = raw[_HEADER.size:]
    if len(body) != 4 * n:
        raise FormatError(f"{path}: expected {4 * n} payload bytes, got {len(body)}")
    return np.frombuffer(body, dtype="<f4").reshape(h, w, c).astype(np.float32)


def load_feature_tensor(path, source_width: int, source_height: int) -> FeatureTensor:
    return FeatureTensor(load_tensor(path), source_width, source_height)
