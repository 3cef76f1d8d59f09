"""Synthetic image groups: one recurring colored shape per group plus per-image distractors."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import imagio
from .errors import InvalidArg
from .features import hist_bin_index

# saturated object colors and muted background colors; all fall in distinct histogram bins
OBJECT_COLORS = [
    (220, 30, 30), (30, 170, 40), (30, 60, 220), (240, 200, 20), (200, 40, 200),
    (20, 190, 200), (250, 130, 10), (120, 20, 160), (140, 230, 60), (250, 120, 170),
]
BACKGROUND_COLORS = [
    (128, 128, 128), (90, 80, 70), (190, 180, 160), (60, 70, 90), (150, 160, 140),
    (40, 40, 40), (210, 210, 215), (110, 95, 120), (170, 150, 110), (80, 110, 100),
]
SHAPES = ("disk", "square", "triangle", "ellipse", "diamond")


def _bin(color):
    return int(hist_bin_index(imagio.rgb_to_lab(np.array([[color]], dtype=np.uint8)))[0, 0])


def shape_mask(kind: str, h: int, w: int, cy: float, cx: float, r: float) -> np.ndarray:
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    dy, dx = (ys - cy) / r, (xs - cx) / r
    if kind == "disk":
        return dx * dx + dy * dy <= 1.0
    if kind == "square":
        return (np.abs(dx) <= 0.85) & (np.abs(dy) <= 0.85)
    if kind == "triangle":
        return (dy <= 0.8) & (dy >= -1.0 + 2.0 * np.abs(dx) * 0.9) & (np.abs(dx) <= 1.0)
    if kind == "ellipse":
        return (dx / 1.0) ** 2 + (dy / 0.6) ** 2 <= 1.0
    if kind == "diamond":
        return np.abs(dx) + np.abs(dy) <= 1.1
    raise InvalidArg(f"unknown shape {kind!r}")


@dataclass
class SyntheticImage:
    rgb: np.ndarray
    gt: np.ndarray  # common-object mask
    salient: np.ndarray  # all objects, common and distractor


@dataclass
class SyntheticGroup:
    name: str
    images: list

    @property
    def rgbs(self):
        return [im.rgb for im in self.images]

    @property
    def gts(self):
        return [im.gt for im in self.images]

    def oracle_iris(self):
        """IrIS maps equal to the salient-object masks (common object and distractors)."""
        return [im.salient.astype(np.float64) for im in self.images]


def _distinct(rng, pool, exclude_bins, count):
    choice = []
    for idx in rng.permutation(len(pool)):
        b = _bin(pool[idx])
        if b not in exclude_bins:
            choice.append(pool[idx])
            exclude_bins = exclude_bins | {b}
        if len(choice) == count:
            break
    return choice


def make_group(seed: int, n_images: int | None = None, size: int = 128, noise: float = 4.0,
               name: str | None = None) -> SyntheticGroup:
    rng = np.random.default_rng(seed)
    n_images = n_images or int(rng.integers(5, 9))
    common = OBJECT_COLORS[int(rng.integers(len(OBJECT_COLORS)))]
    kind = SHAPES[int(rng.integers(len(SHAPES)))]
    used = {_bin(common)}
    images = []
    for _ in range(n_images):
        h = w = size
        bg = _distinct(rng, BACKGROUND_COLORS, used, 2)
        rgb = np.empty((h, w, 3), dtype=np.float64)
        rgb[:] = bg[0]
        # second background tone on a random half-plane
        ys, xs = np.mgrid[0:h, 0:w]
        theta = rng.uniform(0, np.pi)
        split = (np.cos(theta) * (xs - w / 2) + np.sin(theta) * (ys - h / 2)) > rng.uniform(-0.3, 0.3) * w
        rgb[split] = bg[1]

        r = rng.uniform(0.16, 0.24) * size
        cy, cx = rng.uniform(0.35, 0.65, 2) * size
        gt = shape_mask(kind, h, w, cy, cx, r)
        salient = gt.copy()
        distract = _distinct(rng, OBJECT_COLORS, used | {_bin(c) for c in bg}, int(rng.integers(1, 3)))
        for dc in distract:
            for _ in range(50):
                dr = rng.uniform(0.08, 0.13) * size
                dy, dx = rng.uniform(dr + 2, size - dr - 2, 2)
                dm = shape_mask(SHAPES[int(rng.integers(len(SHAPES)))], h, w, dy, dx, dr)
                grown = np.zeros_like(salient)
                grown[max(int(dy - dr) - 4, 0):int(dy + dr) + 5, max(int(dx - dr) - 4, 0):int(dx + dr) + 5] = True
                if not (grown & salient).any():
                    rgb[dm] = dc
                    salient |= dm
                    break
        rgb[gt] = common
        rgb += rng.normal(0.0, noise, rgb.shape)
        images.append(SyntheticImage(np.clip(np.rint(rgb), 0, 255).astype(np.uint8), gt, salient))
    return SyntheticGroup(name or f"group{seed:02d}", images)


def write_group(group: SyntheticGroup, root, iris: bool = True) -> Path:
    """Write ``<root>/<group>/{images,gt,iris}/NNN.png``."""
    base = Path(root) / group.name
    for k, im in enumerate(group.images):
        stem = f"{k:03d}"
        imagio.save_png(base / "images" / f"{stem}.png", im.rgb)
        imagio.save_png(base / "gt" / f"{stem}.png", (im.gt * 255).astype(np.uint8))
        if iris:
            imagio.save_png(base / "iris" / f"{stem}.png", (im.salient * 255).astype(np.uint8))
    return base
