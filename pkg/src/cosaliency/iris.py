"""Classical intra-image saliency used when no network maps are supplied.

Not a learned model: each segment is scored by its Lab contrast against the
image-border segments, weighted by a mild center prior.
"""
import numpy as np

from . import imagio, superpixel


def contrast_saliency(rgb: np.ndarray, n_segments: int = 200, compactness: float = 10.0) -> np.ndarray:
    lab = imagio.rgb_to_lab(rgb)
    seg = superpixel.slic(lab, n_segments, compactness)
    border = seg.mean_lab[seg.boundary]
    d = np.linalg.norm(seg.mean_lab[:, None, :] - border[None, :, :], axis=2)
    # distance to the nearest few border colors, robust to a single odd border segment
    k = min(3, border.shape[0])
    score = np.sort(d, axis=1)[:, :k].mean(1)
    center = np.exp(-((seg.mean_pos - 0.5) ** 2).sum(1) / (2 * 0.35**2))
    score = score * center
    lo, hi = score.min(), score.max()
    score = (score - lo) / (hi - lo) if hi > lo else np.zeros_like(score)
    return superpixel.field_to_pixels(seg, score)
