"""SLIC over-segmentation and segment-level pooling of pixel fields."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimMismatch, InvalidArg


@dataclass(eq=False)
class SegmentedImage:
    """An image partitioned into 4-connected segments.

    ``edges`` holds each adjacent segment pair once as ``(i, j)`` with ``i < j``.
    ``mean_pos`` is ``(x, y)`` normalized so the image spans [0, 1] on each axis.
    """

    lab: np.ndarray
    labels: np.ndarray
    n: int
    edges: np.ndarray
    boundary: np.ndarray
    sizes: np.ndarray
    mean_lab: np.ndarray
    mean_pos: np.ndarray

    @property
    def shape(self):
        return self.labels.shape

    def neighbors(self, i: int) -> np.ndarray:
        e = self.edges
        return np.sort(np.concatenate([e[e[:, 0] == i, 1], e[e[:, 1] == i, 0]]))

    def adjacency_lists(self) -> list[np.ndarray]:
        out = [[] for _ in range(self.n)]
        for i, j in self.edges:
            out[i].append(j)
            out[j].append(i)
        return [np.array(sorted(a), dtype=np.int64) for a in out]


def _pixel_positions(h, w):
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    xs = xs / max(w - 1, 1)
    ys = ys / max(h - 1, 1)
    return xs, ys


def from_labels(lab: np.ndarray, labels: np.ndarray) -> SegmentedImage:
    """Build a :class:`SegmentedImage` from an explicit consecutive label map."""
    labels = np.ascontiguousarray(labels, dtype=np.int32)
    h, w = labels.shape
    if lab.shape[:2] != (h, w):
        raise DimMismatch(f"label map {labels.shape} vs image {lab.shape[:2]}")
    n = int(labels.max()) + 1
    flat = labels.ravel()
    sizes = np.bincount(flat, minlength=n)
    if np.any(sizes == 0):
        raise InvalidArg("labels must be consecutive with every segment nonempty")

    a = np.concatenate([labels[:, :-1].ravel(), labels[:-1, :].ravel()])
    b = np.concatenate([labels[:, 1:].ravel(), labels[1:, :].ravel()])
    diff = a != b
    pairs = np.stack([np.minimum(a[diff], b[diff]), np.maximum(a[diff], b[diff])], axis=1)
    edges = np.unique(pairs, axis=0) if pairs.size else np.zeros((0, 2), dtype=np.int32)

    border = np.zeros((h, w), dtype=bool)
    border[0, :] = border[-1, :] = border[:, 0] = border[:, -1] = True
    boundary = np.zeros(n, dtype=bool)
    boundary[np.unique(labels[border])] = True

    lab_flat = lab.reshape(-1, 3)
    mean_lab = np.stack([np.bincount(flat, lab_flat[:, c], n) for c in range(3)], axis=1) / sizes[:, None]
    xs, ys = _pixel_positions(h, w)
    mean_pos = np.stack(
        [np.bincount(flat, xs.ravel(), n), np.bincount(flat, ys.ravel(), n)], axis=1
    ) / sizes[:, None]
    return SegmentedImage(
        lab=lab,
        labels=labels,
        n=n,
        edges=edges.astype(np.int64),
        boundary=boundary,
        sizes=sizes,
        mean_lab=np.clip(mean_lab, 0.0, 1.0),
        mean_pos=np.clip(mean_pos, 0.0, 1.0),
    )


def _gradient(lab):
    p = np.pad(lab, ((1, 1), (1, 1), (0, 0)), mode="edge")
    gx = p[1:-1, 2:] - p[1:-1, :-2]
    gy = p[2:, 1:-1] - p[:-2, 1:-1]
    return (gx * gx).sum(-1) + (gy * gy).sum(-1)


def _initial_centers(lab, step):
    h, w = lab.shape[:2]
    ny = max(1, int(round(h / step)))
    nx = max(1, int(round(w / step)))
    cy = ((np.arange(ny) + 0.5) * h / ny).astype(int)
    cx = ((np.arange(nx) + 0.5) * w / nx).astype(int)
    grad = _gradient(lab)
    centers = []
    for y in cy:
        for x in cx:
            # move to the lowest-gradient pixel of the 3x3 neighbourhood
            y0, y1 = max(y - 1, 0), min(y + 2, h)
            x0, x1 = max(x - 1, 0), min(x + 2, w)
            win = grad[y0:y1, x0:x1]
            dy, dx = np.unravel_index(np.argmin(win), win.shape)
            yy, xx = y0 + dy, x0 + dx
            centers.append([*lab[yy, xx], float(yy), float(xx)])
    return np.array(centers, dtype=np.float64)


def _update_centers(lab, labels, centers):
    h, w = labels.shape
    k = centers.shape[0]
    flat = labels.ravel()
    ok = flat >= 0
    idx = flat[ok]
    counts = np.bincount(idx, minlength=k)
    ys, xs = np.mgrid[0:h, 0:w]
    feats = [lab[..., 0], lab[..., 1], lab[..., 2], ys, xs]
    new = centers.copy()
    nz = counts > 0
    for c, f in enumerate(feats):
        s = np.bincount(idx, f.ravel()[ok].astype(np.float64), minlength=k)
        new[nz, c] = s[nz] / counts[nz]
    return new


def _merge_small(comp, n_comp, min_size):
    h, w = comp.shape
    sizes = np.bincount(comp.ravel(), minlength=n_comp).astype(np.int64)
    a = np.concatenate([comp[:, :-1].ravel(), comp[:-1, :].ravel()])
    b = np.concatenate([comp[:, 1:].ravel(), comp[1:, :].ravel()])
    d = a != b
    pairs = np.unique(np.stack([np.minimum(a[d], b[d]), np.maximum(a[d], b[d])], 1), axis=0)
    adj = [set() for _ in range(n_comp)]
    for i, j in pairs:
        adj[i].add(int(j))
        adj[j].add(int(i))
    parent = np.arange(n_comp)
    alive = n_comp
    for c in np.argsort(sizes, kind="stable"):
        if sizes[c] >= min_size or parent[c] != c or alive <= 2 or not adj[c]:
            continue
        # merge into the largest adjacent segment, ties by lowest index
        target = min(adj[c], key=lambda r: (-sizes[r], r))
        parent[parent == c] = target
        sizes[target] += sizes[c]
        sizes[c] = 0
        for x in adj[c]:
            adj[x].discard(c)
            if x != target:
                adj[x].add(target)
                adj[target].add(x)
        adj[target].discard(c)
        adj[target].discard(target)
        adj[c] = set()
        alive -= 1
    merged = parent[comp]
    _, first = np.unique(merged.ravel(), return_index=True)
    roots = merged.ravel()[np.sort(first)]
    remap = np.full(n_comp, -1, dtype=np.int32)
    remap[roots] = np.arange(roots.size, dtype=np.int32)
    return remap[merged]


def slic(lab: np.ndarray, target_count: int, compactness: float = 10.0, n_iter: int = 10,
         backend: str | None = None) -> SegmentedImage:
    """SLIC superpixels on a normalized Lab image.

    ``compactness`` is expressed in standard Lab units (the usual m = 10); it is
    divided by 100 internally to match the [0, 1] channel scaling. Disconnected
    fragments and segments below a quarter of the nominal area are merged into
    their largest neighbour, so the final count can differ from ``target_count``.
    """
    h, w = lab.shape[:2]
    if target_count < 2 or target_count > h * w:
        raise InvalidArg(f"target_count must be in [2, {h * w}], got {target_count}")
    lab = np.ascontiguousarray(lab, dtype=np.float64)
    step = math.sqrt(h * w / target_count)
    centers = _initial_centers(lab, step)
    window = int(math.ceil(step))
    spatial_weight = (compactness / 100.0 / step) ** 2
    labels = None
    for _ in range(n_iter):
        labels = kernels.slic_assign(lab, centers, window, spatial_weight, backend=backend)
        centers = _update_centers(lab, labels, centers)
    comp, n_comp = kernels.label_components(np.ascontiguousarray(labels, dtype=np.int32), backend=backend)
    min_size = max(1, int(step * step / 4))
    return from_labels(lab, _merge_small(comp, n_comp, min_size))


def pool_median(seg: SegmentedImage, values: np.ndarray) -> np.ndarray:
    """Per-segment median of a pixel map; even-sized sets take the midpoint of the middle pair."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != seg.labels.shape:
        raise DimMismatch(f"map {values.shape} vs segmentation {seg.labels.shape}")
    flat = seg.labels.ravel()
    order = np.lexsort((values.ravel(), flat))
    v = values.ravel()[order]
    starts = np.concatenate([[0], np.cumsum(seg.sizes)[:-1]])
    lo = starts + (seg.sizes - 1) // 2
    hi = starts + seg.sizes // 2
    return 0.5 * (v[lo] + v[hi])


def pool_mean(seg: SegmentedImage, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.shape != seg.labels.shape:
        raise DimMismatch(f"map {values.shape} vs segmentation {seg.labels.shape}")
    return np.bincount(seg.labels.ravel(), values.ravel(), seg.n) / seg.sizes


def field_to_pixels(seg: SegmentedImage, field: np.ndarray) -> np.ndarray:
    field = np.asarray(field, dtype=np.float64)
    if field.shape != (seg.n,):
        raise DimMismatch(f"field of length {field.shape} for {seg.n} segments")
    return field[seg.labels]


def boundary_overlay(rgb: np.ndarray, labels: np.ndarray, color=(255, 0, 0)) -> np.ndarray:
    out = np.array(rgb, dtype=np.uint8, copy=True)
    edge = np.zeros(labels.shape, dtype=bool)
    edge[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    edge[:-1, :] |= labels[:-1, :] != labels[1:, :]
    out[edge] = color
    return out
