"""Multi-regional segment descriptors and foreground-region pools.

A segment descriptor is the concatenation of four separately L2-normalized parts,
each pooled over a different region: the segment itself, the segment plus its
adjacent segments, the foreground regions of its own image, and the foreground
regions of the whole group. Region statistics are additive over disjoint pixel
sets, so every union is pooled from per-segment sums.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .errors import EmptyRegion, InvalidArg
from .imagio import FeatureTensor
from .superpixel import SegmentedImage

HIST_BINS = (4, 8, 8)  # L, a, b
N_HIST = 256
MAX_COMPONENTS = 6


def hist_bin_index(lab: np.ndarray) -> np.ndarray:
    """Per-pixel bin in the 4 (L) x 8 (a) x 8 (b) grid over normalized Lab."""
    nl, na, nb = HIST_BINS
    li = np.minimum((lab[..., 0] * nl).astype(np.int64), nl - 1)
    ai = np.minimum((lab[..., 1] * na).astype(np.int64), na - 1)
    bi = np.minimum((lab[..., 2] * nb).astype(np.int64), nb - 1)
    return (li * na + ai) * nb + bi


@dataclass(eq=False)
class SegmentStats:
    """Additive per-segment pixel sums."""

    count: np.ndarray  # (n,)
    lab_sum: np.ndarray  # (n, 3)
    pos_sum: np.ndarray  # (n, 2), (x, y)
    pos_sq_sum: np.ndarray  # (n, 2)
    hist: np.ndarray  # (n, 256) raw counts

    @classmethod
    def from_segmentation(cls, seg: SegmentedImage) -> "SegmentStats":
        h, w = seg.labels.shape
        flat = seg.labels.ravel()
        n = seg.n
        lab = seg.lab.reshape(-1, 3)
        xs, ys = np.meshgrid(np.arange(w) / max(w - 1, 1), np.arange(h) / max(h - 1, 1))
        xs, ys = xs.ravel(), ys.ravel()
        bins = hist_bin_index(seg.lab).ravel()
        hist = np.bincount(flat * N_HIST + bins, minlength=n * N_HIST).reshape(n, N_HIST)
        return cls(
            count=seg.sizes.astype(np.float64),
            lab_sum=np.stack([np.bincount(flat, lab[:, c], n) for c in range(3)], 1),
            pos_sum=np.stack([np.bincount(flat, xs, n), np.bincount(flat, ys, n)], 1),
            pos_sq_sum=np.stack([np.bincount(flat, xs * xs, n), np.bincount(flat, ys * ys, n)], 1),
            hist=hist.astype(np.float64),
        )

    def union(self, members) -> tuple:
        m = np.asarray(members, dtype=np.int64)
        return (
            self.count[m].sum(),
            self.lab_sum[m].sum(0),
            self.pos_sum[m].sum(0),
            self.pos_sq_sum[m].sum(0),
            self.hist[m].sum(0),
        )


def root_normalize(counts: np.ndarray) -> np.ndarray:
    """L1-normalize then take the elementwise square root (unit L2 norm)."""
    total = counts.sum(axis=-1, keepdims=True)
    return np.sqrt(counts / np.where(total > 0, total, 1.0))


def l2_normalize(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.where(norm > 0, norm, 1.0)


def lab_histogram(seg: SegmentedImage, members, stats: SegmentStats | None = None) -> np.ndarray:
    members = np.asarray(members, dtype=np.int64)
    if members.size == 0:
        raise EmptyRegion("histogram of an empty region")
    stats = stats or SegmentStats.from_segmentation(seg)
    return root_normalize(stats.hist[members].sum(0))


class HighLevelPooler:
    """Masked 2x2 max-pooling of a feature grid over pixel regions of one image."""

    def __init__(self, seg: SegmentedImage, tensor: FeatureTensor):
        h, w = seg.labels.shape
        gh, gw = tensor.grid_height, tensor.grid_width
        self.seg = seg
        self.tensor = tensor
        cy = (np.arange(h) * gh) // h
        cx = (np.arange(w) * gw) // w
        self.cell = (cy[:, None] * gw + cx[None, :]).ravel()
        self.cell_size = np.bincount(self.cell, minlength=gh * gw).astype(np.float64)
        # segment -> per-cell pixel counts
        self.seg_cover = sparse.csr_matrix(
            (np.ones(h * w), (seg.labels.ravel(), self.cell)), shape=(seg.n, gh * gw)
        )

    def pool(self, members) -> np.ndarray:
        gh, gw, ch = self.tensor.data.shape
        m = np.asarray(members, dtype=np.int64)
        cover = np.asarray(self.seg_cover[m].sum(0)).ravel()
        frac = cover / np.where(self.cell_size > 0, self.cell_size, 1.0)
        inside = frac >= 0.5
        if not inside.any():
            inside = np.zeros_like(inside)
            inside[np.argmax(cover)] = True
        inside = inside.reshape(gh, gw)
        rows = np.flatnonzero(inside.any(1))
        cols = np.flatnonzero(inside.any(0))
        y0, bh = rows[0], rows[-1] - rows[0] + 1
        x0, bw = cols[0], cols[-1] - cols[0] + 1
        out = np.zeros((4, ch), dtype=np.float64)
        for qy in range(2):
            ys = slice(y0 + (qy * bh) // 2, y0 + -(-((qy + 1) * bh) // 2))
            for qx in range(2):
                xs = slice(x0 + (qx * bw) // 2, x0 + -(-((qx + 1) * bw) // 2))
                sel = inside[ys, xs]
                if sel.any():
                    out[qy * 2 + qx] = self.tensor.data[ys, xs][sel].max(0)
        return out.ravel()


def pool_segment_high(seg: SegmentedImage, tensor: FeatureTensor, members) -> np.ndarray:
    return HighLevelPooler(seg, tensor).pool(members)


@dataclass(eq=False)
class ForegroundRegion:
    members: np.ndarray
    image: int
    high: np.ndarray
    mean_lab: np.ndarray
    mean_pos: np.ndarray
    pos_var: np.ndarray
    hist: np.ndarray

    @property
    def low(self) -> np.ndarray:
        return np.concatenate([self.mean_lab, self.mean_pos, self.pos_var, self.hist])

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.high, self.low])


def foreground_components(seg: SegmentedImage, iris: np.ndarray, max_components: int = MAX_COMPONENTS):
    """Connected groups of above-threshold segments, largest first (at most ``max_components``)."""
    iris = np.asarray(iris, dtype=np.float64)
    thr = max(float(iris.mean()), 0.5)
    on = np.flatnonzero(iris >= thr)
    if on.size == 0:
        return []
    pos = {int(s): k for k, s in enumerate(on)}
    rows, cols = [], []
    for i, j in seg.edges:
        if i in pos and j in pos:
            rows.append(pos[int(i)])
            cols.append(pos[int(j)])
    g = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(on.size, on.size))
    nc, lab = connected_components(g, directed=False)
    comps = [on[lab == c] for c in range(nc)]
    comps.sort(key=lambda c: (-int(seg.sizes[c].sum()), int(c[0])))
    return comps[:max_components]


def extract_foregrounds(seg: SegmentedImage, iris: np.ndarray, tensor: FeatureTensor | None = None,
                        image: int = 0, max_components: int = MAX_COMPONENTS,
                        stats: SegmentStats | None = None) -> list[ForegroundRegion]:
    """All nonempty unions of the thresholded IrIS components, each with pooled descriptors."""
    comps = foreground_components(seg, iris, max_components)
    if not comps:
        return []
    stats = stats or SegmentStats.from_segmentation(seg)
    pooler = HighLevelPooler(seg, tensor) if tensor is not None else None
    regions = []
    for r in range(1, len(comps) + 1):
        for subset in combinations(range(len(comps)), r):
            members = np.sort(np.concatenate([comps[k] for k in subset]))
            cnt, lab_s, pos_s, pos_sq, hist = stats.union(members)
            mean_pos = pos_s / cnt
            regions.append(
                ForegroundRegion(
                    members=members,
                    image=image,
                    high=pooler.pool(members) if pooler else np.zeros(0),
                    mean_lab=lab_s / cnt,
                    mean_pos=mean_pos,
                    pos_var=np.maximum(pos_sq / cnt - mean_pos**2, 0.0),
                    hist=root_normalize(hist),
                )
            )
    return regions


def covariance_trace(vectors: np.ndarray) -> float:
    """Trace of the population (divide-by-N) covariance of row vectors."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if vectors.shape[0] == 0 or vectors.shape[1] == 0:
        return 0.0
    return float(vectors.var(axis=0).sum())


@dataclass
class DescriptorLayout:
    high_dim: int
    seg_dim: int
    nbh_dim: int
    sfg_dim: int
    gfg_dim: int

    @property
    def total(self) -> int:
        return self.seg_dim + self.nbh_dim + self.sfg_dim + self.gfg_dim

    def slices(self) -> dict:
        a = self.seg_dim
        b = a + self.nbh_dim
        c = b + self.sfg_dim
        return {"seg": slice(0, a), "nbh": slice(a, b), "sfg": slice(b, c), "gfg": slice(c, self.total)}

    def as_dict(self) -> dict:
        return {"high_dim": self.high_dim, "seg": self.seg_dim, "nbh": self.nbh_dim,
                "sfg": self.sfg_dim, "gfg": self.gfg_dim, "hist_bins": list(HIST_BINS)}


def make_layout(high_dim: int) -> DescriptorLayout:
    local = high_dim + 3 + 2 + N_HIST
    region = high_dim + 3 + 2 + 2 + N_HIST
    n_traces = 2 if high_dim else 1
    return DescriptorLayout(high_dim, local, local, region, region + n_traces)


@dataclass(eq=False)
class GroupDescriptors:
    descriptors: list  # per image (n_m, D)
    regions: list  # per image list[ForegroundRegion]
    sfg: list  # per image pooled vector (unnormalized)
    gfg: np.ndarray
    layout: DescriptorLayout
    empty_pools: list = field(default_factory=list)


def _local_parts(seg, stats, pooler):
    n = seg.n
    a = sparse.coo_matrix((np.ones(len(seg.edges)), (seg.edges[:, 0], seg.edges[:, 1])), shape=(n, n))
    nbh = (a + a.T + sparse.identity(n)).tocsr()
    adj = seg.adjacency_lists()

    def describe(cnt, lab_s, pos_s, hist, high):
        cnt = cnt[:, None]
        return np.concatenate([high, lab_s / cnt, pos_s / cnt, root_normalize(hist)], axis=1)

    if pooler is not None:
        high_seg = np.stack([pooler.pool([i]) for i in range(n)])
        high_nbh = np.stack([pooler.pool(np.concatenate([[i], adj[i]])) for i in range(n)])
    else:
        high_seg = high_nbh = np.zeros((n, 0))
    x_seg = describe(stats.count, stats.lab_sum, stats.pos_sum, stats.hist, high_seg)
    x_nbh = describe(nbh @ stats.count, nbh @ stats.lab_sum, nbh @ stats.pos_sum, nbh @ stats.hist, high_nbh)
    return l2_normalize(x_seg), l2_normalize(x_nbh)


def build_descriptors(segs: list, iris_fields: list, tensors: list | None = None,
                      max_components: int = MAX_COMPONENTS) -> GroupDescriptors:
    """Descriptors for every segment of every image in a group."""
    if tensors is not None and any(t is None for t in tensors):
        raise InvalidArg("feature tensors must be given for every image or for none")
    high_dim = 4 * tensors[0].channels if tensors else 0
    layout = make_layout(high_dim)
    stats = [SegmentStats.from_segmentation(s) for s in segs]
    regions = [
        extract_foregrounds(s, r, tensors[m] if tensors else None, m, max_components, stats[m])
        for m, (s, r) in enumerate(zip(segs, iris_fields))
    ]
    all_regions = [reg for per in regions for reg in per]
    sfg = [
        np.sum([r.vector for r in per], axis=0) if per else np.zeros(layout.sfg_dim)
        for per in regions
    ]
    if all_regions:
        gfg_sum = np.sum([r.vector for r in all_regions], axis=0)
        traces = [covariance_trace(np.stack([r.low for r in all_regions]))]
        if high_dim:
            traces.insert(0, covariance_trace(np.stack([r.high for r in all_regions])))
        gfg = np.concatenate([gfg_sum, traces])
    else:
        gfg = np.zeros(layout.gfg_dim)
    gfg_n = l2_normalize(gfg)
    out = []
    for m, seg in enumerate(segs):
        pooler = HighLevelPooler(seg, tensors[m]) if tensors else None
        x_seg, x_nbh = _local_parts(seg, stats[m], pooler)
        n = seg.n
        out.append(np.concatenate([
            x_seg, x_nbh,
            np.broadcast_to(l2_normalize(sfg[m]), (n, layout.sfg_dim)),
            np.broadcast_to(gfg_n, (n, layout.gfg_dim)),
        ], axis=1))
    empty = [m for m, per in enumerate(regions) if not per]
    return GroupDescriptors(out, regions, sfg, gfg, layout, empty)
