"""Group-level co-saliency: initial fusion, integrated-graph propagation, final maps."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import features, graph, ieis, imagio, superpixel
from .config import Config
from .errors import DegenerateSeeds, DimMismatch

log = logging.getLogger(__name__)


def initial_cosal(rs, es, tau: float = 0.5):
    """Combine intra- and inter-image saliency; large positive residuals are multiplied down."""
    rs = np.asarray(rs, dtype=np.float64)
    es = np.asarray(es, dtype=np.float64)
    delta = rs - es
    a = np.abs(delta)
    return np.where(delta >= tau, rs * es, (1.0 - a) * rs + a * es)


def extract_group_seeds(segs: list, ic: list, n_clusters: int, fraction: float = 0.1):
    """Co-saliency and background seed vectors over all intra-image nodes plus the cluster layer.

    Per image, the top IC fraction are co-saliency candidates and the border segments are
    background candidates; nodes in both sets are dropped from both.
    """
    ys, yb = [], []
    for seg, v in zip(segs, ic):
        top = np.zeros(seg.n, dtype=bool)
        top[ieis.top_fraction(v, fraction)] = True
        ys.append(top & ~seg.boundary)
        yb.append(seg.boundary & ~top)
    y_s = np.concatenate(ys + [np.zeros(n_clusters, dtype=bool)]).astype(np.float64)
    y_b = np.concatenate(yb + [np.zeros(n_clusters, dtype=bool)]).astype(np.float64)
    if not y_s.any():
        raise DegenerateSeeds("no co-saliency seeds in the group")
    return y_s, y_b


def auxiliary_cosal(solver: graph.RankingSolver, y_s, y_b, image_slices, eta: float = 2.0,
                    coseg_mode: bool = False) -> list[np.ndarray]:
    if not np.any(y_s):
        raise DegenerateSeeds("no co-saliency seeds in the group")
    return graph.propagate(solver, y_s, y_b, eta, ranges=image_slices,
                           normalize="affine" if coseg_mode else "minmax")


def postprocess(seg: superpixel.SegmentedImage, cs, sigma: float = 0.15, shrink: float = 0.25):
    """Attenuate by a Gaussian of distance to the saliency-weighted centroid; never increases values.

    The centroid is taken on a grid shrunk by ``shrink`` per side; distances are
    relative to the image diagonal.
    """
    cs = np.asarray(cs, dtype=np.float64)
    h, w = seg.labels.shape
    gh, gw = max(1, int(round(h * shrink))), max(1, int(round(w * shrink)))
    cy = (np.arange(gh) + 0.5) * h / gh - 0.5
    cx = (np.arange(gw) + 0.5) * w / gw - 0.5
    sample = cs[seg.labels[np.floor(cy + 0.5).astype(int).clip(0, h - 1)[:, None],
                           np.floor(cx + 0.5).astype(int).clip(0, w - 1)[None, :]]]
    total = sample.sum()
    if total > 0:
        center = np.array([(sample.sum(0) * cx).sum(), (sample.sum(1) * cy).sum()]) / total
    else:
        center = np.array([(w - 1) / 2.0, (h - 1) / 2.0])
    pos = seg.mean_pos * np.array([max(w - 1, 1), max(h - 1, 1)])
    d = np.linalg.norm(pos - center, axis=1) / np.hypot(w, h)
    return cs * np.exp(-d * d / (2.0 * sigma * sigma))


def final_cosal(ic, ac):
    return np.maximum(np.asarray(ic, dtype=np.float64), np.asarray(ac, dtype=np.float64))


def to_coseg_mask(seg: superpixel.SegmentedImage, cs, threshold: float = 0.5) -> np.ndarray:
    cs = np.asarray(cs)
    if cs.shape != (seg.n,):
        raise DimMismatch("field does not match segmentation")
    return (cs >= threshold)[seg.labels]


@dataclass(eq=False)
class GroupResult:
    segs: list
    rs: list
    es: list
    ic: list
    ac: list
    cs_fused: list
    cs: list
    layer: graph.ClusterLayer | None = None
    descriptors: features.GroupDescriptors | None = None
    extras: dict = field(default_factory=dict)

    def cs_maps(self) -> list[np.ndarray]:
        return [superpixel.field_to_pixels(s, v) for s, v in zip(self.segs, self.cs)]

    def masks(self, threshold: float = 0.5) -> list[np.ndarray]:
        return [to_coseg_mask(s, v, threshold) for s, v in zip(self.segs, self.cs)]

    def field_maps(self, name: str) -> list[np.ndarray]:
        return [superpixel.field_to_pixels(s, v) for s, v in zip(self.segs, getattr(self, name))]


def _map(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def make_scorer(model: ieis.MlpModel | None, layout, config: Config):
    if model is not None:
        if model.input_dim != layout.total:
            raise DimMismatch(f"model expects {model.input_dim}-dim descriptors, group produces {layout.total}")
        return lambda x: ieis.score_segments(model, x)
    return ieis.HeuristicScorer(layout, config.heuristic_center, config.heuristic_gain)


def ieis_at_scale(labs, iris_maps, tensors, n_segments, model, config: Config):
    segs = _map(lambda lab: superpixel.slic(lab, n_segments, config.compactness), labs, config.workers)
    rs = [superpixel.pool_median(s, m) for s, m in zip(segs, iris_maps)]
    desc = features.build_descriptors(segs, rs, tensors, config.max_components)
    scorer = make_scorer(model, desc.layout, config)
    raw = [scorer(x) for x in desc.descriptors]
    es = [ieis.refine_ieis(s, r, config.alpha, config.eta) for s, r in zip(segs, raw)]
    return segs, rs, raw, es, desc


def detect_group(rgbs: list, iris_maps: list, tensors: list | None = None,
                 model: ieis.MlpModel | None = None, config: Config | None = None,
                 override_ic=None) -> GroupResult:
    """Full co-saliency pipeline for one image group.

    ``override_ic`` (optional callable ``(image index, seg, ic) -> ic``) lets callers
    perturb the initial maps before propagation, e.g. for ablations.
    """
    config = config or Config()
    if len(rgbs) != len(iris_maps):
        raise DimMismatch("one IrIS map per image is required")
    labs = [imagio.rgb_to_lab(im) for im in rgbs]
    for lab, m in zip(labs, iris_maps):
        if m.shape != lab.shape[:2]:
            raise DimMismatch(f"IrIS map {m.shape} vs image {lab.shape[:2]}")

    per_scale = [ieis_at_scale(labs, iris_maps, tensors, s, model, config) for s in config.scales]
    segs, rs, _, es_main, desc = per_scale[0]
    if len(per_scale) == 1:
        es = es_main
    else:
        es = []
        for m, seg in enumerate(segs):
            pix = np.mean([superpixel.field_to_pixels(sc[0][m], sc[3][m]) for sc in per_scale], axis=0)
            es.append(superpixel.pool_median(seg, pix))

    ic = [initial_cosal(r, e, config.tau) for r, e in zip(rs, es)]
    if override_ic is not None:
        ic = [np.asarray(override_ic(m, s, v), dtype=np.float64) for m, (s, v) in enumerate(zip(segs, ic))]

    nodes = np.concatenate([s.mean_lab for s in segs])
    layer = graph.build_cluster_layer(nodes, min(config.clusters, nodes.shape[0]), config.seed)
    intra = [graph.intra_graph(s) for s in segs]
    W = graph.integrated_graph(intra, nodes, layer, config.sigma, config.knn)
    solver = graph.RankingSolver(W, config.alpha)
    y_s, y_b = extract_group_seeds(segs, ic, layer.k)
    ac = auxiliary_cosal(solver, y_s, y_b, W.block_slices()[:-1], config.eta, config.coseg_mode)

    fused = [final_cosal(a, b) for a, b in zip(ic, ac)]
    cs = [postprocess(s, v, config.post_sigma, config.post_shrink) for s, v in zip(segs, fused)]
    return GroupResult(segs, rs, es, ic, ac, fused, cs, layer, desc,
                       extras={"y_s": y_s, "y_b": y_b, "graph": W})


def training_samples(rgbs, iris_maps, gt_masks, tensors=None, config: Config | None = None):
    """Descriptors, labels, IrIS values and averaged ground truth for every segment of a group."""
    config = config or Config()
    labs = [imagio.rgb_to_lab(im) for im in rgbs]
    n_seg = config.scales[0]
    segs = _map(lambda lab: superpixel.slic(lab, n_seg, config.compactness), labs, config.workers)
    rs = [superpixel.pool_median(s, m) for s, m in zip(segs, iris_maps)]
    desc = features.build_descriptors(segs, rs, tensors, config.max_components)
    gt = [superpixel.pool_mean(s, g.astype(np.float64)) for s, g in zip(segs, gt_masks)]
    x = np.concatenate(desc.descriptors)
    cs_gt = np.concatenate(gt)
    labels = (cs_gt >= 0.5).astype(np.int64)
    return x, labels, np.concatenate(rs), cs_gt, desc.layout
