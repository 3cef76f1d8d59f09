"""Affinity graphs over segments and closed-form manifold ranking.

Ranking solves ``(D - alpha W) f = y`` once per seed vector using a single sparse
factorization per graph; the self-affinity of each seed is then removed so a seed
is scored only by the other seeds.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import DegenerateSeeds, InvalidArg
from .superpixel import SegmentedImage

DEGREE_FLOOR = 1e-12


@dataclass(eq=False)
class AffinityGraph:
    weights: sparse.csr_matrix
    blocks: list = field(default_factory=list)  # node counts per image block, then cluster layer

    def __post_init__(self):
        self.weights = sparse.csr_matrix(self.weights)
        self.weights.eliminate_zeros()
        self.degrees = np.maximum(np.asarray(self.weights.sum(axis=1)).ravel(), DEGREE_FLOOR)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def block_slices(self) -> list[slice]:
        out, start = [], 0
        for b in self.blocks:
            out.append(slice(start, start + b))
            start += b
        return out

    def to_coo_text(self) -> str:
        coo = self.weights.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return "".join(f"{coo.row[k]} {coo.col[k]} {coo.data[k]:.17g}\n" for k in order)


def intra_graph(seg: SegmentedImage) -> AffinityGraph:
    """Color-affinity graph on segment adjacency with a Mahalanobis metric fitted to the edges."""
    if seg.n < 2:
        raise InvalidArg("an intra-image graph needs at least two segments")
    i, j = seg.edges[:, 0], seg.edges[:, 1]
    diff = seg.mean_lab[i] - seg.mean_lab[j]
    w = edge_weights(diff)
    W = sparse.coo_matrix((np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))),
                          shape=(seg.n, seg.n))
    return AffinityGraph(W.tocsr(), [seg.n])


def regularized_edge_covariance(diff: np.ndarray) -> np.ndarray:
    sigma = diff.T @ diff / max(len(diff), 1)
    return sigma + (1e-6 * np.trace(sigma) / 3.0 + 1e-12) * np.eye(3)


def edge_weights(diff: np.ndarray) -> np.ndarray:
    sigma = regularized_edge_covariance(diff)
    q = np.einsum("ek,ek->e", diff, np.linalg.solve(sigma, diff.T).T)
    return np.exp(-np.maximum(q, 0.0))


@dataclass(eq=False)
class ClusterLayer:
    centroids: np.ndarray  # (K, 3)
    assignment: np.ndarray  # (n,)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def _sq_dists(x, c):
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(-1)


def kmeans_pp_init(points, k, rng):
    n = points.shape[0]
    centers = [int(rng.integers(n))]
    d2 = ((points - points[centers[0]]) ** 2).sum(1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            break
        nxt = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
        nxt = min(nxt, n - 1)
        centers.append(nxt)
        d2 = np.minimum(d2, ((points - points[nxt]) ** 2).sum(1))
    return points[centers].copy()


def build_cluster_layer(points: np.ndarray, k: int, seed: int = 0, max_iter: int = 100,
                        tol: float = 1e-6) -> ClusterLayer:
    """K-means with k-means++ seeding; ``k`` is capped at the number of distinct points."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k < 1 or n < k:
        raise InvalidArg(f"need at least K={k} points, got {n}")
    k = min(k, np.unique(points, axis=0).shape[0])
    rng = np.random.default_rng(seed)
    centroids = kmeans_pp_init(points, k, rng)
    assign = np.argmin(_sq_dists(points, centroids), axis=1)
    for _ in range(max_iter):
        new = centroids.copy()
        counts = np.bincount(assign, minlength=k)
        for c in range(k):
            if counts[c]:
                new[c] = points[assign == c].mean(0)
        moved = np.abs(new - centroids).max()
        centroids = new
        assign = _fill_empty(points, centroids, np.argmin(_sq_dists(points, centroids), axis=1))
        if moved < tol:
            break
    return ClusterLayer(centroids, assign)


def _fill_empty(points, centroids, assign):
    k = centroids.shape[0]
    counts = np.bincount(assign, minlength=k)
    for c in np.flatnonzero(counts == 0):
        # steal the point farthest from its centroid among clusters with spare members
        d = ((points - centroids[assign]) ** 2).sum(1)
        d[counts[assign] <= 1] = -1.0
        p = int(np.argmax(d))
        counts[assign[p]] -= 1
        assign[p] = c
        counts[c] = 1
        centroids[c] = points[p]
    return assign


def knn_relation(centroids: np.ndarray, k: int) -> np.ndarray:
    """Boolean (K, K) matrix of the symmetric k-NN relation (either direction), no self-loops."""
    n = centroids.shape[0]
    k = min(k, n - 1)
    d = np.sqrt(_sq_dists(centroids, centroids))
    np.fill_diagonal(d, np.inf)
    rel = np.zeros((n, n), dtype=bool)
    if k <= 0:
        return rel
    nn = np.argsort(d, axis=1, kind="stable")[:, :k]
    rel[np.repeat(np.arange(n), k), nn.ravel()] = True
    return rel | rel.T


def integrated_graph(intra_graphs: list[AffinityGraph], node_lab: np.ndarray, layer: ClusterLayer,
                     sigma: float = 0.25, k: int = 5) -> AffinityGraph:
    """Block-diagonal intra-image graphs joined through a layer of color-cluster nodes."""
    W_I = sparse.block_diag([g.weights for g in intra_graphs], format="csr")
    n = W_I.shape[0]
    K = layer.k
    dist_ic = np.linalg.norm(node_lab - layer.centroids[layer.assignment], axis=1)
    W_IC = sparse.csr_matrix((np.exp(-dist_ic / sigma), (np.arange(n), layer.assignment)), shape=(n, K))
    rel = knn_relation(layer.centroids, k)
    dist_c = np.sqrt(_sq_dists(layer.centroids, layer.centroids))
    W_C = sparse.csr_matrix(np.where(rel, np.exp(-dist_c / sigma), 0.0))
    W = sparse.bmat([[W_I, W_IC], [W_IC.T, W_C]], format="csr")
    return AffinityGraph(W, [g.size for g in intra_graphs] + [K])


class RankingSolver:
    """Factorized ``(D - alpha W)`` for repeated seed queries.

    ``rank(y)`` returns ``W_L y`` with the diagonal of ``W_L`` zeroed. Safe to share
    between threads.
    """

    def __init__(self, graph: AffinityGraph, alpha: float):
        if not 0.0 < alpha < 1.0:
            raise InvalidArg(f"alpha must be in (0, 1), got {alpha}")
        self.graph = graph
        self.alpha = alpha
        self.matrix = (sparse.diags(graph.degrees) - alpha * graph.weights).tocsc()
        self._lu = splu(self.matrix, permc_spec="MMD_AT_PLUS_A")
        self._diag = {}
        self._lock = threading.Lock()

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def solve(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        with self._lock:
            f = self._lu.solve(y)
        res = np.abs(self.matrix @ f - y).max() if y.size else 0.0
        assert res < 1e-8 * max(1.0, np.abs(y).max()), f"ranking solve residual {res}"
        return f

    def inverse_diagonal(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        with self._lock:
            missing = [int(i) for i in np.unique(idx) if int(i) not in self._diag]
            if missing:
                e = np.zeros((self.size, len(missing)))
                e[missing, np.arange(len(missing))] = 1.0
                cols = self._lu.solve(e)
                for c, i in enumerate(missing):
                    self._diag[i] = cols[i, c]
            return np.array([self._diag[int(i)] for i in idx])

    def rank(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        f = self.solve(y)
        seeds = np.flatnonzero(y)
        if seeds.size:
            f[seeds] -= self.inverse_diagonal(seeds) * y[seeds]
        return f


def contrast(f_fg: np.ndarray, f_bg: np.ndarray, eta: float) -> np.ndarray:
    """``(f_fg - eta f_bg) / (f_fg + eta f_bg)`` elementwise, with 0/0 taken as 0."""
    num = f_fg - eta * f_bg
    den = f_fg + eta * f_bg
    safe = den > 0
    return np.where(safe, num / np.where(safe, den, 1.0), 0.0)


def minmax(v: np.ndarray) -> np.ndarray:
    """Rescale to [0, 1]; a constant vector maps to all zeros."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        return v.copy()
    lo, hi = v.min(), v.max()
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        return np.zeros_like(v)
    return np.clip((v - lo) / (hi - lo), 0.0, 1.0)


def propagate(solver: RankingSolver, y_fg: np.ndarray, y_bg: np.ndarray, eta: float = 2.0,
              ranges: list[slice] | None = None, normalize: str = "minmax") -> list[np.ndarray] | np.ndarray:
    """Foreground-versus-background ranking contrast, normalized per node range.

    ``normalize`` is ``"minmax"`` or ``"affine"`` (the ``(x + 1) / 2`` mapping).
    With ``ranges=None`` the whole node set is one range and a single array is returned.
    """
    if eta <= 0:
        raise InvalidArg("eta must be positive")
    if not np.any(y_fg) and not np.any(y_bg):
        raise DegenerateSeeds("both seed vectors are empty")
    raw = contrast(solver.rank(y_fg), solver.rank(y_bg), eta)
    norm = minmax if normalize == "minmax" else (lambda v: np.clip((v + 1.0) / 2.0, 0.0, 1.0))
    if ranges is None:
        return norm(raw)
    return [norm(raw[r]) for r in ranges]
