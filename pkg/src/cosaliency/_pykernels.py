"""Pure-Python/numpy versions of the compiled kernels in ``_ckernels.pyx``."""
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


def slic_assign(lab, centers, step, spatial_weight):
    h, w = lab.shape[:2]
    labels = np.full((h, w), -1, dtype=np.int32)
    dist = np.full((h, w), np.inf)
    for k in range(centers.shape[0]):
        cl, ca, cb, cy, cx = centers[k]
        # truncation toward zero, as the C cast does
        y0 = max(int(cy - step), 0)
        y1 = min(int(cy + step) + 1, h)
        x0 = max(int(cx - step), 0)
        x1 = min(int(cx + step) + 1, w)
        if y0 >= y1 or x0 >= x1:
            continue
        win = lab[y0:y1, x0:x1]
        dy = np.arange(y0, y1, dtype=np.float64)[:, None] - cy
        dx = np.arange(x0, x1, dtype=np.float64)[None, :] - cx
        dl = win[..., 0] - cl
        da = win[..., 1] - ca
        db = win[..., 2] - cb
        d = dl * dl + da * da + db * db + (dy * dy + dx * dx) * spatial_weight
        sub = dist[y0:y1, x0:x1]
        better = d < sub
        sub[better] = d[better]
        labels[y0:y1, x0:x1][better] = k
    return labels


def label_components(labels):
    h, w = labels.shape
    idx = np.arange(h * w).reshape(h, w)
    same_h = labels[:, 1:] == labels[:, :-1]
    same_v = labels[1:, :] == labels[:-1, :]
    rows = np.concatenate([idx[:, :-1][same_h], idx[:-1, :][same_v]])
    cols = np.concatenate([idx[:, 1:][same_h], idx[1:, :][same_v]])
    graph = coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(h * w, h * w))
    n, comp = connected_components(graph, directed=False)
    # renumber by raster order of each component's first pixel
    _, first = np.unique(comp, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(n, dtype=np.int32)
    remap[order] = np.arange(n, dtype=np.int32)
    return remap[comp].reshape(h, w), int(n)
