# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled SLIC kernels. Must stay output-identical to ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def slic_assign(const double[:, :, ::1] lab, const double[:, ::1] centers,
                int step, double spatial_weight):
    """Assign each pixel to the closest center within a 2*step window.

    Distance is ``dLab^2 + spatial_weight * dXY^2``; pixels reached by no window get -1.
    """
    cdef Py_ssize_t h = lab.shape[0], w = lab.shape[1], n_centers = centers.shape[0]
    cdef cnp.ndarray[cnp.int32_t, ndim=2] labels_arr = np.full((h, w), -1, dtype=np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dist_arr = np.full((h, w), np.inf)
    cdef int[:, ::1] labels = labels_arr
    cdef double[:, ::1] dist = dist_arr
    cdef Py_ssize_t k, y, x, y0, y1, x0, x1
    cdef double cl, ca, cb, cy, cx, dl, da, db, dy, dx, d
    for k in range(n_centers):
        cl = centers[k, 0]
        ca = centers[k, 1]
        cb = centers[k, 2]
        cy = centers[k, 3]
        cx = centers[k, 4]
        y0 = max(<Py_ssize_t>(cy - step), 0)
        y1 = min(<Py_ssize_t>(cy + step) + 1, h)
        x0 = max(<Py_ssize_t>(cx - step), 0)
        x1 = min(<Py_ssize_t>(cx + step) + 1, w)
        for y in range(y0, y1):
            dy = y - cy
            for x in range(x0, x1):
                dx = x - cx
                dl = lab[y, x, 0] - cl
                da = lab[y, x, 1] - ca
                db = lab[y, x, 2] - cb
                d = dl * dl + da * da + db * db + (dy * dy + dx * dx) * spatial_weight
                if d < dist[y, x]:
                    dist[y, x] = d
                    labels[y, x] = <int>k
    return labels_arr


def label_components(const int[:, ::1] labels):
    """4-connected components of equal-label pixels, numbered in raster order of first pixel."""
    cdef Py_ssize_t h = labels.shape[0], w = labels.shape[1]
    cdef cnp.ndarray[cnp.int32_t, ndim=2] comp_arr = np.full((h, w), -1, dtype=np.int32)
    cdef int[:, ::1] comp = comp_arr
    cdef cnp.ndarray[cnp.int64_t, ndim=1] stack_arr = np.empty(h * w, dtype=np.int64)
    cdef long long[::1] stack = stack_arr
    cdef Py_ssize_t sy, sx, y, x, top
    cdef long long p
    cdef int lab, n = 0
    for sy in range(h):
        for sx in range(w):
            if comp[sy, sx] >= 0:
                continue
            lab = labels[sy, sx]
            comp[sy, sx] = n
            top = 0
            stack[top] = sy * w + sx
            top += 1
            while top > 0:
                top -= 1
                p = stack[top]
                y = p // w
                x = p - y * w
                if y > 0 and comp[y - 1, x] < 0 and labels[y - 1, x] == lab:
                    comp[y - 1, x] = n
                    stack[top] = p - w
                    top += 1
                if y + 1 < h and comp[y + 1, x] < 0 and labels[y + 1, x] == lab:
                    comp[y + 1, x] = n
                    stack[top] = p + w
                    top += 1
                if x > 0 and comp[y, x - 1] < 0 and labels[y, x - 1] == lab:
                    comp[y, x - 1] = n
                    stack[top] = p - 1
                    top += 1
                if x + 1 < w and comp[y, x + 1] < 0 and labels[y, x + 1] == lab:
                    comp[y, x + 1] = n
                    stack[top] = p + 1
                    top += 1
            n += 1
    return comp_arr, n
