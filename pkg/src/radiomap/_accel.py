"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``RADIOMAP_DISABLE_NUMBA`` is unset (or ``0``).  Both paths are
always importable as ``<name>_numpy`` / ``<name>_numba`` so tests and the
benchmark can compare them directly; the unsuffixed names are the
selected backend.
"""

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("RADIOMAP_DISABLE_NUMBA", "0") in ("", "0")

BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# pairwise distances
# ---------------------------------------------------------------------------

def pairwise_distances_numpy(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    diff = X[:, None, :] - Y[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _pairwise_distances_loop(X, Y):
    n, m, d = X.shape[0], Y.shape[0], X.shape[1]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(d):
                t = X[i, k] - Y[j, k]
                acc += t * t
            out[i, j] = np.sqrt(acc)
    return out


# ---------------------------------------------------------------------------
# ray / grid traversal (piecewise-constant line integral weights)
# ---------------------------------------------------------------------------

def _segment_params_numpy(a, b, lower, cell, counts):
    ts = [np.array([0.0, 1.0])]
    for d in range(a.shape[0]):
        delta = b[d] - a[d]
        if delta == 0.0:
            continue
        bounds = lower[d] + cell[d] * np.arange(counts[d] + 1)
        t = (bounds - a[d]) / delta
        ts.append(t[(t > 0.0) & (t < 1.0)])
    return np.unique(np.concatenate(ts))


def traversal_matrix_numpy(A, B, lower, cell, counts):
    """Crossing length of every link (rows) through every grid cell (cols)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    lower = np.asarray(lower, dtype=float)
    cell = np.asarray(cell, dtype=float)
    counts = np.asarray(counts, dtype=np.int64)
    n_cells = int(np.prod(counts))
    W = np.zeros((A.shape[0], n_cells))
    strides = np.ones(counts.shape[0], dtype=np.int64)
    for d in range(counts.shape[0] - 2, -1, -1):
        strides[d] = strides[d + 1] * counts[d + 1]
    for row in range(A.shape[0]):
        a, b = A[row], B[row]
        length = np.sqrt(np.sum((b - a) ** 2))
        if length == 0.0:
            continue
        t = _segment_params_numpy(a, b, lower, cell, counts)
        dt = np.diff(t)
        mid = 0.5 * (t[:-1] + t[1:])
        pts = a[None, :] + mid[:, None] * (b - a)[None, :]
        idx = np.floor((pts - lower) / cell).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < counts), axis=1) & (dt > 0.0)
        flat = idx[inside] @ strides
        np.add.at(W[row], flat, dt[inside] * length)
    return W


def _traversal_matrix_loop(A, B, lower, cell, counts):
    n_links, dim = A.shape
    n_cells = 1
    for d in range(dim):
        n_cells *= counts[d]
    strides = np.ones(dim, dtype=np.int64)
    for d in range(dim - 2, -1, -1):
        strides[d] = strides[d + 1] * counts[d + 1]
    max_t = 2
    for d in range(dim):
        max_t += counts[d] + 1
    W = np.zeros((n_links, n_cells))
    tbuf = np.empty(max_t)
    for row in range(n_links):
        length = 0.0
        for d in range(dim):
            length += (B[row, d] - A[row, d]) ** 2
        length = np.sqrt(length)
        if length == 0.0:
            continue
        nt = 0
        tbuf[nt] = 0.0
        nt += 1
        tbuf[nt] = 1.0
        nt += 1
        for d in range(dim):
            delta = B[row, d] - A[row, d]
            if delta == 0.0:
                continue
            for k in range(counts[d] + 1):
                t = (lower[d] + cell[d] * k - A[row, d]) / delta
                if t > 0.0 and t < 1.0:
                    tbuf[nt] = t
                    nt += 1
        ts = np.sort(tbuf[:nt])
        for s in range(nt - 1):
            dt = ts[s + 1] - ts[s]
            if dt <= 0.0:
                continue
            mid = 0.5 * (ts[s] + ts[s + 1])
            flat = 0
            inside = True
            for d in range(dim):
                p = A[row, d] + mid * (B[row, d] - A[row, d])
                i = np.int64(np.floor((p - lower[d]) / cell[d]))
                if i < 0 or i >= counts[d]:
                    inside = False
                    break
                flat += i * strides[d]
            if inside:
                W[row, flat] += dt * length
    return W


# ---------------------------------------------------------------------------
# ellipse membership (Fresnel-style weights)
# ---------------------------------------------------------------------------

def ellipse_mask_numpy(A, B, P, excess):
    """Boolean (links x points) mask: |p-a| + |p-b| <= |a-b| + excess."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    P = np.asarray(P, dtype=float)
    da = pairwise_distances_numpy(A, P)
    db = pairwise_distances_numpy(B, P)
    L = np.sqrt(np.sum((A - B) ** 2, axis=1))
    return da + db <= (L + np.asarray(excess, dtype=float))[:, None]


def _ellipse_mask_loop(A, B, P, excess):
    n, m, dim = A.shape[0], P.shape[0], A.shape[1]
    out = np.zeros((n, m), dtype=np.bool_)
    for i in range(n):
        L = 0.0
        for k in range(dim):
            L += (A[i, k] - B[i, k]) ** 2
        L = np.sqrt(L)
        for j in range(m):
            da = 0.0
            db = 0.0
            for k in range(dim):
                da += (P[j, k] - A[i, k]) ** 2
                db += (P[j, k] - B[i, k]) ** 2
            out[i, j] = np.sqrt(da) + np.sqrt(db) <= L + excess[i]
    return out


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

if HAS_NUMBA:
    _pd_jit = njit(cache=True)(_pairwise_distances_loop)
    _tm_jit = njit(cache=True)(_traversal_matrix_loop)
    _em_jit = njit(cache=True)(_ellipse_mask_loop)

    def pairwise_distances_numba(X, Y):
        return _pd_jit(np.ascontiguousarray(X, dtype=np.float64),
                       np.ascontiguousarray(Y, dtype=np.float64))

    def traversal_matrix_numba(A, B, lower, cell, counts):
        return _tm_jit(np.ascontiguousarray(A, dtype=np.float64),
                       np.ascontiguousarray(B, dtype=np.float64),
                       np.ascontiguousarray(lower, dtype=np.float64),
                       np.ascontiguousarray(cell, dtype=np.float64),
                       np.ascontiguousarray(counts, dtype=np.int64))

    def ellipse_mask_numba(A, B, P, excess):
        return _em_jit(np.ascontiguousarray(A, dtype=np.float64),
                       np.ascontiguousarray(B, dtype=np.float64),
                       np.ascontiguousarray(P, dtype=np.float64),
                       np.ascontiguousarray(excess, dtype=np.float64))
else:  # pragma: no cover
    pairwise_distances_numba = pairwise_distances_numpy
    traversal_matrix_numba = traversal_matrix_numpy
    ellipse_mask_numba = ellipse_mask_numpy

if USE_NUMBA:
    pairwise_distances = pairwise_distances_numba
    traversal_matrix = traversal_matrix_numba
    ellipse_mask = ellipse_mask_numba
else:
    pairwise_distances = pairwise_distances_numpy
    traversal_matrix = traversal_matrix_numpy
    ellipse_mask = ellipse_mask_numpy
