"""Radio tomography: line integrals of a spatial loss field (SLF) and
nonnegative regularized SLF inversion from link shadowing measurements.

The shadowing of a link a -> b is ``(1/sqrt|a-b|) * integral_a^b F``.
Two discretizations are offered: exact traversal of piecewise-constant
cells, and a uniform average over the grid points inside an ellipse with
foci a and b.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .._accel import ellipse_mask, traversal_matrix
from .._optim import SolveInfo, spectral_norm_sq
from ..core import Grid, GridMap, MeasurementSet, Unit, as_locations


@dataclass(frozen=True)
class WeightModel:
    """``kind`` is ``"piecewise"`` or ``"ellipse"``.

    For the ellipse, the excess path length defaults to
    ``excess_fraction * |a - b|`` unless ``excess`` is given in meters.
    """

    kind: str = "piecewise"
    excess_fraction: float = 0.05
    excess: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("piecewise", "ellipse"):
            raise ValueError(f"unknown weight model {self.kind!r}")


PIECEWISE = WeightModel("piecewise")
ELLIPSE = WeightModel("ellipse")


def make_slf(grid: Grid, values) -> GridMap:
    values = np.asarray(values, dtype=float)
    if np.any(values < 0):
        raise ValueError("spatial loss field must be nonnegative")
    return GridMap(grid, values, Unit.DB)


def _canonical(A, B):
    # order each link's endpoints lexicographically so (a, b) and (b, a)
    # produce bit-identical rows
    swap = np.zeros(A.shape[0], dtype=bool)
    undecided = np.ones(A.shape[0], dtype=bool)
    for d in range(A.shape[1]):
        gt = undecided & (A[:, d] > B[:, d])
        lt = undecided & (A[:, d] < B[:, d])
        swap |= gt
        undecided &= ~(gt | lt)
    A2 = np.where(swap[:, None], B, A)
    B2 = np.where(swap[:, None], A, B)
    return A2, B2


def crossing_lengths(grid: Grid, A, B) -> np.ndarray:
    """(links x cells) length of each link inside each grid cell."""
    A = as_locations(A, grid.dim)
    B = as_locations(B, grid.dim)
    A, B = _canonical(A, B)
    return traversal_matrix(A, B, np.array(grid.region.lower), grid.cell_size,
                            np.array(grid.counts, dtype=np.int64))


def weight_matrix(grid: Grid, A, B, model: WeightModel = PIECEWISE) -> np.ndarray:
    A = as_locations(A, grid.dim)
    B = as_locations(B, grid.dim)
    length = np.sqrt(np.sum((A - B) ** 2, axis=1))
    if np.any(length == 0):
        raise ValueError("zero-length link")
    if model.kind == "piecewise":
        return crossing_lengths(grid, A, B) / np.sqrt(length)[:, None]
    excess = np.full(A.shape[0], model.excess) if model.excess is not None \
        else model.excess_fraction * length
    A, B = _canonical(A, B)
    mask = ellipse_mask(A, B, grid.points(), excess).astype(float)
    count = mask.sum(axis=1)
    # cell average times length, over sqrt(length); an empty ellipse gives a zero row
    scale = np.divide(np.sqrt(length), count, out=np.zeros_like(count), where=count > 0)
    return mask * scale[:, None]


def line_integrals(slf: GridMap, A, B, model: WeightModel = PIECEWISE) -> np.ndarray:
    return weight_matrix(slf.grid, A, B, model) @ slf.values


def line_integral(slf: GridMap, a, b, model: WeightModel = PIECEWISE) -> float:
    d = slf.grid.dim
    return float(line_integrals(slf, np.reshape(a, (1, d)), np.reshape(b, (1, d)), model)[0])


def assemble_tomography(links: MeasurementSet, grid: Grid, model: WeightModel = PIECEWISE):
    """Linear system ``y = W F`` from link shadowing measurements (dB)."""
    if not links.is_link_data:
        raise ValueError("tomography needs link measurements (second_locations)")
    W = weight_matrix(grid, links.locations, links.second_locations, model)
    return W, np.array(links.values)


def grid_laplacian(grid: Grid) -> sp.csr_matrix:
    """Graph Laplacian of the axis-neighbour adjacency between grid cells."""
    n = grid.n_points
    idx = np.arange(n).reshape(grid.counts)
    rows, cols = [], []
    for d in range(grid.dim):
        a = np.take(idx, range(grid.counts[d] - 1), axis=d).ravel()
        b = np.take(idx, range(1, grid.counts[d]), axis=d).ravel()
        rows += [a, b]
        cols += [b, a]
    if rows:
        r, c = np.concatenate(rows), np.concatenate(cols)
    else:
        r = c = np.zeros(0, dtype=int)
    adj = sp.csr_matrix((np.ones(r.shape[0]), (r, c)), shape=(n, n))
    return sp.diags(np.asarray(adj.sum(axis=1)).ravel()) - adj


def estimate_slf(W, y, lam: float = 0.0, regularizer: str = "ridge", grid: Optional[Grid] = None,
                 tol: float = 1e-8, max_iter: int = 100_000):
    """Nonnegative regularized least squares for the SLF.

    Minimizes ``|y - W F|^2 + lam * R(F)`` over ``F >= 0`` with
    ``R(F) = |F|^2`` (``"ridge"``) or ``F' L F`` with the grid Laplacian
    (``"laplacian"``), by accelerated projected gradient with adaptive
    restart.  Returns ``(F, SolveInfo)``; ``F`` is a GridMap when ``grid``
    is given, else an array.
    """
    W = np.asarray(W, dtype=float)
    y = np.asarray(y, dtype=float)
    if lam < 0:
        raise ValueError("regularization weight must be nonnegative")
    n = W.shape[1]
    if regularizer == "ridge":
        R = sp.identity(n, format="csr")
        r_norm = 1.0
    elif regularizer == "laplacian":
        if grid is None:
            raise ValueError("laplacian regularizer needs the grid")
        R = grid_laplacian(grid)
        r_norm = 2.0 * 2 * grid.dim
    else:
        raise ValueError(f"unknown regularizer {regularizer!r}")

    WtW = W.T @ W
    Wty = W.T @ y

    def grad(F):
        return 2.0 * (WtW @ F - Wty) + 2.0 * lam * (R @ F)

    def objective(F):
        r = y - W @ F
        return float(r @ r + lam * F @ (R @ F))

    lip = 2.0 * spectral_norm_sq(W) + 2.0 * lam * r_norm
    if lip == 0.0:
        F = np.zeros(n)
        info = SolveInfo(True, 0, objective(F))
        return (make_slf(grid, F) if grid is not None else F), info
    step = 1.0 / lip
    scale = max(1.0, 2.0 * float(np.linalg.norm(Wty)))

    F = np.zeros(n)
    Z = F.copy()
    t = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        F_new = np.maximum(Z - step * grad(Z), 0.0)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if np.dot(Z - F_new, F_new - F) > 0:  # restart momentum
            t_new = 1.0
            Z = F_new
        else:
            Z = F_new + ((t - 1.0) / t_new) * (F_new - F)
        F, t = F_new, t_new
        g = grad(F)
        station = np.linalg.norm(F - np.maximum(F - step * g, 0.0)) / step
        if station <= tol * scale:
            converged = True
            break
    info = SolveInfo(converged, it, objective(F))
    return (make_slf(grid, F) if grid is not None else F), info
