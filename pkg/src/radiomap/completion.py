"""Power-map recovery on a 2-D grid by nuclear-norm matrix completion.

The map is arranged as an I x J matrix ``P`` over the grid and recovered
from the observed entries by

    minimize 0.5 * sum_{(i,j) in O} (P_ij - M_ij)^2 + lam * |P|_*

with proximal gradient.  The masked quadratic has a 1-Lipschitz gradient,
so a unit step is used and every iteration is one singular value
thresholding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._optim import SolveInfo
from .core import Grid, GridMap, MeasurementSet, Unit, nearest_grid_indices


@dataclass(frozen=True)
class PartialGridObservation:
    """Observed entries ``(rows[k], cols[k]) -> values[k]`` of an I x J grid map."""

    grid: Grid
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.grid.dim != 2:
            raise ValueError("matrix completion needs a 2-D grid")
        r = np.asarray(self.rows, dtype=np.int64).ravel()
        c = np.asarray(self.cols, dtype=np.int64).ravel()
        v = np.asarray(self.values, dtype=float).ravel()
        if not (r.shape == c.shape == v.shape):
            raise ValueError("rows, cols and values must align")
        if r.size < 1:
            raise ValueError("at least one observed entry is required")
        I, J = self.grid.counts
        if r.min() < 0 or c.min() < 0 or r.max() >= I or c.max() >= J:
            raise ValueError("observed index out of range")
        if np.unique(r * J + c).size != r.size:
            raise ValueError("observed indices must be unique")
        for name, a in (("rows", r), ("cols", c), ("values", v)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def shape(self):
        return tuple(self.grid.counts)

    def mask(self) -> np.ndarray:
        W = np.zeros(self.shape, dtype=bool)
        W[self.rows, self.cols] = True
        return W

    def zero_filled(self) -> np.ndarray:
        M = np.zeros(self.shape)
        M[self.rows, self.cols] = self.values
        return M


def from_measurements(grid: Grid, data: MeasurementSet) -> PartialGridObservation:
    """Bin measurements to their nearest grid point, averaging within a cell."""
    if grid.dim != 2:
        raise ValueError("matrix completion needs a 2-D grid")
    if len(data) == 0:
        raise ValueError("no measurements to bin")
    flat = nearest_grid_indices(grid, data.locations)
    cells, inverse = np.unique(flat, return_inverse=True)
    sums = np.bincount(inverse, weights=np.asarray(data.values, dtype=float))
    counts = np.bincount(inverse)
    r, c = np.unravel_index(cells, tuple(grid.counts))
    return PartialGridObservation(grid, r, c, sums / counts)


def svt(matrix, tau: float) -> np.ndarray:
    """Singular value soft-thresholding, the prox of ``tau * |.|_*``."""
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    A = np.asarray(matrix, dtype=float)
    if tau == 0:
        return A.copy()
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    keep = s > 0
    return (U[:, keep] * s[keep]) @ Vt[keep]


def completion_objective(P, obs: PartialGridObservation, lam: float) -> float:
    r = P[obs.rows, obs.cols] - obs.values
    return float(0.5 * r @ r + lam * np.linalg.svd(P, compute_uv=False).sum())


@dataclass(frozen=True)
class CompletionResult:
    map: GridMap
    info: SolveInfo


def complete(obs: PartialGridObservation, lam: float, tol: float = 1e-9,
             max_iter: int = 10_000, unit: Unit = Unit.DB) -> CompletionResult:
    """Accelerated proximal gradient with unit step from a zero start.

    Monotone variant of Nesterov acceleration: each iteration takes the
    thresholded step from the extrapolated point and keeps it only if the
    objective does not increase, so the recorded objective sequence
    (``info.history``) is non-increasing.  Stops when the relative
    objective change between consecutive iterates is at most ``tol``.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    W = obs.mask()
    M = obs.zero_filled()
    P = np.zeros(obs.shape)
    Y = P
    t = 1.0
    f = completion_objective(P, obs, lam)
    history = [f]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        Z = svt(Y - np.where(W, Y - M, 0.0), lam)
        fz = completion_objective(Z, obs, lam)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if fz <= f:
            P_new, f_new = Z, fz
        else:
            P_new, f_new = P, f
        Y = P_new + (t / t_new) * (Z - P_new) + ((t - 1.0) / t_new) * (P_new - P)
        if fz > f:
            t_new = 1.0  # restart momentum
            Y = P_new
        rel = abs(f - f_new) / max(abs(f), 1e-300)
        P, f, t = P_new, f_new, t_new
        history.append(f)
        # an unchanged iterate after a restart is not yet a fixed point
        if rel <= tol and fz <= history[-2]:
            converged = True
            break
    info = SolveInfo(converged, it, f, history)
    return CompletionResult(GridMap(obs.grid, P.ravel(), unit), info)


def numerical_rank(A, rtol: float = 1e-8) -> int:
    s = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def energy_captured(A, rank: int) -> float:
    """Fraction of the squared Frobenius norm kept by the best rank-``rank`` approximation."""
    s = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    tot = float(s @ s)
    return 1.0 if tot == 0 else float(s[:rank] @ s[:rank]) / tot
