"""Linear parametric map estimation.

A map is modelled as ``p(x) = sum_b alpha_b * psi_b(x)`` over a fixed
basis.  Coefficients come from least squares, or from the Lasso when the
basis is a Friis dictionary over candidate transmitter grid points.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ._optim import SolveInfo, soft_threshold, spectral_norm_sq
from .core import Grid, MeasurementSet, Region, as_locations
from .simulator import friis_gain

ZERO_COEF = 1e-10


class BasisSet:
    """Ordered collection of real functions of location.

    ``functions`` take an (N, d) array and return N values.
    """

    def __init__(self, functions: Sequence[Callable], labels: Optional[Sequence[str]] = None):
        self.functions = list(functions)
        self.labels = list(labels) if labels is not None else [f"psi{i}" for i in range(len(self.functions))]

    def __len__(self):
        return len(self.functions)

    def design(self, X) -> np.ndarray:
        X = as_locations(X)
        if not self.functions:
            return np.zeros((X.shape[0], 0))
        return np.column_stack([f(X) for f in self.functions])


class FriisBasis(BasisSet):
    def __init__(self, tx_locations, exponent: float = 2.0, d_min: float = 1e-3):
        self.tx = as_locations(tx_locations)
        self.exponent = float(exponent)
        self.d_min = float(d_min)
        funcs = [self._column(i) for i in range(self.tx.shape[0])]
        super().__init__(funcs, [f"tx{i}" for i in range(self.tx.shape[0])])

    def _column(self, i):
        return lambda X: friis_gain(self.tx[i], X, self.exponent, self.d_min)

    def design(self, X) -> np.ndarray:
        X = as_locations(X, self.tx.shape[1])
        d = np.sqrt(((X[:, None, :] - self.tx[None, :, :]) ** 2).sum(-1))
        return 1.0 / np.maximum(d, self.d_min) ** self.exponent


def friis_basis(tx_locations, exponent: float = 2.0, d_min: float = 1e-3) -> FriisBasis:
    tx = as_locations(tx_locations)
    if tx.shape[0] == 0:
        raise ValueError("friis_basis needs at least one transmitter")
    return FriisBasis(tx, exponent, d_min)


def polynomial_basis(degree: int, region: Region) -> BasisSet:
    """Monomials up to ``degree`` of the input rescaled affinely to [-1, 1]."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    if region.dim != 1:
        raise ValueError("polynomial basis is defined for 1-D regions only")
    lo, hi = region.lower[0], region.upper[0]
    half = (hi - lo) / 2.0 or 1.0
    centre = (hi + lo) / 2.0

    def mono(k):
        return lambda X: ((as_locations(X, 1)[:, 0] - centre) / half) ** k

    return BasisSet([mono(k) for k in range(degree + 1)], [f"u^{k}" for k in range(degree + 1)])


@dataclass(frozen=True)
class LinearMapEstimate:
    basis: BasisSet
    coefficients: np.ndarray
    info: Optional[SolveInfo] = None
    degenerate: bool = False

    def evaluate(self, X) -> np.ndarray:
        return self.basis.design(X) @ self.coefficients

    def __call__(self, x) -> float:
        return float(self.evaluate(np.reshape(x, (1, -1)))[0])

    def support(self) -> np.ndarray:
        return np.flatnonzero(np.abs(self.coefficients) > ZERO_COEF)


def evaluate(est: LinearMapEstimate, loc) -> float:
    return est(loc)


def fit_ls(basis: BasisSet, data: MeasurementSet) -> LinearMapEstimate:
    """Minimum-norm least-squares coefficients."""
    if len(data) < 1:
        raise ValueError("least squares needs at least one measurement")
    Psi = basis.design(data.locations)
    if not np.any(Psi):
        warnings.warn("all-zero design matrix; returning zero coefficients", RuntimeWarning)
        return LinearMapEstimate(basis, np.zeros(Psi.shape[1]), degenerate=True)
    alpha, *_ = np.linalg.lstsq(Psi, np.asarray(data.values), rcond=None)
    return LinearMapEstimate(basis, alpha)


def lasso(Psi, m, lam: float, tol: float = 1e-8, max_iter: int = 100_000, x0=None):
    """Accelerated proximal gradient for ``min |m - Psi a|^2 + lam * |a|_1``.

    Soft-thresholding steps with backtracking from ``1/L`` (``L`` from power
    iteration), Nesterov momentum and function-value restart.  Stops when
    the proximal-gradient mapping at the iterate falls below ``tol`` times
    ``max(1, 2 |Psi' m|_inf)``.  Returns ``(a, SolveInfo)`` with the best
    iterate seen.
    """
    Psi = np.asarray(Psi, dtype=float)
    m = np.asarray(m, dtype=float)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    n = Psi.shape[1]
    a = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    G = Psi.T @ Psi
    b = Psi.T @ m
    mm = float(m @ m)

    def smooth(x):
        return float(x @ G @ x - 2.0 * b @ x + mm)

    def total(x):
        return smooth(x) + lam * float(np.abs(x).sum())

    lip = 2.0 * spectral_norm_sq(Psi)
    if lip == 0.0:
        return a * 0.0, SolveInfo(True, 0, mm)
    step = 1.0 / lip
    scale = max(1.0, 2.0 * float(np.max(np.abs(b))))
    z = a.copy()
    t = 1.0
    F = total(a)
    converged = False
    restarted = False
    it = 0
    for it in range(1, max_iter + 1):
        fz = smooth(z)
        g = 2.0 * (G @ z - b)
        while True:
            a_new = soft_threshold(z - step * g, step * lam)
            d = a_new - z
            if smooth(a_new) <= fz + g @ d + (d @ d) / (2.0 * step) + 1e-12 * abs(fz):
                break
            step *= 0.5
        F_new = total(a_new)
        if F_new > F and not restarted:
            # momentum overshot: restart from a plain proximal step at a
            t = 1.0
            z = a
            restarted = True
            continue
        restarted = False
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = a_new + ((t - 1.0) / t_new) * (a_new - a)
        a, F, t = a_new, F_new, t_new
        ga = 2.0 * (G @ a - b)
        station = np.linalg.norm(a - soft_threshold(a - step * ga, step * lam)) / step
        if station <= tol * scale:
            converged = True
            break
    return a, SolveInfo(converged, it, F)


def fit_lasso(grid: Grid, data: MeasurementSet, lam: float, exponent: float = 2.0,
              d_min: Optional[float] = None, **solver) -> LinearMapEstimate:
    """Grid-based transmitter discovery.

    One Friis basis function per grid point; nonzero coefficients (above
    1e-10 in magnitude) mark estimated transmitter cells.  The distance
    floor defaults to the grid cell diagonal.
    """
    basis = friis_basis(grid.points(), exponent, grid.cell_diagonal if d_min is None else d_min)
    Psi = basis.design(data.locations)
    alpha, info = lasso(Psi, data.values, lam, **solver)
    if not info.converged:
        warnings.warn("lasso did not converge within the iteration budget", RuntimeWarning)
    return LinearMapEstimate(basis, alpha, info)
