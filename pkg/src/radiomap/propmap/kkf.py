"""Kriged Kalman filtering of time-varying shadowing.

The shadowing field is split into a slowly varying part expanded on K
orthonormal spatial basis functions, ``psi(x)' alpha(t)``, and a
spatially correlated but temporally white part ``nu(x, t)``.  The
coefficients follow

    alpha(t) = F alpha(t-1) + eta'(t),    F = Psi^+ B,  Q = Psi^+ C_eta Psi^+'

and sensors at locations ``x_1..x_M`` observe

    s(t) = Psi_s alpha(t) + nu(t) + z(t),   R = C_nu + sigma_z^2 I.

After each Kalman update the ``nu`` part is kriged from the post-update
residual ``s - Psi_s alpha(t|t)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg as spl

from ..core import Grid, as_locations, distances
from ..kernels import JITTER_LADDER


class SpatialBasis:
    """Gaussian bumps orthonormalized over the points of a dense grid.

    ``evaluate(X)`` returns the (n, K) matrix ``[psi_k(x_i)]``; over the
    grid points the columns are orthonormal.
    """

    def __init__(self, grid: Grid, centers, width: float):
        if width <= 0:
            raise ValueError("bump width must be positive")
        self.grid = grid
        self.centers = as_locations(centers, grid.dim)
        self.width = float(width)
        raw = self._raw(grid.points())
        Q, R = np.linalg.qr(raw)
        if np.min(np.abs(np.diag(R))) <= 1e-10 * np.max(np.abs(np.diag(R))):
            raise ValueError("basis bumps are numerically dependent on this grid")
        self._Rinv = spl.solve_triangular(R, np.eye(R.shape[0]))
        self.on_grid = raw @ self._Rinv
        self.on_grid.setflags(write=False)

    @classmethod
    def on_subgrid(cls, grid: Grid, per_axis, width: Optional[float] = None) -> "SpatialBasis":
        """Bumps centred on a coarse grid over the same region."""
        coarse = Grid(grid.region, tuple(np.broadcast_to(per_axis, (grid.dim,)).tolist()))
        if width is None:
            width = float(np.min(coarse.cell_size))
        return cls(grid, coarse.points(), width)

    def _raw(self, X):
        D = distances(X, self.centers)
        return np.exp(-0.5 * (D / self.width) ** 2)

    @property
    def K(self) -> int:
        return self.centers.shape[0]

    def evaluate(self, X) -> np.ndarray:
        return self._raw(as_locations(X, self.grid.dim)) @ self._Rinv

    @property
    def pinv(self) -> np.ndarray:
        """Pseudo-inverse of the on-grid matrix (its transpose, by orthonormality)."""
        return self.on_grid.T


def gudmundson_cov(sigma2: float, delta_c: float) -> Callable:
    return lambda X, Y: sigma2 * np.power(2.0, -distances(X, Y) / delta_c)


@dataclass(frozen=True)
class KkfState:
    mean: np.ndarray
    cov: np.ndarray
    t: int = 0
    nu_weights: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("mean", "cov"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)


class KkfModel:
    """State-space model for one sensor's shadowing maps.

    Parameters
    ----------
    basis : SpatialBasis
    sensors : (M, d) locations of the peer sensors that report each step.
    rho : AR(1) coefficient, ``B = rho * Psi`` so that ``F = rho * I``.
        A full (K, K) transition may be given through ``F`` instead.
    eta_cov : callable ``(X, Y) -> cov`` or an (n_grid, n_grid) matrix for
        the process noise field on the grid.
    nu_cov : callable covariance of the temporally white field ``nu``.
    noise_variance : sensor noise ``sigma_z^2``.
    """

    def __init__(self, basis: SpatialBasis, sensors, rho: float = 1.0, eta_cov=None,
                 nu_cov: Optional[Callable] = None, noise_variance: float = 0.0, F=None):
        self.basis = basis
        self.sensors = as_locations(sensors, basis.grid.dim)
        K = basis.K
        if F is None:
            F = rho * np.eye(K)
        self.F = np.asarray(F, dtype=float)
        if self.F.shape != (K, K):
            raise ValueError("transition must be K x K")
        P = basis.pinv
        if eta_cov is None:
            Ceta = np.zeros((P.shape[1], P.shape[1]))
        elif callable(eta_cov):
            G = basis.grid.points()
            Ceta = eta_cov(G, G)
        else:
            Ceta = np.asarray(eta_cov, dtype=float)
        self.Q = _sym(P @ Ceta @ P.T)
        if noise_variance < 0:
            raise ValueError("noise variance must be nonnegative")
        self.noise_variance = float(noise_variance)
        self.nu_cov = nu_cov
        self.H = basis.evaluate(self.sensors)
        Cnu = nu_cov(self.sensors, self.sensors) if nu_cov is not None \
            else np.zeros((self.sensors.shape[0],) * 2)
        self.R = _sym(Cnu + self.noise_variance * np.eye(self.sensors.shape[0]))

    @classmethod
    def from_transition(cls, basis: SpatialBasis, sensors, B, **kw) -> "KkfModel":
        """``F = Psi^+ B`` for a grid-level transition ``B`` (n_grid x K)."""
        return cls(basis, sensors, F=basis.pinv @ np.asarray(B, dtype=float), **kw)

    def initial_state(self, mean=None, cov=None) -> KkfState:
        K = self.basis.K
        m = np.zeros(K) if mean is None else np.asarray(mean, dtype=float)
        C = np.eye(K) if cov is None else np.asarray(cov, dtype=float)
        return KkfState(m, _sym(C), 0)


def _sym(A):
    return 0.5 * (A + A.T)


def kkf_predict(model: KkfModel, state: KkfState) -> KkfState:
    F = model.F
    return KkfState(F @ state.mean, _sym(F @ state.cov @ F.T + model.Q), state.t + 1)


def _chol_with_jitter(S):
    scale = float(np.mean(np.diag(S))) or 1.0
    for j in JITTER_LADDER:
        try:
            return spl.cho_factor(S + j * scale * np.eye(S.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError("innovation covariance is singular")


def kkf_update(model: KkfModel, state: KkfState, y) -> KkfState:
    """Kalman update in Joseph form, then kriging weights for ``nu``."""
    y = np.asarray(y, dtype=float).ravel()
    H, R = model.H, model.R
    if y.shape[0] != H.shape[0]:
        raise ValueError("one measurement per sensor")
    S = _sym(H @ state.cov @ H.T + R)
    cS = _chol_with_jitter(S)
    K = spl.cho_solve(cS, H @ state.cov).T
    mean = state.mean + K @ (y - H @ state.mean)
    I_KH = np.eye(K.shape[0]) - K @ H
    cov = _sym(I_KH @ state.cov @ I_KH.T + K @ R @ K.T)
    nu_w = None
    if model.nu_cov is not None:
        cR = _chol_with_jitter(R)
        nu_w = spl.cho_solve(cR, y - H @ mean)
    return KkfState(mean, cov, state.t, nu_w)


def kkf_step(model: KkfModel, state: KkfState, y) -> KkfState:
    return kkf_update(model, kkf_predict(model, state), y)


def kkf_estimate_shadowing(model: KkfModel, state: KkfState, X) -> np.ndarray:
    """``psi(x)' alpha(t|t)`` plus the kriged ``nu`` correction (dB)."""
    X = as_locations(X, model.basis.grid.dim)
    est = model.basis.evaluate(X) @ state.mean
    if state.nu_weights is not None:
        est = est + model.nu_cov(X, model.sensors) @ state.nu_weights
    return est


def kkf_gain_map(model: KkfModel, state: KkfState, X, path_loss_db: Callable) -> np.ndarray:
    """Channel gain ``l(x) - s_hat(x)`` in dB."""
    X = as_locations(X, model.basis.grid.dim)
    return path_loss_db(X) - kkf_estimate_shadowing(model, state, X)


def run_filter(model: KkfModel, measurements, state: Optional[KkfState] = None):
    """Filter a (T, M) measurement sequence; returns the list of posterior states."""
    state = state or model.initial_state()
    out = []
    for y in np.atleast_2d(measurements):
        state = kkf_step(model, state, y)
        out.append(state)
    return out
