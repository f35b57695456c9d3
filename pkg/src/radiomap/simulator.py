"""Synthetic radio environments: path loss, correlated shadowing, fading,
spatial loss fields, and noisy measurement draws.

Every random quantity is driven by an explicit integer seed, so the same
environment and seed reproduce bit-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    Grid,
    GridMap,
    MeasurementSet,
    Unit,
    as_location,
    as_locations,
    db_to_linear,
    distances,
    nearest_grid_indices,
)

JITTER_LADDER = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


class FactorizationError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Transmitter:
    location: tuple
    power_dB: float = 0.0
    psd_coefficients: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "location", tuple(as_location(self.location)))
        if self.psd_coefficients is not None:
            c = tuple(float(v) for v in self.psd_coefficients)
            if any(v < 0 for v in c):
                raise ValueError("PSD coefficients must be nonnegative")
            object.__setattr__(self, "psd_coefficients", c)

    @property
    def power_linear(self) -> float:
        return float(db_to_linear(self.power_dB))


@dataclass(frozen=True)
class ShadowingParams:
    sigma2_s: float = 0.0
    delta_c: float = 1.0
    mean_s: float = 0.0

    def __post_init__(self):
        if self.sigma2_s < 0 or self.delta_c <= 0:
            raise ValueError("need sigma2_s >= 0 and delta_c > 0")


@dataclass(frozen=True)
class FadingParams:
    sigma2_f: float = 0.0
    mean_f: float = 0.0

    def __post_init__(self):
        if self.sigma2_f < 0:
            raise ValueError("need sigma2_f >= 0")


@dataclass(frozen=True)
class Environment:
    transmitters: tuple
    path_loss_exponent: float = 2.0
    shadowing: ShadowingParams = field(default_factory=ShadowingParams)
    fading: FadingParams = field(default_factory=FadingParams)
    slf: Optional[GridMap] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "transmitters", tuple(self.transmitters))
        if self.path_loss_exponent <= 0:
            raise ValueError("path loss exponent must be positive")
        if self.slf is not None and np.any(self.slf.values < 0):
            raise ValueError("spatial loss field must be nonnegative")


def friis_gain(tx, rx, exponent: float = 2.0, d_min: float = 0.0):
    """Free-space style gain ``1 / max(d, d_min) ** exponent``.

    ``tx`` and ``rx`` may be single locations or aligned (N, d) arrays.
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    d = np.sqrt(np.sum((rx - tx) ** 2, axis=-1))
    d = np.maximum(d, d_min)
    if np.any(d == 0):
        raise ValueError("zero link distance with no distance floor")
    return 1.0 / d ** exponent


def gudmundson_covariance(X, Y, sigma2: float, delta_c: float) -> np.ndarray:
    return sigma2 * np.power(2.0, -distances(X, Y) / delta_c)


def factor_psd(C: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a covariance matrix with jitter escalation."""
    scale = float(np.mean(np.diag(C))) if C.size else 1.0
    scale = scale if scale > 0 else 1.0
    eye = np.eye(C.shape[0])
    for j in JITTER_LADDER:
        try:
            return np.linalg.cholesky(C + j * scale * eye)
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError("covariance matrix is not positive definite even with jitter 1e-6")


def _rngs(seed: int, n: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def sample_shadowing_field(grid: Grid, params: ShadowingParams, seed: int) -> GridMap:
    """One zero-mean draw of the Gudmundson field on the grid points (dB).

    Practical up to roughly 1e4 grid points (dense Cholesky).
    """
    if params.sigma2_s == 0:
        return GridMap(grid, np.zeros(grid.n_points), Unit.DB)
    P = grid.points()
    C = gudmundson_covariance(P, P, params.sigma2_s, params.delta_c)
    L = factor_psd(C)
    z = np.random.default_rng(seed).standard_normal(grid.n_points)
    return GridMap(grid, L @ z, Unit.DB)


class Realization:
    """Frozen random state of an environment on a reference grid.

    The shadowing field and the fading samples live on the grid points;
    off-grid locations resolve to the nearest grid point.
    """

    def __init__(self, env: Environment, grid: Grid):
        self.env = env
        self.grid = grid
        shadow_rng, fade_rng = _rngs(env.seed, 2)
        seed_s = int(shadow_rng.integers(2**63 - 1))
        self.shadow = sample_shadowing_field(grid, env.shadowing, seed_s).values
        f = env.fading
        self.fading = f.mean_f + np.sqrt(f.sigma2_f) * fade_rng.standard_normal(grid.n_points)
        self.d_min = grid.cell_diagonal

    def shadowing_db(self, A, B) -> np.ndarray:
        """Shadowing attenuation (dB) of each link a_i -> b_i."""
        A = as_locations(A, self.grid.dim)
        B = as_locations(B, self.grid.dim)
        if self.env.slf is not None:
            from .propmap.tomography import PIECEWISE, line_integrals

            return line_integrals(self.env.slf, A, B, PIECEWISE)
        mid = 0.5 * (A + B)
        return self.env.shadowing.mean_s + self.shadow[nearest_grid_indices(self.grid, mid)]

    def link_gain_db(self, A, B) -> np.ndarray:
        """Channel gain (dB) without fast fading; symmetric in (A, B)."""
        A = as_locations(A, self.grid.dim)
        B = as_locations(B, self.grid.dim)
        pl = 10.0 * np.log10(friis_gain(A, B, self.env.path_loss_exponent, self.d_min))
        return pl - self.shadowing_db(A, B)

    def gain_db(self, tx, X) -> np.ndarray:
        """Channel gain (dB) from one transmitter to receivers, fading included."""
        X = as_locations(X, self.grid.dim)
        A = np.broadcast_to(as_location(tx), X.shape)
        return self.link_gain_db(A, X) - self.fading[nearest_grid_indices(self.grid, X)]

    def power_at(self, X) -> np.ndarray:
        if not self.env.transmitters:
            raise ValueError("environment has no transmitters")
        X = as_locations(X, self.grid.dim)
        total = np.zeros(X.shape[0])
        for tx in self.env.transmitters:
            total += tx.power_linear * db_to_linear(self.gain_db(tx.location, X))
        return total


def realize(env: Environment, grid: Grid) -> Realization:
    return Realization(env, grid)


def true_power_map(env: Environment, grid: Grid) -> GridMap:
    """Received power in watts at every grid point (sum over transmitters)."""
    return GridMap(grid, realize(env, grid).power_at(grid.points()), Unit.WATT)


def draw_measurements(source, locations, noise_variance: float, seed: int,
                      grid: Optional[Grid] = None) -> MeasurementSet:
    """Noisy samples ``m_n = p(x_n) + z_n`` of a map.

    ``source`` is a GridMap (looked up at the nearest grid point) or an
    Environment, in which case ``grid`` fixes the realization grid.
    """
    if noise_variance < 0:
        raise ValueError("noise variance must be nonnegative")
    if isinstance(source, Environment):
        if grid is None:
            raise ValueError("an Environment source needs a reference grid")
        X = as_locations(locations, grid.dim)
        truth = realize(source, grid).power_at(X)
        unit = Unit.WATT
    else:
        X = as_locations(locations, source.grid.dim)
        truth = source.at(X)
        unit = source.unit
    noise = np.sqrt(noise_variance) * np.random.default_rng(seed).standard_normal(X.shape[0])
    return MeasurementSet(X, truth + noise, unit, noise_variance)


def draw_link_measurements(env: Environment, pairs, noise_variance: float, seed: int,
                           grid: Grid) -> MeasurementSet:
    """Noisy channel-gain (dB) measurements for sensor pairs."""
    if noise_variance < 0:
        raise ValueError("noise variance must be nonnegative")
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim == 2:  # 1-D locations given as (N, 2)
        pairs = pairs[:, :, None]
    A, B = pairs[:, 0, :], pairs[:, 1, :]
    truth = realize(env, grid).link_gain_db(A, B)
    noise = np.sqrt(noise_variance) * np.random.default_rng(seed).standard_normal(A.shape[0])
    return MeasurementSet(A, truth + noise, Unit.DB, noise_variance, second_locations=B)


def psd_of(env: Environment, loc, basis, grid: Grid) -> np.ndarray:
    """PSD at ``loc`` sampled on the basis frequency grid.

    Each transmitter's PSD is ``sum_c c_{s,c} b_c(f)``; the transmit power
    field of the transmitter is not used here (its PSD coefficients carry
    the power).
    """
    real = realize(env, grid)
    loc = as_location(loc).reshape(1, -1)
    out = np.zeros(basis.n_frequencies)
    for tx in env.transmitters:
        if tx.psd_coefficients is None or len(tx.psd_coefficients) != basis.n_basis:
            raise ValueError("every transmitter needs one PSD coefficient per basis function")
        g = db_to_linear(real.gain_db(tx.location, loc))[0]
        out += g * (np.asarray(tx.psd_coefficients) @ basis.curves)
    return out
