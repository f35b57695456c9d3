"""Simple kriging of dB-domain power maps under the log-normal model.

The received power in dB is modelled as ``p_dB(x) = p_tx + l(x) - s(x) - xi(x)``
with deterministic path loss ``l``, Gudmundson-correlated shadowing ``s``
and spatially white fading ``xi``.

The fading term contributes to a covariance only between a measurement
and itself (same index), never between distinct measurements taken at the
same coordinates, and never between a query location and a measurement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as spl

from .core import Grid, MeasurementSet, Unit, as_location, as_locations, distances
from .kernels import CovarianceKernel, _factor, fit_krr
from .simulator import FadingParams, ShadowingParams, friis_gain


@dataclass(frozen=True)
class PathLoss:
    """Known mean term ``p_tx_dB + 10 log10(1 / d^exponent)``."""

    tx_location: tuple
    tx_power_dB: float = 0.0
    exponent: float = 2.0
    d_min: float = 1e-3

    def __call__(self, X) -> np.ndarray:
        X = as_locations(X, len(self.tx_location))
        g = friis_gain(np.asarray(self.tx_location), X, self.exponent, self.d_min)
        return self.tx_power_dB + 10.0 * np.log10(g)


@dataclass(frozen=True)
class CovarianceModel:
    shadowing: ShadowingParams
    fading: FadingParams = field(default_factory=FadingParams)
    path_loss: Optional[Callable] = None
    shadowing_only: bool = False

    def mean(self, X) -> np.ndarray:
        X = as_locations(X)
        base = self.path_loss(X) if self.path_loss is not None else np.zeros(X.shape[0])
        return base - self.shadowing.mean_s - self.fading.mean_f

    @property
    def is_zero_mean(self) -> bool:
        return self.path_loss is None and self.shadowing.mean_s == 0 and self.fading.mean_f == 0

    def shadow_cov(self, X, Y) -> np.ndarray:
        s = self.shadowing
        return s.sigma2_s * np.power(2.0, -distances(X, Y) / s.delta_c)

    def cov(self, X, Y) -> np.ndarray:
        """Coordinate-based covariance of the field, fading on exact coincidence."""
        D = distances(X, Y)
        s = self.shadowing
        return s.sigma2_s * np.power(2.0, -D / s.delta_c) + self.fading.sigma2_f * (D == 0)

    @property
    def prior_variance(self) -> float:
        if self.shadowing_only:
            return self.shadowing.sigma2_s
        return self.shadowing.sigma2_s + self.fading.sigma2_f

    def data_cov(self, locs, noise_variance: float) -> np.ndarray:
        C = self.shadow_cov(locs, locs)
        C[np.diag_indices_from(C)] += self.fading.sigma2_f + noise_variance
        return C


def build_covariance(shadowing: ShadowingParams, fading: Optional[FadingParams] = None,
                     path_loss: Optional[Callable] = None,
                     shadowing_only: bool = False) -> CovarianceModel:
    return CovarianceModel(shadowing, fading or FadingParams(), path_loss, shadowing_only)


class KrigingEstimate:
    """Fitted simple-kriging (LMMSE) estimator; immutable after construction."""

    def __init__(self, model: CovarianceModel, data: MeasurementSet):
        if len(data):
            data.require_unit(Unit.DB)
        self.model = model
        self.data = data
        self._locs = np.array(data.locations)
        if len(data):
            C = model.data_cov(self._locs, data.noise_variance)
            Cj, self._chol = _factor(C, allow_jitter=True)
            resid = np.asarray(data.values) - model.mean(self._locs)
            w = spl.cho_solve(self._chol, resid)
            w = w + spl.cho_solve(self._chol, resid - Cj @ w)
            self._weights = w
        else:
            self._chol = None
            self._weights = np.zeros(0)

    def evaluate(self, X) -> np.ndarray:
        X = as_locations(X, self._locs.shape[1] if len(self.data) else None)
        mu = self.model.mean(X)
        if self._chol is None:
            return mu
        return mu + self.model.shadow_cov(X, self._locs) @ self._weights

    def __call__(self, x) -> float:
        return float(self.evaluate(np.reshape(x, (1, -1)))[0])

    def posterior_variance(self, X) -> np.ndarray:
        X = as_locations(X, self._locs.shape[1] if len(self.data) else None)
        prior = self.model.prior_variance
        if self._chol is None:
            return np.full(X.shape[0], prior)
        c = self.model.shadow_cov(X, self._locs)
        reduction = np.einsum("ij,ji->i", c, spl.cho_solve(self._chol, c.T))
        return np.clip(prior - reduction, 0.0, prior)


def fit_kriging(model: CovarianceModel, data: MeasurementSet) -> KrigingEstimate:
    return KrigingEstimate(model, data)


def posterior_variance(est: KrigingEstimate, loc) -> float:
    return float(est.posterior_variance(np.reshape(as_location(loc), (1, -1)))[0])


@dataclass(frozen=True)
class EquivalenceReport:
    max_abs_deviation: float
    n_probe: int
    kriging_values: np.ndarray = field(repr=False)
    krr_values: np.ndarray = field(repr=False)

    @property
    def ok(self) -> bool:
        return self.max_abs_deviation <= 1e-8


def kriging_as_krr_check(model: CovarianceModel, data: MeasurementSet, probe=None) -> EquivalenceReport:
    """Compare kriging with KRR using ``kernel = Cov`` and ``lam * N = noise``.

    Data are mean-centred before KRR and the mean is added back, so the
    comparison is meaningful for nonzero-mean models too.  ``probe``
    defaults to a 20-per-axis grid over the bounding box of the data.
    """
    locs = np.asarray(data.locations)
    if probe is None:
        lo, hi = locs.min(axis=0), locs.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        probe = Grid.from_bounds(lo - 0.1 * span, hi + 0.1 * span, [20] * locs.shape[1]).points()
    probe = as_locations(probe, locs.shape[1])
    kr = fit_kriging(model, data).evaluate(probe)
    centred = data.with_values(np.asarray(data.values) - model.mean(locs))
    N = len(data)
    krr = fit_krr(CovarianceKernel(model.cov), centred, data.noise_variance / N)
    kk = krr.evaluate(probe) + model.mean(probe)
    return EquivalenceReport(float(np.max(np.abs(kr - kk))), probe.shape[0], kr, kk)
