"""Power spectral density maps over space and frequency.

Three estimators of ``p(x, f)`` from PSD vectors measured at sensor
locations:

* per-frequency: one independent spatial fit per frequency bin;
* narrowband: ``p(x, f) = sum_s h_s(x) p_s(f)`` with nonnegative factors
  found by alternating nonnegative least squares, followed by spatial
  interpolation of the gain columns;
* wideband BEM: ``p(x, f) = sum_c p_c(x) b_c(f)`` over fixed frequency
  curves, with nonnegative per-sensor projection and one spatial fit per
  coefficient map.

Spatial fits are delegated to an *inner fitter*, any callable taking a
MeasurementSet and returning an object with ``evaluate(X)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.optimize import nnls

from ._optim import SolveInfo
from .core import MeasurementSet, Unit, as_locations, distances
from .kernels import Kernel, RBFKernel, fit_krr
from .kriging import CovarianceModel, fit_kriging
from .parametric import BasisSet, fit_ls

Fitter = Callable[[MeasurementSet], object]


class BemBasis:
    """Nonnegative frequency curves ``b_c`` sampled on a frequency grid.

    ``curves`` is C x F.  The curves must be linearly independent.
    """

    def __init__(self, frequency_grid, curves, centers=None):
        f = np.asarray(frequency_grid, dtype=float).ravel()
        B = np.atleast_2d(np.asarray(curves, dtype=float))
        if B.shape[1] != f.size:
            raise ValueError("each curve needs one value per frequency")
        if B.shape[0] > f.size:
            raise ValueError("more basis curves than frequencies")
        if np.any(B < 0):
            raise ValueError("basis curves must be nonnegative")
        if np.linalg.eigvalsh(B @ B.T)[0] <= 1e-10:
            raise ValueError("basis curves are linearly dependent")
        c = np.full(B.shape[0], np.nan) if centers is None else np.asarray(centers, dtype=float)
        for a in (f, B, c):
            a.setflags(write=False)
        self.frequency_grid = f
        self.curves = B
        self.centers = c

    @property
    def n_basis(self) -> int:
        return self.curves.shape[0]

    @property
    def n_frequencies(self) -> int:
        return self.curves.shape[1]

    def synthesize(self, coefficients) -> np.ndarray:
        """PSD ``sum_c coef_c b_c`` on the grid (coefficients may be stacked)."""
        return np.asarray(coefficients, dtype=float) @ self.curves

    def project(self, psd) -> np.ndarray:
        """Nonnegative least-squares coefficients of one or more PSD vectors."""
        M = np.atleast_2d(np.asarray(psd, dtype=float))
        out = np.empty((M.shape[0], self.n_basis))
        Bt = self.curves.T
        pinv = np.linalg.pinv(Bt)
        for i, m in enumerate(M):
            c = pinv @ m
            # the unconstrained solution is the NNLS solution when feasible
            out[i] = c if np.all(c >= 0) else nnls(Bt, m)[0]
        return out if np.ndim(psd) > 1 else out[0]


def raised_cosine(f, center: float, bandwidth: float, rolloff: float) -> np.ndarray:
    """Unit-height raised-cosine spectrum; its integral over f is ``bandwidth``."""
    if bandwidth <= 0 or not 0 <= rolloff <= 1:
        raise ValueError("need bandwidth > 0 and rolloff in [0, 1]")
    a = np.abs(np.asarray(f, dtype=float) - center)
    f1 = (1.0 - rolloff) * bandwidth / 2.0
    f2 = (1.0 + rolloff) * bandwidth / 2.0
    out = np.zeros_like(a)
    out[a <= f1] = 1.0
    if rolloff > 0:
        mid = (a > f1) & (a <= f2)
        out[mid] = 0.5 * (1.0 + np.cos(np.pi / (rolloff * bandwidth) * (a[mid] - f1)))
    return out


def raised_cosine_basis(frequency_grid, centers, bandwidth, rolloff: float = 0.25) -> BemBasis:
    bw = np.broadcast_to(np.asarray(bandwidth, dtype=float), np.shape(centers))
    curves = [raised_cosine(frequency_grid, c, b, rolloff) for c, b in zip(centers, bw)]
    return BemBasis(frequency_grid, np.array(curves), centers)


def indicator_basis(frequency_grid) -> BemBasis:
    f = np.asarray(frequency_grid, dtype=float)
    return BemBasis(f, np.eye(f.size), f)


def flat_basis(frequency_grid) -> BemBasis:
    f = np.asarray(frequency_grid, dtype=float)
    return BemBasis(f, np.ones((1, f.size)), [float(np.mean(f))])


class PsdMeasurementSet:
    """PSD vectors ``m_n`` (length F, nonnegative) at locations ``x_n``."""

    def __init__(self, locations, psd, noise_variance: float = 0.0, frequency_grid=None):
        X = as_locations(locations)
        P = np.atleast_2d(np.asarray(psd, dtype=float))
        if P.shape[0] != X.shape[0]:
            raise ValueError("one PSD vector per location")
        if np.any(P < 0):
            raise ValueError("PSD values must be nonnegative")
        if noise_variance < 0:
            raise ValueError("noise variance must be nonnegative")
        f = np.arange(P.shape[1], dtype=float) if frequency_grid is None \
            else np.asarray(frequency_grid, dtype=float)
        if f.size != P.shape[1]:
            raise ValueError("frequency grid length differs from PSD length")
        for a in (X, P, f):
            a.setflags(write=False)
        self.locations = X
        self.psd = P
        self.noise_variance = float(noise_variance)
        self.frequency_grid = f

    def __len__(self):
        return self.locations.shape[0]

    @property
    def n_frequencies(self) -> int:
        return self.psd.shape[1]

    def at_frequency(self, j: int) -> MeasurementSet:
        return MeasurementSet(self.locations, self.psd[:, j], Unit.WATT, self.noise_variance)

    def scalar(self, values, unit=Unit.WATT) -> MeasurementSet:
        return MeasurementSet(self.locations, values, unit, self.noise_variance)


# inner fitters

def krr_fitter(kernel: Kernel, lam: float) -> Fitter:
    return lambda data: fit_krr(kernel, data, lam)


def kriging_fitter(model: CovarianceModel) -> Fitter:
    return lambda data: fit_kriging(model, data)


def ls_fitter(basis: BasisSet) -> Fitter:
    return lambda data: fit_ls(basis, data)


def default_fitter(data: PsdMeasurementSet) -> Fitter:
    """KRR with an RBF kernel whose width is the median nearest-neighbour spacing."""
    D = distances(data.locations, data.locations)
    np.fill_diagonal(D, np.inf)
    nn = D.min(axis=1) if D.shape[0] > 1 else np.zeros(0)
    nn = nn[np.isfinite(nn) & (nn > 0)]
    sigma = float(np.median(nn)) if nn.size else 1.0
    return krr_fitter(RBFKernel(sigma), 1e-6)


# estimators

@dataclass(frozen=True)
class PerFrequencyEstimate:
    estimators: list

    @property
    def n_frequencies(self) -> int:
        return len(self.estimators)

    def evaluate(self, X) -> np.ndarray:
        """(n, F) PSD estimates."""
        return np.column_stack([e.evaluate(X) for e in self.estimators])

    def at(self, x, j: int) -> float:
        return float(self.estimators[j].evaluate(np.reshape(x, (1, -1)))[0])


def fit_per_frequency(data: PsdMeasurementSet, inner: Optional[Fitter] = None) -> PerFrequencyEstimate:
    inner = inner or default_fitter(data)
    if data.n_frequencies < 1:
        raise ValueError("no frequencies")
    return PerFrequencyEstimate([inner(data.at_frequency(j)) for j in range(data.n_frequencies)])


def _nnls_rows(A, M):
    """Row-wise ``argmin_{x >= 0} |m - x A|`` for each row m of M."""
    return np.array([nnls(A.T, m)[0] for m in M])


def spa_columns(M, S: int) -> np.ndarray:
    """Successive projection: indices of ``S`` extreme columns of ``M``.

    Under separability (every source alone at some frequency) the selected
    columns are proportional to the columns of the gain factor.
    """
    M = np.asarray(M, dtype=float)
    norms = M.sum(axis=0)
    R = np.divide(M, norms, out=np.zeros_like(M), where=norms > 0)
    picked = []
    for _ in range(S):
        score = np.sum(R * R, axis=0)
        score[picked] = -1.0
        j = int(np.argmax(score))
        picked.append(j)
        u = R[:, j]
        nu = float(u @ u)
        if nu > 0:
            R = R - np.outer(u, u @ R) / nu
    return np.array(picked)


def _anls(M, H, tol, max_sweeps):
    P = _nnls_rows(H.T, M.T).T
    err = float(np.sum((M - H @ P) ** 2))
    history = [err]
    converged = False
    sweep = 0
    floor = 1e-28 * max(1.0, float(np.sum(M ** 2)))
    for sweep in range(1, max_sweeps + 1):
        if err <= floor:
            converged = True
            break
        H = _nnls_rows(P, M)
        P = _nnls_rows(H.T, M.T).T
        new = float(np.sum((M - H @ P) ** 2))
        history.append(new)
        done = abs(err - new) <= tol * max(err, 1e-300)
        err = new
        if done:
            converged = True
            break
    return H, P, SolveInfo(converged, sweep, err, history)


def nmf_anls(M, S: int, seed: int = 0, tol: float = 1e-10, max_sweeps: int = 500):
    """Nonnegative factorization ``M ~ H P`` by alternating NNLS.

    Two starts are run: gain columns picked by successive projection over
    the data columns, and a seeded nonnegative random gain matrix.  The
    factorization with the smaller residual is kept (the projection start
    on ties).  Rows of ``P`` are scaled to unit sum (zero rows stay zero)
    and sources ordered by descending total gain ``H.sum(0)``.  The
    objective ``|M - HP|_F^2`` is recorded per sweep.
    """
    M = np.asarray(M, dtype=float)
    N, F = M.shape
    if not 1 <= S <= F or S > N:
        raise ValueError("need 1 <= S <= F and S <= N")
    if np.any(M < 0):
        raise ValueError("data must be nonnegative")
    rng = np.random.default_rng(seed)
    H_rand = rng.uniform(0.0, 1.0, (N, S)) * (np.sqrt(np.mean(M)) + 1e-12)
    H_spa = M[:, spa_columns(M, S)] + 0.0
    H_spa[:, ~np.any(H_spa, axis=0)] = H_rand[:, ~np.any(H_spa, axis=0)]
    runs = [_anls(M, H0, tol, max_sweeps) for H0 in (H_spa, H_rand)]
    H, P, info = min(runs, key=lambda r: r[2].objective * (1.0 + 1e-9) + 1e-300)
    s = P.sum(axis=1)
    scale = np.where(s > 0, s, 1.0)
    P = P / scale[:, None]
    H = H * scale[None, :]
    order = np.argsort(-H.sum(axis=0), kind="stable")
    return H[:, order], P[order], info


@dataclass(frozen=True)
class NarrowbandEstimate:
    gain_maps: list
    psd: np.ndarray
    H: np.ndarray
    info: SolveInfo = field(compare=False)

    def evaluate(self, X) -> np.ndarray:
        G = np.column_stack([h.evaluate(X) for h in self.gain_maps])
        return G @ self.psd


def fit_narrowband(data: PsdMeasurementSet, S: int, seed: int = 0,
                   inner: Optional[Fitter] = None, **nmf) -> NarrowbandEstimate:
    """Two-stage narrowband estimator: NMF of the N x F data, then spatial
    interpolation of each gain column with the inner fitter."""
    H, P, info = nmf_anls(data.psd, S, seed, **nmf)
    inner = inner or default_fitter(data)
    maps = [inner(data.scalar(H[:, s])) for s in range(S)]
    return NarrowbandEstimate(maps, P, H, info)


@dataclass(frozen=True)
class BemEstimate:
    maps: list
    basis: BemBasis
    coefficients: np.ndarray

    def coefficient_maps(self, X) -> np.ndarray:
        return np.column_stack([m.evaluate(X) for m in self.maps])

    def evaluate(self, X) -> np.ndarray:
        return self.coefficient_maps(X) @ self.basis.curves


def fit_wideband_bem(data: PsdMeasurementSet, basis: BemBasis,
                     inner: Optional[Fitter] = None) -> BemEstimate:
    if basis.n_frequencies != data.n_frequencies:
        raise ValueError("basis and data disagree on the number of frequencies")
    C = basis.project(data.psd)
    inner = inner or default_fitter(data)
    maps = [inner(data.scalar(C[:, c])) for c in range(basis.n_basis)]
    return BemEstimate(maps, basis, C)


# file format

def write_psd_measurements(path, data: PsdMeasurementSet) -> None:
    """Long format ``x,y,z,f_index,value``; missing coordinates are blank."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z", "f_index", "value"])
        d = data.locations.shape[1]
        for loc, row in zip(data.locations, data.psd):
            coords = [repr(float(v)) for v in loc] + [""] * (3 - d)
            for j, v in enumerate(row):
                w.writerow(coords + [j, repr(float(v))])


def read_psd_measurements(path, noise_variance: float = 0.0) -> PsdMeasurementSet:
    locs, rows = [], {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            loc = tuple(float(rec[k]) for k in ("x", "y", "z") if rec[k] not in ("", None))
            if loc not in rows:
                rows[loc] = {}
                locs.append(loc)
            rows[loc][int(rec["f_index"])] = float(rec["value"])
    F = 1 + max(max(r) for r in rows.values())
    P = np.zeros((len(locs), F))
    for i, loc in enumerate(locs):
        for j, v in rows[loc].items():
            P[i, j] = v
    return PsdMeasurementSet(np.array(locs), P, noise_variance)
