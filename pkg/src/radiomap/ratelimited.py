"""PSD cartography from quantized filter-bank energies.

Sensor ``n`` passes the received signal through ``J`` filters with power
responses ``|g_{n,j}(f)|^2`` and reports only which quantization interval
contains each output energy

    phi_{n,j} = int p(x_n, f) |g_{n,j}(f)|^2 df = sum_c p_c(x_n) b_{n,j,c},
    b_{n,j,c} = int b_c(f) |g_{n,j}(f)|^2 df,

for a PSD expanded on BEM curves ``b_c``.  The coefficient maps ``p_c`` are
kernel expansions over the sensor locations fitted by

    minimize  w * sum_i max(0, yhat_i - hi_i, lo_i - yhat_i) + lam * sum_c |p_c|_H^2,

a linear penalty outside each reported interval.  The problem is solved
by ADMM in whitened coordinates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as spl
from scipy.integrate import trapezoid

from ._optim import SolveInfo
from .core import as_locations
from .kernels import Kernel, gram
from .psd import BemBasis


def branch_power(psd, response_sq, frequency_grid) -> float:
    """Output energy ``int psd(f) |g(f)|^2 df`` by the trapezoidal rule."""
    psd = np.asarray(psd, dtype=float)
    r = np.asarray(response_sq, dtype=float)
    if psd.shape != r.shape or psd.shape[-1] != np.size(frequency_grid):
        raise ValueError("PSD and response must share the frequency grid")
    return float(trapezoid(psd * r, np.asarray(frequency_grid, dtype=float)))


class FilterBank:
    """Power responses ``|g_{n,j}(f)|^2`` of shape (sensors, J, F)."""

    def __init__(self, responses_sq, frequency_grid):
        R = np.asarray(responses_sq, dtype=float)
        if R.ndim == 2:
            R = R[None]
        f = np.asarray(frequency_grid, dtype=float)
        if R.shape[-1] != f.size:
            raise ValueError("responses must be sampled on the frequency grid")
        if np.any(R < 0) or not np.all(np.isfinite(R)):
            raise ValueError("power responses must be finite and nonnegative")
        R.setflags(write=False)
        self.responses_sq = R
        self.frequency_grid = f

    @classmethod
    def pseudorandom(cls, n_sensors: int, J: int, frequency_grid, seed: int) -> "FilterBank":
        """Squared seeded Gaussian frequency-response samples."""
        f = np.asarray(frequency_grid, dtype=float)
        g = np.random.default_rng(seed).standard_normal((n_sensors, J, f.size))
        return cls(g * g, f)

    @property
    def n_sensors(self) -> int:
        return self.responses_sq.shape[0]

    @property
    def J(self) -> int:
        return self.responses_sq.shape[1]

    def response(self, n: int, j: int) -> np.ndarray:
        return self.responses_sq[n % self.n_sensors, j]

    def projection_vectors(self, basis: BemBasis) -> np.ndarray:
        """``b[n, j, c] = int b_c |g_{n,j}|^2 df``, shape (sensors, J, C)."""
        if basis.n_frequencies != self.frequency_grid.size:
            raise ValueError("basis and filter bank disagree on the frequency grid")
        prod = self.responses_sq[:, :, None, :] * basis.curves[None, None, :, :]
        return trapezoid(prod, self.frequency_grid, axis=-1)

    def check_independent(self, basis: BemBasis) -> None:
        """Per-sensor projection vectors must be independent when ``J <= C``."""
        if self.J > basis.n_basis:
            return
        for n, Bn in enumerate(self.projection_vectors(basis)):
            if np.linalg.matrix_rank(Bn) < self.J:
                raise ValueError(f"projection vectors of sensor {n} are linearly dependent")


class Quantizer:
    """Scalar quantizer with sorted breakpoints ``t_0 < ... < t_{K-1}``.

    Code ``q`` covers ``[t_{q-1}, t_q)`` with ``t_{-1} = -inf`` and
    ``t_K = +inf``, so there are ``K + 1`` codes.
    """

    def __init__(self, breakpoints):
        b = np.asarray(breakpoints, dtype=float).ravel()
        b = b[np.isfinite(b)]
        if b.size == 0:
            raise ValueError("at least one finite breakpoint is required")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        b.setflags(write=False)
        self.breakpoints = b

    @classmethod
    def uniform(cls, step: float, lo: float, hi: float) -> "Quantizer":
        if step <= 0 or hi <= lo:
            raise ValueError("need step > 0 and hi > lo")
        n = int(np.floor((hi - lo) / step + 1e-9))
        return cls(lo + step * np.arange(n + 1))

    @property
    def n_codes(self) -> int:
        return self.breakpoints.size + 1

    def quantize(self, value):
        v = np.asarray(value, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("cannot quantize non-finite values")
        code = np.searchsorted(self.breakpoints, v, side="right")
        return int(code) if code.ndim == 0 else code

    def bounds(self, code):
        c = np.asarray(code, dtype=np.int64)
        if np.any((c < 0) | (c >= self.n_codes)):
            raise ValueError("invalid code")
        ext = np.concatenate([[-np.inf], self.breakpoints, [np.inf]])
        lo, hi = ext[c], ext[c + 1]
        return (float(lo), float(hi)) if c.ndim == 0 else (lo, hi)


def quantize(q: Quantizer, value):
    return q.quantize(value)


@dataclass(frozen=True)
class QuantizedMeasurement:
    location: tuple
    sensor: int
    branch: int
    code: int


@dataclass(frozen=True)
class QuantizedSet:
    """Columnar quantized reports with their projection vectors (M x C)."""

    locations: np.ndarray
    sensor: np.ndarray
    branch: np.ndarray
    codes: np.ndarray
    projection: np.ndarray
    quantizer: Quantizer

    def __len__(self):
        return self.codes.shape[0]

    def intervals(self):
        return self.quantizer.bounds(self.codes)

    def items(self):
        for i in range(len(self)):
            yield QuantizedMeasurement(tuple(self.locations[self.sensor[i]]), int(self.sensor[i]),
                                       int(self.branch[i]), int(self.codes[i]))


def simulate_reports(sensor_locations, coefficient_values, filterbank: FilterBank,
                     basis: BemBasis, quantizer: Quantizer, noise_std: float = 0.0,
                     seed: int = 0):
    """Filter-bank energies and their codes for known BEM coefficients.

    ``coefficient_values`` is (N, C): ``p_c(x_n)``.  Returns
    ``(QuantizedSet, phi)`` where ``phi`` are the unquantized energies.
    """
    X = as_locations(sensor_locations)
    P = np.asarray(coefficient_values, dtype=float)
    Bv = filterbank.projection_vectors(basis)
    N, J = X.shape[0], filterbank.J
    if filterbank.n_sensors not in (1, N):
        raise ValueError("filter bank must have one entry per sensor")
    Bv = np.broadcast_to(Bv, (N, J, basis.n_basis))
    phi = np.einsum("njc,nc->nj", Bv, P).ravel()
    if noise_std > 0:
        phi = phi + noise_std * np.random.default_rng(seed).standard_normal(phi.shape)
    sensor = np.repeat(np.arange(N), J)
    branch = np.tile(np.arange(J), N)
    codes = np.asarray(quantizer.quantize(phi), dtype=np.int64).reshape(-1)
    qs = QuantizedSet(X, sensor, branch, codes, Bv.reshape(N * J, -1).copy(), quantizer)
    return qs, phi


@dataclass(frozen=True)
class CoefficientMaps:
    """``p_c(x) = sum_n A[n, c] k(x, x_n)``; ``evaluate`` returns (n, C)."""

    centroids: np.ndarray
    A: np.ndarray
    kernel: Kernel
    basis: BemBasis
    info: Optional[SolveInfo] = field(default=None, compare=False)

    def evaluate(self, X) -> np.ndarray:
        X = as_locations(X, self.centroids.shape[1])
        return self.kernel(X, self.centroids) @ self.A

    def psd(self, X) -> np.ndarray:
        return self.evaluate(X) @ self.basis.curves

    def component(self, c: int):
        outer = self

        class _One:
            def evaluate(self, X):
                return outer.evaluate(X)[:, c]

        return _One()


def _whiten(K):
    w, U = np.linalg.eigh(0.5 * (K + K.T))
    w = np.maximum(w, 0.0)
    return (U * np.sqrt(w)) @ U.T, U, w


def _operator(data: QuantizedSet, Ksq):
    """Dense matrix of ``V -> yhat`` with ``V`` (N x C) flattened row-major."""
    N = data.locations.shape[0]
    C = data.projection.shape[1]
    # yhat_i = sum_c (Ksq V)[s_i, c] b_ic = sum_{m,c} Ksq[s_i, m] b_ic V[m, c]
    T = (Ksq[data.sensor][:, :, None] * data.projection[:, None, :]).reshape(len(data), N * C)
    return T


def interval_penalty(yhat, lo, hi) -> np.ndarray:
    return np.maximum(0.0, np.maximum(yhat - hi, lo - yhat))


def _prox_interval(q, t, lo, hi):
    """Prox of ``t * dist(., [lo, hi])``: move toward the interval by at most ``t``."""
    out = q.copy()
    above = q > hi
    below = q < lo
    out[above] = np.maximum(hi[above], q[above] - t)
    out[below] = np.minimum(lo[below], q[below] + t)
    return out


def fit_from_intervals(data: QuantizedSet, basis: BemBasis, kernel: Kernel, lam: float,
                       penalty_weight: float = 1.0, tol: float = 1e-6,
                       max_iter: int = 100_000, rho: Optional[float] = None) -> CoefficientMaps:
    """Interval-penalty fit of the C coefficient maps.

    Solved by ADMM on the split ``y = T v`` where ``v = K^{1/2} A`` are
    whitened coefficients.  The ``v`` step is an exact linear solve so
    ill-conditioned projection vectors do not slow it down.  Stops when
    the primal-dual gap is at most ``tol * primal``; the best
    primal iterate is returned and ``info.history`` (best-so-far primal
    objective) is non-increasing by construction.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if penalty_weight <= 0:
        raise ValueError("penalty weight must be positive")
    if basis.n_basis != data.projection.shape[1]:
        raise ValueError("projection vectors do not match the basis size")
    X = data.locations
    N, C = X.shape[0], basis.n_basis
    K = gram(kernel, X)
    Ksq, U, w = _whiten(K)
    T = _operator(data, Ksq)
    lo, hi = data.intervals()
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    wgt = float(penalty_weight)
    TTt = T @ T.T
    M = TTt.shape[0]

    def primal(v):
        return lam * float(v @ v) + wgt * float(interval_penalty(T @ v, lo, hi).sum())

    def dual(z):
        TtZ = T.T @ z
        gstar = np.where(z > 0, z * np.where(np.isfinite(hi), hi, 0.0),
                         z * np.where(np.isfinite(lo), lo, 0.0))
        return -float(TtZ @ TtZ) / (4.0 * lam) - float(gstar.sum())

    if rho is None:
        scale = float(np.trace(TTt)) / max(M, 1)
        rho = 2.0 * lam / scale if scale > 0 else 1.0
    rho = float(rho)

    def factor(r):
        return spl.cho_factor(2.0 * lam * np.eye(M) + r * TTt, lower=True)

    cG = factor(rho)
    v = np.zeros(N * C)
    y = np.zeros(M)
    u = np.zeros(M)
    best_v, best_p = v.copy(), primal(v)
    history = [best_p]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # (2 lam I + rho T'T)^{-1} T' = T' (2 lam I + rho T T')^{-1}
        v = rho * (T.T @ spl.cho_solve(cG, y - u))
        Tv = T @ v
        y_old = y
        y = _prox_interval(Tv + u, wgt / rho, lo, hi)
        u = u + Tv - y
        p = primal(v)
        if p < best_p:
            best_p, best_v = p, v.copy()
        history.append(best_p)
        if best_p - dual(rho * u) <= tol * max(best_p, 1e-12):
            converged = True
            break
        if it % 20 == 0:
            r_norm = np.linalg.norm(Tv - y)
            s_norm = rho * np.linalg.norm(T.T @ (y - y_old))
            if r_norm > 10.0 * s_norm or s_norm > 10.0 * r_norm:
                f = 2.0 if r_norm > s_norm else 0.5
                rho *= f
                u /= f
                cG = factor(rho)
    V = best_v.reshape(N, C)
    # p_c at sensors = Ksq V = K A  ->  A = K^+ Ksq V
    inv_sqrt = np.where(w > 1e-12 * max(w.max(), 1e-300), 1.0 / np.sqrt(np.maximum(w, 1e-300)), 0.0)
    A = (U * inv_sqrt) @ U.T @ V
    return CoefficientMaps(X, A, kernel, basis, SolveInfo(converged, it, best_p, history))


def fit_unquantized(sensor_locations, phi, projection, basis: BemBasis, kernel: Kernel,
                    lam: float) -> CoefficientMaps:
    """Squared-loss counterpart on the exact energies (KRR on BEM targets):
    ``minimize sum_i (yhat_i - phi_i)^2 + lam * sum_c |p_c|_H^2``.

    ``lam = 0`` gives the minimum-norm interpolant of the energies.
    """
    X = as_locations(sensor_locations)
    N, C = X.shape[0], basis.n_basis
    J = len(phi) // N
    sensor = np.repeat(np.arange(N), J)
    K = gram(kernel, X)
    Ksq, U, w = _whiten(K)
    T = (Ksq[sensor][:, :, None] * np.asarray(projection)[:, None, :]).reshape(len(phi), N * C)
    phi = np.asarray(phi, dtype=float)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if lam == 0:
        v = np.linalg.pinv(T, rcond=1e-12) @ phi
    else:
        v = T.T @ spl.solve(T @ T.T + lam * np.eye(T.shape[0]), phi, assume_a="pos")
    inv_sqrt = np.where(w > 1e-12 * max(w.max(), 1e-300), 1.0 / np.sqrt(np.maximum(w, 1e-300)), 0.0)
    A = (U * inv_sqrt) @ U.T @ v.reshape(N, C)
    return CoefficientMaps(X, A, kernel, basis)


def write_quantized(path, data: QuantizedSet) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "z", "branch", "code"])
        d = data.locations.shape[1]
        for i in range(len(data)):
            loc = data.locations[data.sensor[i]]
            wr.writerow([repr(float(v)) for v in loc] + [""] * (3 - d)
                        + [int(data.branch[i]), int(data.codes[i])])


def read_quantized(path):
    """Returns ``(locations, sensor, branch, codes)`` with sensors numbered by first appearance."""
    locs, index, sensor, branch, codes = [], {}, [], [], []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            loc = tuple(float(rec[k]) for k in ("x", "y", "z") if rec[k] not in ("", None))
            if loc not in index:
                index[loc] = len(locs)
                locs.append(loc)
            sensor.append(index[loc])
            branch.append(int(rec["branch"]))
            codes.append(int(rec["code"]))
    return np.array(locs), np.array(sensor), np.array(branch), np.array(codes)
