"""Kernel ridge regression over a reproducing-kernel Hilbert space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as spl

from .core import MeasurementSet, as_locations, distances

JITTER_LADDER = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


class SingularSystemError(np.linalg.LinAlgError):
    pass


class Kernel:
    """A symmetric positive-definite function of two locations.

    Subclasses implement ``__call__(X, Y)`` returning the cross matrix.
    """

    def __call__(self, X, Y) -> np.ndarray:
        raise NotImplementedError

    def pair(self, x, y) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return float(self(x.reshape(1, -1), y.reshape(1, -1))[0, 0])


class RBFKernel(Kernel):
    def __init__(self, sigma: float):
        if not sigma > 0:
            raise ValueError("RBF width must be positive")
        self.sigma = float(sigma)

    def __call__(self, X, Y):
        D = distances(X, Y)
        return np.exp(-(D ** 2) / (2.0 * self.sigma ** 2))

    def __repr__(self):
        return f"RBFKernel(sigma={self.sigma!r})"


class CovarianceKernel(Kernel):
    """Adapter turning a covariance model into a kernel.

    ``cov(X, Y)`` must return the covariance matrix between the rows of X
    and Y (coordinate-based).
    """

    def __init__(self, cov):
        self.cov = cov

    def __call__(self, X, Y):
        return self.cov(as_locations(X), as_locations(Y))


def rbf_kernel(sigma: float) -> RBFKernel:
    return RBFKernel(sigma)


def gram(kernel: Kernel, points) -> np.ndarray:
    P = as_locations(points)
    if P.shape[0] == 0:
        raise ValueError("gram needs at least one point")
    K = kernel(P, P)
    return 0.5 * (K + K.T)


@dataclass(frozen=True)
class KernelExpansion:
    """``f(x) = sum_n coefficients[n] * kernel(x, centroids[n])``."""

    centroids: np.ndarray
    coefficients: np.ndarray
    kernel: Kernel

    def __post_init__(self):
        c = as_locations(self.centroids)
        a = np.asarray(self.coefficients, dtype=float).ravel()
        if c.shape[0] != a.shape[0]:
            raise ValueError("one coefficient per centroid")
        c.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "centroids", c)
        object.__setattr__(self, "coefficients", a)

    def evaluate(self, X) -> np.ndarray:
        X = as_locations(X, self.centroids.shape[1])
        return self.kernel(X, self.centroids) @ self.coefficients

    def __call__(self, x) -> float:
        return float(self.evaluate(np.reshape(x, (1, -1)))[0])


def _factor(A, allow_jitter: bool):
    scale = float(np.mean(np.diag(A))) or 1.0
    ladder = JITTER_LADDER if allow_jitter else (0.0,)
    for j in ladder:
        try:
            Aj = A + j * scale * np.eye(A.shape[0])
            c = spl.cho_factor(Aj, lower=True, check_finite=False)
            if np.all(np.diag(c[0]) > 1e-14 * np.sqrt(scale)):
                return Aj, c
        except np.linalg.LinAlgError:
            continue
    raise SingularSystemError("kernel system is singular; use lambda > 0")


def solve_spd(A, b, allow_jitter: bool = True, refine: int = 2):
    """Cholesky solve with jitter escalation and iterative refinement."""
    A = 0.5 * (A + A.T)
    Aj, c = _factor(A, allow_jitter)
    x = spl.cho_solve(c, b, check_finite=False)
    for _ in range(refine):
        x = x + spl.cho_solve(c, b - Aj @ x, check_finite=False)
    return x


def fit_krr(kernel: Kernel, data: MeasurementSet, lam: float) -> KernelExpansion:
    """Solve ``(K + lam * N * I) alpha = m``.

    With ``lam == 0`` the Gram matrix must be nonsingular, which rules out
    duplicated measurement locations.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    N = len(data)
    if N < 1:
        raise ValueError("KRR needs at least one measurement")
    K = gram(kernel, data.locations)
    A = K + lam * N * np.eye(N)
    m = np.asarray(data.values, dtype=float)
    if not np.any(m):
        alpha = np.zeros(N)
    else:
        alpha = solve_spd(A, m, allow_jitter=lam > 0)
    return KernelExpansion(data.locations, alpha, kernel)


def rkhs_norm(expansion: KernelExpansion) -> float:
    a = expansion.coefficients
    q = float(a @ gram(expansion.kernel, expansion.centroids) @ a)
    return float(np.sqrt(max(q, 0.0)))


def krr_objective(kernel: Kernel, data: MeasurementSet, lam: float,
                  expansion: KernelExpansion) -> float:
    """``(1/N) sum (m_n - f(x_n))^2 + lam * |f|_H^2``."""
    resid = np.asarray(data.values) - expansion.evaluate(data.locations)
    return float(np.mean(resid ** 2) + lam * rkhs_norm(expansion) ** 2)
