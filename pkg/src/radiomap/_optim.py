"""Small first-order optimization helpers shared by the estimators."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SolveInfo:
    converged: bool
    iterations: int
    objective: float
    history: list = field(default_factory=list, repr=False)


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def spectral_norm_sq(A, iters: int = 500, seed: int = 0, rtol: float = 1e-10) -> float:
    """Largest eigenvalue of ``A.T @ A`` by power iteration.

    The estimate is inflated by 1 % so it can be used directly as a safe
    Lipschitz bound.
    """
    A = np.asarray(A, dtype=float)
    if A.size == 0 or not np.any(A):
        return 0.0
    v = np.random.default_rng(seed).standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0
        v = w / new
        if abs(new - est) <= rtol * new:
            est = new
            break
        est = new
    return 1.01 * est
