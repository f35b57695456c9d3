"""Dictionary learning on a sensor network with missing readings.

Each snapshot ``t`` observes a subset of the ``N`` sensors.  With a
dictionary ``D`` (N x Q, columns in the unit ball) a snapshot is coded by

    f(s, D) = 0.5 |m_obs - O D s|^2 + lam_s |s|_1 + 0.5 lam_L s' D' L D s

where ``O`` selects the observed sensors and ``L`` is the graph Laplacian
of the sensor network.  ``learn`` minimizes the sum over snapshots by block
coordinate descent; ``reconstruct`` fills the missing sensors of a new
snapshot with ``D s``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from ._optim import SolveInfo, soft_threshold


class SensorGraph:
    """Undirected unweighted graph over sensors ``0..N-1``."""

    def __init__(self, adjacency):
        A = np.asarray(adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(A, A.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(A) != 0) or not np.all((A == 0) | (A == 1)):
            raise ValueError("adjacency must be 0/1 with zero diagonal")
        A.setflags(write=False)
        self.adjacency = A

    @classmethod
    def from_edges(cls, n: int, edges) -> "SensorGraph":
        A = np.zeros((n, n))
        for a, b in edges:
            if a == b:
                raise ValueError("self loops are not allowed")
            A[a, b] = A[b, a] = 1.0
        return cls(A)

    @classmethod
    def chain(cls, n: int) -> "SensorGraph":
        return cls.from_edges(n, [(i, i + 1) for i in range(n - 1)])

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def laplacian(self) -> np.ndarray:
        A = self.adjacency
        return np.diag(A.sum(axis=1)) - A

    def edges(self):
        i, j = np.nonzero(np.triu(self.adjacency))
        return list(zip(i.tolist(), j.tolist()))


@dataclass(frozen=True)
class Snapshot:
    time: int
    observed_indices: np.ndarray
    observed_values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.observed_indices, dtype=np.int64).ravel()
        val = np.asarray(self.observed_values, dtype=float).ravel()
        if idx.shape != val.shape:
            raise ValueError("one value per observed index")
        if np.unique(idx).size != idx.size:
            raise ValueError("observed indices must be unique")
        if idx.size and idx.min() < 0:
            raise ValueError("negative sensor index")
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "observed_indices", idx)
        object.__setattr__(self, "observed_values", val)

    @classmethod
    def full(cls, time: int, values) -> "Snapshot":
        values = np.asarray(values, dtype=float)
        return cls(time, np.arange(values.size), values)

    def check(self, n: int) -> None:
        if self.observed_indices.size and self.observed_indices.max() >= n:
            raise ValueError("sensor index beyond the network size")


@dataclass(frozen=True)
class Dictionary:
    D: np.ndarray
    codes: Optional[np.ndarray] = None
    info: Optional[SolveInfo] = field(default=None, compare=False)

    def __post_init__(self):
        D = np.array(self.D, dtype=float)
        if np.any(np.linalg.norm(D, axis=0) > 1.0 + 1e-9):
            raise ValueError("dictionary columns must lie in the unit ball")
        D.setflags(write=False)
        object.__setattr__(self, "D", D)


def _laplacian(L, n):
    if L is None:
        return np.zeros((n, n))
    L = L.laplacian if isinstance(L, SensorGraph) else np.asarray(L, dtype=float)
    if L.shape != (n, n):
        raise ValueError("Laplacian size does not match the dictionary")
    return L


def _quadratic(D, snap: Snapshot, lam_L, L):
    """``H`` and ``c`` of ``0.5 s'Hs - c's`` plus the constant ``0.5 |m_obs|^2``."""
    Do = D[snap.observed_indices]
    H = Do.T @ Do
    if lam_L:
        H = H + lam_L * (D.T @ L @ D)
    c = Do.T @ snap.observed_values
    return 0.5 * (H + H.T), c, 0.5 * float(snap.observed_values @ snap.observed_values)


def code_objective(D, snap: Snapshot, s, lam_s: float, lam_L: float = 0.0, L=None) -> float:
    D = np.asarray(D, dtype=float)
    L = _laplacian(L, D.shape[0])
    r = snap.observed_values - D[snap.observed_indices] @ s
    Ds = D @ s
    return float(0.5 * r @ r + lam_s * np.abs(s).sum() + 0.5 * lam_L * Ds @ L @ Ds)


def _fista(H, c, const, lam_s, s0, tol, max_iter):
    def F(s):
        return float(0.5 * s @ H @ s - c @ s + const + lam_s * np.abs(s).sum())

    lip = float(np.linalg.eigvalsh(H)[-1]) if H.size else 0.0
    if lip <= 0.0:
        # no curvature: the l1 term alone is minimized at zero (c is zero too)
        s = np.zeros_like(s0)
        return s, SolveInfo(True, 0, F(s))
    step = 1.0 / lip
    scale = max(1.0, float(np.max(np.abs(c))) if c.size else 1.0)
    s = s0.copy()
    f = F(s)
    z, t = s.copy(), 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        s_new = soft_threshold(z - step * (H @ z - c), step * lam_s)
        f_new = F(s_new)
        if f_new > f:
            z, t = s.copy(), 1.0
            s_new = soft_threshold(s - step * (H @ s - c), step * lam_s)
            f_new = F(s_new)
            if f_new > f:
                # no descent even from a plain step: objective at rounding level
                station = np.linalg.norm(s - s_new) / step
                at_rounding = 0.5 * step * station ** 2 <= 16 * np.finfo(float).eps * max(1.0, abs(f))
                return s, SolveInfo(bool(station <= tol * scale or at_rounding), it, f)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = s_new + ((t - 1.0) / t_new) * (s_new - s)
        s, f, t = s_new, f_new, t_new
        station = np.linalg.norm(s - soft_threshold(s - step * (H @ s - c), step * lam_s)) / step
        if station <= tol * scale:
            converged = True
            break
    return s, SolveInfo(converged, it, f)


def sparse_code(D, snapshot: Snapshot, lam_s: float, lam_L: float = 0.0, L=None,
                tol: float = 1e-8, max_iter: int = 100_000, s0=None):
    """Minimize the snapshot cost over ``s`` by accelerated proximal gradient.

    Returns ``(s, SolveInfo)``.  A warm start ``s0`` is never made worse:
    the returned objective is at most the objective at ``s0``.
    """
    if lam_s < 0 or lam_L < 0:
        raise ValueError("regularization weights must be nonnegative")
    D = np.asarray(D, dtype=float)
    snapshot.check(D.shape[0])
    L = _laplacian(L, D.shape[0])
    Q = D.shape[1]
    if snapshot.observed_indices.size == 0:
        s = np.zeros(Q)
        return s, SolveInfo(True, 0, 0.0)
    H, c, const = _quadratic(D, snapshot, lam_L, L)
    start = np.zeros(Q) if s0 is None else np.asarray(s0, dtype=float)
    s, info = _fista(H, c, const, lam_s, start, tol, max_iter)
    return s, info


def _column_problem(D, S, snaps, lam_L, L, q):
    """Quadratic ``0.5 d'Ad - b'd`` in column ``q`` with every other block fixed."""
    N = D.shape[0]
    A = np.zeros((N, N))
    b = np.zeros(N)
    D_rest = D.copy()
    D_rest[:, q] = 0.0
    for t, snap in enumerate(snaps):
        sq = S[q, t]
        if sq == 0.0:
            continue
        idx = snap.observed_indices
        other = D_rest @ S[:, t]
        A[idx, idx] += sq * sq
        r = np.zeros(N)
        r[idx] = snap.observed_values - other[idx]
        b += sq * r
        if lam_L:
            A += lam_L * sq * sq * L
            b -= lam_L * sq * (L @ other)
    return 0.5 * (A + A.T), b


def ball_constrained_quadratic(A, b, radius: float = 1.0):
    """Exact minimizer of ``0.5 x'Ax - b'x`` over ``|x| <= radius`` (A PSD).

    Interior solutions come from the pseudo-inverse; boundary solutions
    solve the secular equation ``|(A + mu I)^{-1} b| = radius`` in the
    eigenbasis of ``A`` by bisection.
    """
    w, V = np.linalg.eigh(A)
    w = np.maximum(w, 0.0)
    beta = V.T @ b
    tiny = 1e-12 * max(1.0, float(w[-1]) if w.size else 1.0)
    pos = w > tiny
    x_int = V[:, pos] @ (beta[pos] / w[pos])
    # interior only when b has no component along the null space
    if np.all(np.abs(beta[~pos]) <= 1e-12 * max(1.0, float(np.abs(beta).max(initial=0.0)))) \
            and np.linalg.norm(x_int) <= radius:
        return x_int

    def norm_at(mu):
        return float(np.linalg.norm(beta / (w + mu)))

    # the norm decreases in mu and exceeds the radius as mu -> 0+
    lo, hi = 0.0, max(float(np.linalg.norm(b)) / radius, tiny)
    while norm_at(hi) > radius:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if norm_at(mid) > radius:
            lo = mid
        else:
            hi = mid
    x = V @ (beta / (w + hi))
    n = np.linalg.norm(x)
    return x * (radius / n) if n > radius else x


def total_objective(D, S, snaps, lam_s, lam_L, L) -> float:
    return float(sum(code_objective(D, snap, S[:, t], lam_s, lam_L, L) for t, snap in enumerate(snaps)))


def learn(snapshots: Sequence[Snapshot], Q: int, lam_s: float, lam_L: float = 0.0, L=None,
          seed: int = 0, n_sensors: Optional[int] = None, tol: float = 1e-6,
          max_sweeps: int = 200, code_tol: float = 1e-8) -> Dictionary:
    """Block coordinate descent over the codes and the dictionary columns.

    One sweep codes every snapshot with the dictionary fixed (warm started)
    and then minimizes exactly over each column in turn inside the unit
    ball.  Every block step is kept only if it does not raise the total
    objective, so the per-sweep objective history is non-increasing.
    Stops at relative change ``tol`` or after ``max_sweeps`` sweeps.
    """
    snaps = list(snapshots)
    if not snaps:
        raise ValueError("at least one snapshot is required")
    if Q < 1:
        raise ValueError("dictionary size must be positive")
    if lam_s < 0 or lam_L < 0:
        raise ValueError("regularization weights must be nonnegative")
    if n_sensors is None:
        if L is not None:
            n_sensors = L.n if isinstance(L, SensorGraph) else np.shape(L)[0]
        else:
            n_sensors = 1 + max(int(s.observed_indices.max(initial=-1)) for s in snaps)
    N = int(n_sensors)
    for s in snaps:
        s.check(N)
    L = _laplacian(L, N)
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((N, Q))
    D /= np.linalg.norm(D, axis=0)
    T = len(snaps)
    S = np.zeros((Q, T))
    history = [total_objective(D, S, snaps, lam_s, lam_L, L)]
    converged = False
    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        for t, snap in enumerate(snaps):
            S[:, t], _ = sparse_code(D, snap, lam_s, lam_L, L, tol=code_tol, s0=S[:, t])
        for q in range(Q):
            A, b = _column_problem(D, S, snaps, lam_L, L, q)
            if not np.any(A) and not np.any(b):
                continue
            d_old = D[:, q].copy()
            d_new = ball_constrained_quadratic(A, b)
            if 0.5 * d_new @ A @ d_new - b @ d_new <= 0.5 * d_old @ A @ d_old - b @ d_old:
                D[:, q] = d_new
        f = total_objective(D, S, snaps, lam_s, lam_L, L)
        prev = history[-1]
        history.append(f)
        if abs(prev - f) <= tol * max(abs(prev), 1e-300):
            converged = True
            break
    info = SolveInfo(converged, sweep, history[-1], history)
    return Dictionary(D, S, info)


def reconstruct(D, snapshot: Snapshot, lam_s: float, lam_L: float = 0.0, L=None) -> np.ndarray:
    """Full length-N estimate ``D s`` from the observed part of a snapshot."""
    D = D.D if isinstance(D, Dictionary) else np.asarray(D, dtype=float)
    s, _ = sparse_code(D, snapshot, lam_s, lam_L, L)
    return D @ s


def laplacian_quadratic(L, v) -> float:
    L = L.laplacian if isinstance(L, SensorGraph) else np.asarray(L, dtype=float)
    v = np.asarray(v, dtype=float)
    return float(v @ L @ v)


# file formats

def write_snapshots(path, snapshots: Sequence[Snapshot]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "sensor_index", "value"])
        for snap in snapshots:
            for i, v in zip(snap.observed_indices, snap.observed_values):
                w.writerow([snap.time, int(i), repr(float(v))])


def read_snapshots(path) -> List[Snapshot]:
    rows = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            t = int(rec["time"])
            rows.setdefault(t, []).append((int(rec["sensor_index"]), float(rec["value"])))
    out = []
    for t in sorted(rows):
        idx, val = zip(*rows[t])
        out.append(Snapshot(t, np.array(idx), np.array(val)))
    return out


def write_edges(path, graph: SensorGraph) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "b"])
        for a, b in graph.edges():
            w.writerow([a, b])


def read_edges(path, n: int) -> SensorGraph:
    with open(path, newline="") as fh:
        edges = [(int(r["a"]), int(r["b"])) for r in csv.DictReader(fh)]
    return SensorGraph.from_edges(n, edges)
