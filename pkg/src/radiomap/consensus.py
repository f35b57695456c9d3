"""Decentralized regression by consensus ADMM over a sensor graph.

Agent ``n`` holds ``(X_n, y_n)``; together the agents solve

    minimize_theta 0.5 |y - X theta|^2 + psi(theta)

exchanging only their current ``theta_n`` with single-hop neighbours.
One synchronous round, for every agent and with ``c_n = rho (1 + 2|N_n|)``::

    u_n   <- u_n + rho * sum_{n' in N_n} (theta_n - theta_n')
    lam_n <- lam_n + rho * (theta_n - gamma_n)
    a_n    = (rho * sum_{n'} (theta_n + theta_n') + rho gamma_n - u_n - lam_n) / c_n
    theta_n <- prox_{psi / (N c_n)}(a_n)
    gamma_n <- (rho I + X_n'X_n)^{-1} (X_n'y_n + rho theta_n + lam_n)

All neighbour reads use the previous round's snapshot, so the outcome does
not depend on the order in which agents are processed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg as spl
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ._optim import soft_threshold
from .parametric import lasso


@dataclass(frozen=True)
class Regularizer:
    """``kind`` is ``"none"``, ``"ridge"`` (lam |theta|^2) or ``"l1"`` (lam |theta|_1)."""

    kind: str = "none"
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "ridge", "l1"):
            raise ValueError(f"unknown regularizer {self.kind!r}")
        if self.lam < 0:
            raise ValueError("regularization weight must be nonnegative")

    def __call__(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        if self.kind == "ridge":
            return self.lam * float(theta @ theta)
        if self.kind == "l1":
            return self.lam * float(np.abs(theta).sum())
        return 0.0


def prox_psi(reg: Regularizer, a, weight: float) -> np.ndarray:
    """``argmin_theta weight * psi(theta) + 0.5 |theta - a|^2``."""
    if weight <= 0:
        raise ValueError("prox weight must be positive")
    a = np.asarray(a, dtype=float)
    if reg.kind == "ridge":
        return a / (1.0 + 2.0 * reg.lam * weight)
    if reg.kind == "l1":
        return soft_threshold(a, reg.lam * weight)
    return a.copy()


class ConsensusProblem:
    def __init__(self, n_agents: int, edges, regularizer: Regularizer = Regularizer(),
                 rho: float = 1.0):
        if rho <= 0:
            raise ValueError("rho must be positive")
        if n_agents < 1:
            raise ValueError("at least one agent")
        self.n_agents = int(n_agents)
        E = set()
        for a, b in edges:
            a, b = int(a), int(b)
            if a == b or not (0 <= a < n_agents and 0 <= b < n_agents):
                raise ValueError(f"invalid edge {(a, b)}")
            E.add((min(a, b), max(a, b)))
        self.edges = sorted(E)
        self.neighbors = [[] for _ in range(n_agents)]
        for a, b in self.edges:
            self.neighbors[a].append(b)
            self.neighbors[b].append(a)
        for nb in self.neighbors:
            nb.sort()
        if n_agents > 1:
            r = [a for a, b in self.edges] + [b for a, b in self.edges]
            c = [b for a, b in self.edges] + [a for a, b in self.edges]
            A = csr_matrix((np.ones(len(r)), (r, c)), shape=(n_agents, n_agents))
            if connected_components(A, directed=False)[0] != 1:
                raise ValueError("communication graph is not connected")
        self.regularizer = regularizer
        self.rho = float(rho)

    @classmethod
    def ring(cls, n: int, **kw) -> "ConsensusProblem":
        return cls(n, [(i, (i + 1) % n) for i in range(n)] if n > 2 else [(0, 1)][: n - 1], **kw)

    @classmethod
    def path(cls, n: int, **kw) -> "ConsensusProblem":
        return cls(n, [(i, i + 1) for i in range(n - 1)], **kw)

    @classmethod
    def complete(cls, n: int, **kw) -> "ConsensusProblem":
        return cls(n, [(i, j) for i in range(n) for j in range(i + 1, n)], **kw)

    def is_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in set(self.edges)


@dataclass(frozen=True)
class AgentData:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError("one target per regressor row")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class AgentState:
    theta: np.ndarray
    gamma: np.ndarray
    u: np.ndarray
    lam: np.ndarray

    @classmethod
    def zeros(cls, dim: int) -> "AgentState":
        z = np.zeros(dim)
        return cls(z, z, z, z)


@dataclass
class MessageLog:
    """Cross-agent reads as ``(round, reader, source)`` triples."""

    entries: list = field(default_factory=list)

    def record(self, k: int, reader: int, source: int) -> None:
        self.entries.append((k, reader, source))

    def pairs(self, k: Optional[int] = None):
        return {(r, s) for kk, r, s in self.entries if k is None or kk == k}


class _Local:
    """Per-agent cached factorization of ``rho I + X_n'X_n``."""

    def __init__(self, data: AgentData, rho: float):
        self.data = data
        A = rho * np.eye(data.X.shape[1]) + data.X.T @ data.X
        self.A = A
        self.chol = spl.cho_factor(A, lower=True)
        self.Xty = data.X.T @ data.y


def _locals(problem, data):
    if len(data) != problem.n_agents:
        raise ValueError("one data block per agent")
    dims = {d.X.shape[1] for d in data}
    if len(dims) != 1:
        raise ValueError("all agents must share the regressor dimension")
    return [_Local(d, problem.rho) for d in data]


def admm_round(problem: ConsensusProblem, data, states: Sequence[AgentState], k: int,
               log: Optional[MessageLog] = None, order=None, _cache=None) -> List[AgentState]:
    """One synchronous round; ``order`` permutes the agent processing order."""
    if k < 1:
        raise ValueError("rounds are numbered from 1")
    loc = _cache if _cache is not None else _locals(problem, data)
    rho = problem.rho
    N = problem.n_agents
    snapshot = [s.theta for s in states]  # previous-round values visible to neighbours
    out: List[Optional[AgentState]] = [None] * N
    for n in (range(N) if order is None else order):
        s = states[n]
        nb = problem.neighbors[n]
        peers = []
        for m in nb:
            if log is not None:
                log.record(k, n, m)
            peers.append(snapshot[m])
        theta_sum = np.sum(peers, axis=0) if peers else np.zeros_like(s.theta)
        deg = len(nb)
        u = s.u + rho * (deg * s.theta - theta_sum)
        lam = s.lam + rho * (s.theta - s.gamma)
        c = rho * (1.0 + 2.0 * deg)
        a = (rho * (deg * s.theta + theta_sum) + rho * s.gamma - u - lam) / c
        theta = prox_psi(problem.regularizer, a, 1.0 / (N * c))
        gamma = spl.cho_solve(loc[n].chol, loc[n].Xty + rho * theta + lam)
        out[n] = AgentState(theta, gamma, u, lam)
    return out  # type: ignore[return-value]


def gamma_residual(problem: ConsensusProblem, data, state: AgentState, n: int) -> float:
    d = data[n]
    A = problem.rho * np.eye(d.X.shape[1]) + d.X.T @ d.X
    return float(np.linalg.norm(A @ state.gamma - d.X.T @ d.y - problem.rho * state.theta - state.lam))


@dataclass
class ConsensusResult:
    thetas: np.ndarray
    rounds: int
    converged: bool
    disagreement: list
    change: list
    log: MessageLog
    states: list = field(repr=False, default_factory=list)


def _disagreement(problem, states):
    """Largest violation of the consensus constraints: neighbour gaps and
    the local copy gaps ``theta_n - gamma_n``."""
    d = max(float(np.linalg.norm(s.theta - s.gamma)) for s in states)
    for a, b in problem.edges:
        d = max(d, float(np.linalg.norm(states[a].theta - states[b].theta)))
    return d


def run_to_consensus(problem: ConsensusProblem, data, tol: float = 1e-8,
                     max_rounds: int = 5000, record_log: bool = True,
                     callback=None) -> ConsensusResult:
    """Rounds from an all-zero start until the constraint violation (neighbour
    gaps and local ``theta_n - gamma_n`` gaps) and the per-round change of
    every ``theta_n`` are both at most ``tol``."""
    data = [d if isinstance(d, AgentData) else AgentData(*d) for d in data]
    loc = _locals(problem, data)
    dim = data[0].X.shape[1]
    states = [AgentState.zeros(dim) for _ in range(problem.n_agents)]
    log = MessageLog()
    dis, chg = [], []
    converged = False
    k = 0
    for k in range(1, max_rounds + 1):
        new = admm_round(problem, data, states, k, log if record_log else None, _cache=loc)
        change = max(float(np.linalg.norm(a.theta - b.theta)) for a, b in zip(new, states))
        d = _disagreement(problem, new)
        dis.append(d)
        chg.append(change)
        states = new
        if callback is not None:
            callback(k, states)
        if d <= tol and change <= tol:
            converged = True
            break
    return ConsensusResult(np.array([s.theta for s in states]), k, converged, dis, chg, log, states)


def stack(data):
    data = [d if isinstance(d, AgentData) else AgentData(*d) for d in data]
    return np.vstack([d.X for d in data]), np.concatenate([d.y for d in data])


def centralized_solution(regularizer: Regularizer, data) -> np.ndarray:
    """Fusion-centre solution of ``0.5 |y - X theta|^2 + psi(theta)``."""
    X, y = stack(data)
    if regularizer.kind == "l1":
        theta, _ = lasso(X, y, 2.0 * regularizer.lam, tol=1e-12)
        return theta
    lam = regularizer.lam if regularizer.kind == "ridge" else 0.0
    A = X.T @ X + 2.0 * lam * np.eye(X.shape[1])
    if lam == 0.0:
        return np.linalg.lstsq(X, y, rcond=None)[0]
    return spl.solve(A, X.T @ y, assume_a="pos")


def optimality_residual(regularizer: Regularizer, data, theta) -> float:
    """Norm of the smallest element of ``X'(X theta - y) + d psi(theta)``."""
    X, y = stack(data)
    g = X.T @ (X @ theta - y)
    if regularizer.kind == "ridge":
        return float(np.linalg.norm(g + 2.0 * regularizer.lam * theta))
    if regularizer.kind == "l1":
        lam = regularizer.lam
        r = np.where(theta != 0, g + lam * np.sign(theta), np.sign(g) * np.maximum(np.abs(g) - lam, 0.0))
        return float(np.linalg.norm(r))
    return float(np.linalg.norm(g))


# scenario files

def load_scenario(path):
    """Scenario JSON: ``edges``, ``agents`` (list of data files), ``rho``,
    ``regularizer`` ({kind, lam}), ``tol``, ``max_rounds``.

    Each agent file is a CSV whose last column is the target.
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    files = doc["agents"]
    data = []
    for f in files:
        arr = np.loadtxt(path.parent / f, delimiter=",", ndmin=2, skiprows=1)
        data.append(AgentData(arr[:, :-1], arr[:, -1]))
    reg = Regularizer(**doc.get("regularizer", {}))
    problem = ConsensusProblem(len(files), doc.get("edges", []), reg, float(doc.get("rho", 1.0)))
    return problem, data, float(doc.get("tol", 1e-8)), int(doc.get("max_rounds", 5000))


def save_scenario(path, problem: ConsensusProblem, data, tol: float = 1e-8, max_rounds: int = 5000):
    path = Path(path)
    files = []
    for n, d in enumerate(data):
        name = f"{path.stem}_agent{n}.csv"
        header = ",".join([f"x{j}" for j in range(d.X.shape[1])] + ["y"])
        np.savetxt(path.parent / name, np.column_stack([d.X, d.y]), delimiter=",",
                   header=header, comments="", fmt="%.17g")
        files.append(name)
    doc = {
        "edges": [list(e) for e in problem.edges],
        "agents": files,
        "rho": problem.rho,
        "regularizer": {"kind": problem.regularizer.kind, "lam": problem.regularizer.lam},
        "tol": tol,
        "max_rounds": max_rounds,
    }
    path.write_text(json.dumps(doc, indent=2))
