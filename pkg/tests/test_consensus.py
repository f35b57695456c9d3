import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radiomap.consensus import (
    AgentData,
    AgentState,
    ConsensusProblem,
    MessageLog,
    Regularizer,
    admm_round,
    centralized_solution,
    gamma_residual,
    load_scenario,
    optimality_residual,
    prox_psi,
    run_to_consensus,
    save_scenario,
)

cp = pytest.importorskip("cvxpy")


def _data(n, seed=0, rows=4, dim=3):
    rng = np.random.default_rng(seed)
    return [AgentData(rng.standard_normal((rows, dim)), rng.standard_normal(rows)) for _ in range(n)]


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6), st.floats(0.0, 3.0), st.floats(0.01, 2.0))
def test_prox_is_argmin(a, lam, w):
    a = np.array(a)
    for kind in ("ridge", "l1", "none"):
        reg = Regularizer(kind, lam)
        x = prox_psi(reg, a, w)
        f = lambda t: w * reg(t) + 0.5 * np.sum((t - a) ** 2)
        for d in (1e-4, -1e-4):
            for i in range(a.size):
                e = np.zeros_like(a)
                e[i] = d
                assert f(x) <= f(x + e) + 1e-12


@pytest.mark.parametrize("kind,lam", [("ridge", 0.5), ("l1", 0.3), ("none", 0.0)])
def test_centralized_matches_conic(kind, lam):
    data = _data(4)
    X = np.vstack([d.X for d in data])
    y = np.concatenate([d.y for d in data])
    t = cp.Variable(3)
    pen = {"ridge": lam * cp.sum_squares(t), "l1": lam * cp.norm1(t), "none": 0}[kind]
    cp.Problem(cp.Minimize(0.5 * cp.sum_squares(y - X @ t) + pen)).solve(solver=cp.CLARABEL)
    theta = centralized_solution(Regularizer(kind, lam), data)
    assert np.allclose(theta, t.value, atol=1e-6)
    assert optimality_residual(Regularizer(kind, lam), data, theta) <= 1e-8


@pytest.mark.parametrize("kind,lam", [("ridge", 0.5), ("l1", 0.3)])
@pytest.mark.parametrize("topology", ["ring", "path", "complete"])
def test_admm_reaches_centralized(kind, lam, topology):
    reg = Regularizer(kind, lam)
    pb = getattr(ConsensusProblem, topology)(5, regularizer=reg, rho=1.0)
    data = _data(5, seed=2)
    res = run_to_consensus(pb, data, tol=1e-10, max_rounds=20000)
    assert res.converged
    assert np.abs(res.thetas - centralized_solution(reg, data)).max() <= 1e-6
    assert all(pb.is_edge(a, b) for a, b in res.log.pairs())


def test_round_is_order_independent_and_local():
    pb = ConsensusProblem.ring(4, regularizer=Regularizer("ridge", 0.2))
    data = _data(4, seed=5)
    states = [AgentState.zeros(3) for _ in range(4)]
    for k in range(1, 4):
        states = admm_round(pb, data, states, k)
    log = MessageLog()
    a = admm_round(pb, data, states, 4, log)
    b = admm_round(pb, data, states, 4, order=[3, 1, 0, 2])
    for x, y in zip(a, b):
        assert np.array_equal(x.theta, y.theta) and np.array_equal(x.gamma, y.gamma)
    assert log.pairs(4) == {(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2), (3, 0), (0, 3)}
    for n in range(4):
        assert gamma_residual(pb, data, a[n], n) <= 1e-10
    with pytest.raises(ValueError):
        admm_round(pb, data, states, 0)


def test_problem_validation():
    with pytest.raises(ValueError):
        ConsensusProblem(3, [(0, 1)])
    with pytest.raises(ValueError):
        ConsensusProblem(2, [(0, 0)])
    with pytest.raises(ValueError):
        ConsensusProblem(2, [(0, 1)], rho=0.0)
    with pytest.raises(ValueError):
        Regularizer("elastic", 1.0)
    with pytest.raises(ValueError):
        run_to_consensus(ConsensusProblem.path(3), _data(2))
    with pytest.raises(ValueError):
        AgentData(np.ones((3, 2)), np.ones(2))


def test_budget_exhaustion_reports_non_convergence():
    pb = ConsensusProblem.path(5, regularizer=Regularizer("ridge", 0.5))
    res = run_to_consensus(pb, _data(5), tol=1e-12, max_rounds=5)
    assert not res.converged and res.rounds == 5


def test_scenario_roundtrip(tmp_path):
    pb = ConsensusProblem.ring(3, regularizer=Regularizer("l1", 0.1), rho=2.0)
    data = _data(3, seed=7)
    save_scenario(tmp_path / "sc.json", pb, data, 1e-9, 100)
    pb2, data2, tol, mr = load_scenario(tmp_path / "sc.json")
    assert pb2.edges == pb.edges and pb2.rho == 2.0 and pb2.regularizer == pb.regularizer
    assert tol == 1e-9 and mr == 100
    for a, b in zip(data, data2):
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
