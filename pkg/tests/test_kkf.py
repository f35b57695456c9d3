import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radiomap.core import Grid
from radiomap.propmap.kkf import (
    KkfModel,
    SpatialBasis,
    gudmundson_cov,
    kkf_estimate_shadowing,
    kkf_gain_map,
    kkf_predict,
    kkf_step,
    kkf_update,
    run_filter,
)

GRID = Grid.from_bounds([0, 0], [10, 10], [12, 12])


def _model(seed=0, rho=0.9, eta=True, nu=True, M=10):
    rng = np.random.default_rng(seed)
    basis = SpatialBasis.on_subgrid(GRID, 3)
    sensors = rng.uniform(0, 10, (M, 2))
    return KkfModel(basis, sensors, rho, gudmundson_cov(0.5, 3.0) if eta else None,
                    gudmundson_cov(1.0, 1.0) if nu else None, 0.1)


def test_basis_orthonormal_on_grid():
    b = SpatialBasis.on_subgrid(GRID, 3)
    assert b.K == 9
    assert np.allclose(b.on_grid.T @ b.on_grid, np.eye(9), atol=1e-12)
    assert np.allclose(b.evaluate(GRID.points()), b.on_grid)
    with pytest.raises(ValueError):
        SpatialBasis(GRID, [[1.0, 1.0]], 0.0)
    with pytest.raises(ValueError):
        SpatialBasis(GRID, [[1.0, 1.0], [1.0, 1.0]], 1.0)


def test_model_matrices():
    m = _model()
    assert np.allclose(m.F, 0.9 * np.eye(9))
    P = m.basis.pinv
    G = GRID.points()
    assert np.allclose(m.Q, P @ gudmundson_cov(0.5, 3.0)(G, G) @ P.T)
    assert np.allclose(m.R, gudmundson_cov(1.0, 1.0)(m.sensors, m.sensors) + 0.1 * np.eye(10))
    B = 0.5 * m.basis.on_grid
    assert np.allclose(KkfModel.from_transition(m.basis, m.sensors, B).F, 0.5 * np.eye(9), atol=1e-12)
    with pytest.raises(ValueError):
        KkfModel(m.basis, m.sensors, F=np.eye(3))
    with pytest.raises(ValueError):
        KkfModel(m.basis, m.sensors, noise_variance=-1.0)


@settings(max_examples=15)
@given(st.integers(0, 9999))
def test_update_matches_information_form(seed):
    """Joseph-form update equals the information-filter posterior."""
    m = _model(seed % 5)
    rng = np.random.default_rng(seed)
    K = m.basis.K
    A = rng.standard_normal((K, K))
    prior = m.initial_state(rng.standard_normal(K), A @ A.T + 0.5 * np.eye(K))
    y = rng.standard_normal(m.H.shape[0])
    post = kkf_update(m, prior, y)
    Ri = np.linalg.inv(m.R)
    info = np.linalg.inv(prior.cov) + m.H.T @ Ri @ m.H
    cov = np.linalg.inv(info)
    mean = cov @ (np.linalg.solve(prior.cov, prior.mean) + m.H.T @ Ri @ y)
    assert np.allclose(post.cov, cov, atol=1e-9)
    assert np.allclose(post.mean, mean, atol=1e-8)
    assert np.linalg.eigvalsh(post.cov).min() > 0
    # the update never increases uncertainty
    assert np.linalg.eigvalsh(prior.cov - post.cov).min() >= -1e-10


def test_predict_propagates_moments():
    m = _model()
    s = m.initial_state(np.ones(9), 2 * np.eye(9))
    p = kkf_predict(m, s)
    assert p.t == 1
    assert np.allclose(p.mean, 0.9 * np.ones(9))
    assert np.allclose(p.cov, 0.81 * 2 * np.eye(9) + m.Q)


def test_nu_kriging_equals_batch_lmmse():
    """Post-update residual kriging equals LMMSE of nu from the innovation."""
    m = _model(3)
    rng = np.random.default_rng(1)
    y = rng.standard_normal(m.H.shape[0])
    prior = kkf_predict(m, m.initial_state())
    post = kkf_update(m, prior, y)
    X = rng.uniform(0, 10, (7, 2))
    Cnu_x = m.nu_cov(X, m.sensors)
    S = m.H @ prior.cov @ m.H.T + m.R
    nu_batch = Cnu_x @ np.linalg.solve(S, y - m.H @ prior.mean)
    est = kkf_estimate_shadowing(m, post, X)
    assert np.allclose(est - m.basis.evaluate(X) @ post.mean, nu_batch, atol=1e-10)
    gain = kkf_gain_map(m, post, X, lambda Z: np.full(len(Z), -40.0))
    assert np.allclose(gain, -40.0 - est)


def test_filter_tracks_static_field():
    m = _model(2, rho=1.0, eta=False, nu=False, M=20)
    rng = np.random.default_rng(0)
    alpha = rng.standard_normal(9)
    Y = m.H @ alpha + np.sqrt(0.1) * rng.standard_normal((200, 20))
    states = run_filter(m, Y)
    err = states[-1].mean - alpha
    # error consistent with the reported covariance (chi-square, 9 dof, 99.9%)
    assert err @ np.linalg.solve(states[-1].cov, err) < 27.9
    assert np.linalg.norm(err) < np.linalg.norm(states[4].mean - alpha)
    traces = [np.trace(s.cov) for s in states]
    assert np.all(np.diff(traces) <= 1e-12)
    with pytest.raises(ValueError):
        kkf_step(m, states[-1], np.ones(3))
