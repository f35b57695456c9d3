import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radiomap.core import Grid, Unit
from radiomap.psd import raised_cosine_basis
from radiomap.simulator import (
    Environment,
    FactorizationError,
    FadingParams,
    ShadowingParams,
    Transmitter,
    draw_link_measurements,
    draw_measurements,
    factor_psd,
    friis_gain,
    gudmundson_covariance,
    psd_of,
    realize,
    sample_shadowing_field,
    true_power_map,
)

GRID = Grid.from_bounds([0, 0], [10, 10], [10, 10])


def test_friis_gain_values_and_floor():
    assert friis_gain([0.0, 0.0], [3.0, 4.0], 2.0) == pytest.approx(1 / 25)
    assert friis_gain([0.0, 0.0], [3.0, 4.0], 3.5) == pytest.approx(5.0 ** -3.5)
    assert friis_gain([0.0, 0.0], [0.1, 0.0], 2.0, d_min=1.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        friis_gain([0.0, 0.0], [0.0, 0.0], 2.0)


@given(st.floats(0.1, 50), st.floats(0.1, 50), st.floats(1.5, 4.0))
def test_friis_gain_monotone_in_distance(d1, d2, n):
    g1 = friis_gain([0.0], [d1], n, 0.05)
    g2 = friis_gain([0.0], [d2], n, 0.05)
    assert (d1 <= d2) == (g1 >= g2) or d1 == d2


def test_gudmundson_covariance_halves_at_delta():
    X = np.array([[0.0, 0.0], [3.0, 0.0], [6.0, 0.0]])
    C = gudmundson_covariance(X, X, 4.0, 3.0)
    assert C[0, 0] == 4.0
    assert C[0, 1] == pytest.approx(2.0)
    assert C[0, 2] == pytest.approx(1.0)


@settings(max_examples=25)
@given(st.integers(2, 25), st.floats(0.1, 10), st.floats(0.2, 8), st.integers(0, 999))
def test_gudmundson_covariance_is_psd(n, s2, delta, seed):
    X = np.random.default_rng(seed).uniform(0, 10, (n, 2))
    C = gudmundson_covariance(X, X, s2, delta)
    assert np.allclose(C, C.T)
    assert np.linalg.eigvalsh(C).min() >= -1e-9 * s2


def test_factor_psd_jitter_and_failure():
    C = np.ones((3, 3))  # rank one, needs jitter
    L = factor_psd(C)
    assert np.allclose(L @ L.T, C, atol=1e-5)
    with pytest.raises(FactorizationError):
        factor_psd(-np.eye(2))


def test_shadowing_field_reproducible_and_zero_when_off():
    p = ShadowingParams(3.0, 2.0)
    a = sample_shadowing_field(GRID, p, 5)
    b = sample_shadowing_field(GRID, p, 5)
    c = sample_shadowing_field(GRID, p, 6)
    assert a.unit is Unit.DB
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert not np.any(sample_shadowing_field(GRID, ShadowingParams(0.0, 1.0), 1).values)


def test_shadowing_variance_monte_carlo():
    g = Grid.from_bounds([0.0], [10.0], [10])
    vals = np.array([sample_shadowing_field(g, ShadowingParams(2.5, 2.0), s).values for s in range(1500)])
    assert np.mean(vals ** 2) == pytest.approx(2.5, rel=0.08)


def _env(**kw):
    txs = (Transmitter((2.0, 3.0), 0.0), Transmitter((7.0, 8.0), 3.0))
    base = dict(transmitters=txs, path_loss_exponent=2.0, shadowing=ShadowingParams(4.0, 2.0),
                fading=FadingParams(1.0), seed=11)
    base.update(kw)
    return Environment(**base)


def test_power_map_is_superposition_of_transmitters():
    env = _env()
    total = true_power_map(env, GRID).values
    parts = sum(true_power_map(_env(transmitters=(t,)), GRID).values for t in env.transmitters)
    assert np.allclose(total, parts, rtol=1e-12)


def test_power_map_deterministic_in_seed():
    a = true_power_map(_env(), GRID).values
    b = true_power_map(_env(), GRID).values
    c = true_power_map(_env(seed=12), GRID).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_free_space_power_matches_friis():
    env = _env(shadowing=ShadowingParams(), fading=FadingParams(), transmitters=(Transmitter((2.0, 3.0), 10.0),))
    X = GRID.points()
    p = realize(env, GRID).power_at(X)
    assert np.allclose(p, 10.0 * friis_gain([2.0, 3.0], X, 2.0, GRID.cell_diagonal))


def test_link_gain_reciprocal():
    real = realize(_env(), GRID)
    rng = np.random.default_rng(0)
    A, B = rng.uniform(0, 10, (20, 2)), rng.uniform(0, 10, (20, 2))
    assert np.allclose(real.link_gain_db(A, B), real.link_gain_db(B, A))


def test_draw_measurements_noise_statistics():
    gm = true_power_map(_env(), GRID).to_db()
    X = np.repeat(GRID.points()[:1], 4000, axis=0)
    ms = draw_measurements(gm, X, 0.5, seed=3)
    assert ms.unit is Unit.DB and ms.noise_variance == 0.5
    resid = ms.values - gm.values[0]
    assert abs(resid.mean()) < 0.05
    assert resid.var() == pytest.approx(0.5, rel=0.1)
    with pytest.raises(ValueError):
        draw_measurements(gm, X, -1.0, 0)
    with pytest.raises(ValueError):
        draw_measurements(_env(), X, 0.1, 0)


def test_link_measurements_shape_and_units():
    pairs = np.random.default_rng(1).uniform(0, 10, (7, 2, 2))
    ms = draw_link_measurements(_env(), pairs, 0.0, 0, GRID)
    assert ms.is_link_data and ms.unit is Unit.DB and len(ms) == 7
    real = realize(_env(), GRID)
    assert np.allclose(ms.values, real.link_gain_db(pairs[:, 0], pairs[:, 1]))


def test_psd_of_combines_basis_curves():
    f = np.linspace(0, 1, 21)
    basis = raised_cosine_basis(f, [0.3, 0.7], 0.3, 0.2)
    env = _env(shadowing=ShadowingParams(), fading=FadingParams(),
               transmitters=(Transmitter((2.0, 3.0), 0.0, (1.0, 0.0)), Transmitter((7.0, 8.0), 0.0, (0.0, 2.0))))
    loc = np.array([5.0, 5.0])
    d = GRID.cell_diagonal
    expect = friis_gain([2.0, 3.0], loc, 2.0, d) * basis.curves[0] + 2 * friis_gain([7.0, 8.0], loc, 2.0, d) * basis.curves[1]
    assert np.allclose(psd_of(env, loc, basis, GRID), expect)
    with pytest.raises(ValueError):
        Transmitter((0.0, 0.0), 0.0, (-1.0,))


def test_environment_validation():
    with pytest.raises(ValueError):
        _env(path_loss_exponent=0.0)
    with pytest.raises(ValueError):
        ShadowingParams(-1.0, 1.0)
    with pytest.raises(ValueError):
        FadingParams(-0.1)
