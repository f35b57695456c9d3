import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radiomap.kernels import RBFKernel
from radiomap.psd import (
    BemBasis,
    PsdMeasurementSet,
    default_fitter,
    fit_narrowband,
    fit_per_frequency,
    fit_wideband_bem,
    flat_basis,
    indicator_basis,
    krr_fitter,
    nmf_anls,
    raised_cosine,
    raised_cosine_basis,
    read_psd_measurements,
    spa_columns,
    write_psd_measurements,
)

F = np.linspace(0, 1, 41)


def test_raised_cosine_shape_and_area():
    f = np.linspace(-1, 1, 20001)
    r = raised_cosine(f, 0.0, 0.5, 0.3)
    assert r.max() == 1.0 and r.min() == 0.0
    assert np.trapezoid(r, f) if hasattr(np, "trapezoid") else np.trapz(r, f) == pytest.approx(0.5, rel=1e-3)
    assert np.array_equal(raised_cosine(f, 0.0, 0.5, 0.0) > 0, np.abs(f) <= 0.25)
    with pytest.raises(ValueError):
        raised_cosine(f, 0.0, 0.0, 0.2)


def test_bem_basis_validation():
    with pytest.raises(ValueError):
        BemBasis(F, -np.ones((1, F.size)))
    with pytest.raises(ValueError):
        BemBasis(F, np.ones((2, F.size)))
    with pytest.raises(ValueError):
        BemBasis(F, np.ones((1, 3)))


@settings(max_examples=25)
@given(st.lists(st.floats(0, 5), min_size=2, max_size=2))
def test_project_inverts_synthesize(coef):
    B = raised_cosine_basis(F, [0.25, 0.75], 0.4, 0.3)
    c = np.array(coef)
    assert np.allclose(B.project(B.synthesize(c)), c, atol=1e-9)


def test_project_is_nonnegative():
    B = raised_cosine_basis(F, [0.3, 0.5], 0.4, 0.3)
    psd = B.curves[0] - 0.2 * B.curves[1]
    assert np.all(B.project(np.clip(psd, 0, None)) >= 0)


def _data(seed, N=15, Fn=12):
    rng = np.random.default_rng(seed)
    return PsdMeasurementSet(rng.uniform(0, 10, (N, 2)), rng.uniform(0, 1, (N, Fn)), 0.0, np.linspace(0, 1, Fn))


@settings(max_examples=10)
@given(st.integers(0, 9999))
def test_indicator_basis_reduces_to_per_frequency(seed):
    d = _data(seed)
    inner = krr_fitter(RBFKernel(2.0), 1e-3)
    Q = np.random.default_rng(seed + 1).uniform(0, 10, (20, 2))
    a = fit_per_frequency(d, inner).evaluate(Q)
    b = fit_wideband_bem(d, indicator_basis(d.frequency_grid), inner).evaluate(Q)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


def test_flat_basis_reduces_to_single_map():
    d = _data(2)
    inner = krr_fitter(RBFKernel(2.0), 1e-3)
    Q = np.random.default_rng(0).uniform(0, 10, (20, 2))
    flat = fit_wideband_bem(d, flat_basis(d.frequency_grid), inner).coefficient_maps(Q)[:, 0]
    single = inner(d.scalar(d.psd.mean(axis=1))).evaluate(Q)
    assert np.allclose(flat, single, rtol=1e-12)


def test_wideband_bem_recovers_coefficient_fields():
    B = raised_cosine_basis(F, [0.25, 0.75], 0.4, 0.3)
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 10, (40, 2))
    coef = lambda X: np.column_stack([1 + np.sin(X[:, 0] / 3), 2 + np.cos(X[:, 1] / 4)])
    d = PsdMeasurementSet(X, coef(X) @ B.curves, 0.0, F)
    est = fit_wideband_bem(d, B, krr_fitter(RBFKernel(2.0), 1e-8))
    Q = rng.uniform(2, 8, (30, 2))
    assert np.allclose(est.coefficient_maps(Q), coef(Q), atol=5e-2)
    with pytest.raises(ValueError):
        fit_wideband_bem(_data(0), B)


def test_nmf_recovers_generator_spectra():
    B = raised_cosine_basis(F, [0.25, 0.75], 0.4, 0.3)
    rng = np.random.default_rng(0)
    M = rng.uniform(0.1, 1, (15, 2)) @ B.curves
    H, P, info = nmf_anls(M, 2, seed=0)
    assert np.all(H >= 0) and np.all(P >= 0)
    assert np.linalg.norm(M - H @ P) <= 1e-6 * np.linalg.norm(M)
    for s in range(2):
        cos = max(P[s] @ b / np.linalg.norm(P[s]) / np.linalg.norm(b) for b in B.curves)
        assert cos >= 0.999
    assert np.all(np.diff(info.history) <= 1e-12)


def test_nmf_rank_one_optimal_and_validation():
    M = np.random.default_rng(1).uniform(0, 1, (10, 8))
    H, P, _ = nmf_anls(M, 1)
    s = np.linalg.svd(M, compute_uv=False)
    # the leading singular pair of a positive matrix is nonnegative
    assert np.linalg.norm(M - H @ P) == pytest.approx(np.sqrt(np.sum(s[1:] ** 2)), rel=1e-6)
    with pytest.raises(ValueError):
        nmf_anls(M, 0)
    with pytest.raises(ValueError):
        nmf_anls(-M, 1)


def test_spa_picks_pure_columns():
    W = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.2, 0.7]])
    M = np.abs(np.random.default_rng(0).uniform(0.5, 1, (6, 2))) @ W.T
    assert sorted(spa_columns(M, 2).tolist()) == [0, 1]


def test_narrowband_estimate_reproduces_measurements():
    B = raised_cosine_basis(F, [0.25, 0.75], 0.4, 0.3)
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 10, (20, 2))
    d = PsdMeasurementSet(X, rng.uniform(0.1, 1, (20, 2)) @ B.curves, 0.0, F)
    est = fit_narrowband(d, 2, inner=krr_fitter(RBFKernel(1.0), 1e-9))
    assert np.allclose(est.evaluate(X), d.psd, atol=1e-4 * d.psd.max())


def test_default_fitter_and_validation():
    d = PsdMeasurementSet([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0], [7.0, 0.0]], np.ones((4, 2)))
    est = default_fitter(d)(d.at_frequency(0))
    # nearest-neighbour spacings 1, 1, 2, 4
    assert est.kernel.sigma == pytest.approx(1.5)
    assert np.allclose(est.evaluate(d.locations), 1.0, atol=1e-4)
    with pytest.raises(ValueError):
        PsdMeasurementSet([[0.0, 0.0]], [[-1.0, 1.0]])
    with pytest.raises(ValueError):
        PsdMeasurementSet([[0.0, 0.0]], [[1.0, 1.0]], frequency_grid=[0.0])


def test_psd_file_roundtrip(tmp_path):
    d = _data(4, N=5, Fn=6)
    write_psd_measurements(tmp_path / "p.csv", d)
    back = read_psd_measurements(tmp_path / "p.csv")
    assert np.array_equal(back.locations, d.locations)
    assert np.array_equal(back.psd, d.psd)
