import numpy as np
import pytest

from radiomap.core import Grid, Region
from radiomap.kriging import PathLoss, build_covariance, fit_kriging
from radiomap.simulator import FadingParams, ShadowingParams
from radiomap.surveying import (
    SurveyPlan,
    boustrophedon,
    plan_next,
    read_trajectory,
    run_survey,
    sweep_survey,
    synthetic_truth,
    uncertainty_map,
)
from radiomap.core import MeasurementSet, Unit


def _setup(n=8, seed=0):
    grid = Grid(Region((0.0, 0.0), (float(n), float(n))), (n, n))
    model = build_covariance(ShadowingParams(8.0, 3.0), FadingParams(1.0), PathLoss((2.0, 2.0), 0.0, 2.0, 1.0))
    return grid, model, synthetic_truth(grid, model, seed)


def test_boustrophedon_order():
    grid = Grid(Region((0.0, 0.0), (3.0, 2.0)), (3, 2))
    P = boustrophedon(grid)
    xs = [0.5, 1.5, 2.5]
    expect = [(x, 0.5) for x in xs] + [(x, 1.5) for x in xs[::-1]]
    assert np.allclose(P, expect)
    assert boustrophedon(Grid(Region((0.0, 0.0), (8.0, 8.0)), (8, 8)), 2).shape == (16, 2)
    with pytest.raises(ValueError):
        boustrophedon(grid, 0)


def test_plan_next_maximizes_variance_lowest_index_on_ties():
    grid, model, _ = _setup()
    empty = fit_kriging(model, MeasurementSet(np.zeros((0, 2)), [], Unit.DB, 0.0))
    # the prior variance is constant, so every point ties
    assert np.allclose(plan_next(empty, grid, (4.0, 4.0)), grid.points()[0])
    # with travel cost the closest point wins
    x = plan_next(empty, grid, (4.4, 6.6), travel_weight=0.1)
    assert np.allclose(x, (4.5, 6.5))
    est = fit_kriging(model, MeasurementSet(grid.points()[:10], np.zeros(10), Unit.DB, 0.0))
    u = uncertainty_map(est, grid)
    assert np.allclose(plan_next(est, grid, (0.0, 0.0)), grid.points()[u.argmax()])
    X = grid.points()
    C = model.data_cov(X[:10], 0.0)
    c = model.shadow_cov(X, X[:10])
    direct = u.prior_variance - np.sum(c * np.linalg.solve(C, c.T).T, axis=1)
    assert np.allclose(u.map.values, direct, atol=1e-9)
    assert u.map.values[:10].max() < u.map.values[10:].max()


def test_plan_validation():
    with pytest.raises(ValueError):
        SurveyPlan(np.zeros((3, 2)), 2)
    with pytest.raises(ValueError):
        SurveyPlan(np.zeros((1, 2)), 0)
    with pytest.raises(ValueError):
        SurveyPlan(np.zeros((1, 2)), 2, travel_weight=-1.0)
    plan = SurveyPlan([[0.0, 0.0], [3.0, 4.0]], 2)
    assert plan.path_length() == 5.0 and plan.path_length((0.0, -1.0)) == 6.0


def test_survey_variance_nonincreasing_and_roundtrip(tmp_path):
    grid, model, truth = _setup()
    res = run_survey(truth, model, (0.5, 0.5), 15, noise_variance=0.1, seed=3)
    assert res.plan.waypoints.shape == (15, 2)
    assert np.all(np.diff(res.total_variance) <= 1e-9)
    res.write_trajectory(tmp_path / "t.csv")
    steps, wp, mse, tv = read_trajectory(tmp_path / "t.csv")
    assert list(steps) == list(range(1, 16))
    assert np.array_equal(wp, res.plan.waypoints)
    assert np.array_equal(mse, res.mse) and np.array_equal(tv, res.total_variance)


def test_survey_is_deterministic_and_sweep_stops_at_route_end():
    grid, model, truth = _setup()
    a = run_survey(truth, model, (0.5, 0.5), 6, noise_variance=0.1, seed=1)
    b = run_survey(truth, model, (0.5, 0.5), 6, noise_variance=0.1, seed=1)
    assert np.array_equal(a.mse, b.mse)
    s = sweep_survey(truth, model, 100, stride=4)
    assert s.plan.waypoints.shape[0] == 4
    with pytest.raises(ValueError):
        run_survey(truth, model, (0.5, 0.5), 0)
    with pytest.raises(ValueError):
        sweep_survey(truth, model, 3, noise_variance=-1.0)
