"""Uncertainty-driven measurement collection.

A kriging estimator's posterior variance tells how much a new measurement
at each grid point would help.  The greedy planner moves to the grid point
maximizing ``variance(x) - travel_weight * |x - current|``, measures, refits
and repeats.  A boustrophedon sweep over the grid is the naive baseline.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import Grid, GridMap, MeasurementSet, Unit, as_location, as_locations
from .kriging import CovarianceModel, KrigingEstimate, fit_kriging
from .simulator import sample_shadowing_field


@dataclass(frozen=True)
class UncertaintyMap:
    """Posterior variance (dB^2) on a grid."""

    map: GridMap
    prior_variance: float

    @property
    def total(self) -> float:
        return float(self.map.values.sum())

    def argmax(self) -> int:
        return int(np.argmax(self.map.values))


def uncertainty_map(est: KrigingEstimate, grid: Grid) -> UncertaintyMap:
    var = est.posterior_variance(grid.points())
    return UncertaintyMap(GridMap(grid, var, Unit.DB), est.model.prior_variance)


@dataclass(frozen=True)
class SurveyPlan:
    waypoints: np.ndarray
    budget: int
    travel_weight: float = 0.0

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        wp = np.array(self.waypoints, dtype=float)
        if wp.ndim == 1:
            wp = wp.reshape(-1, 1) if wp.size else wp.reshape(0, 1)
        if wp.shape[0] > self.budget:
            raise ValueError("more waypoints than the measurement budget")
        if self.travel_weight < 0:
            raise ValueError("travel weight must be nonnegative")
        wp.setflags(write=False)
        object.__setattr__(self, "waypoints", wp)

    def path_length(self, start=None) -> float:
        wp = self.waypoints
        if start is not None and wp.shape[0]:
            wp = np.vstack([as_location(start).reshape(1, -1), wp])
        return float(np.linalg.norm(np.diff(wp, axis=0), axis=1).sum()) if wp.shape[0] > 1 else 0.0


def plan_next(est: KrigingEstimate, grid: Grid, current, travel_weight: float = 0.0) -> np.ndarray:
    """Grid point maximizing ``variance - travel_weight * distance``.

    Ties resolve to the lowest grid index.
    """
    P = grid.points()
    score = est.posterior_variance(P)
    if travel_weight:
        score = score - travel_weight * np.linalg.norm(P - as_location(current), axis=1)
    return P[int(np.argmax(score))].copy()


def boustrophedon(grid: Grid, stride: int = 1) -> np.ndarray:
    """Lawnmower ordering of the grid points, every ``stride``-th along each axis.

    The first axis is swept back and forth while the second advances; for 3-D
    grids the sweep of each layer reverses with the layer index.
    """
    if stride < 1:
        raise ValueError("stride must be a positive integer")
    idx = [np.arange(0, c, stride) for c in grid.counts]
    points = grid.points().reshape(*grid.counts, grid.dim)
    if grid.dim == 1:
        return points[idx[0]]
    order = []
    layers = idx[2] if grid.dim == 3 else [None]
    flip = False
    for k in layers:
        for j in idx[1]:
            row = idx[0][::-1] if flip else idx[0]
            order.extend((i, j) if k is None else (i, j, k) for i in row)
            flip = not flip
    return np.array([points[o] for o in order])


def synthetic_truth(grid: Grid, model: CovarianceModel, seed: int) -> GridMap:
    """Draw a dB map from the kriging prior: mean minus shadowing and fading."""
    rng = np.random.default_rng(seed)
    s = sample_shadowing_field(grid, model.shadowing, int(rng.integers(2**63 - 1))).values
    f = np.sqrt(model.fading.sigma2_f) * rng.standard_normal(grid.n_points)
    if model.shadowing_only:
        f = np.zeros_like(f)
    return GridMap(grid, model.mean(grid.points()) - s - f, Unit.DB)


@dataclass(frozen=True)
class SurveyResult:
    measurements: MeasurementSet
    plan: SurveyPlan
    mse: np.ndarray
    total_variance: np.ndarray
    estimate: KrigingEstimate

    def write_trajectory(self, path) -> None:
        write_trajectory(path, self)


def _map_mse(est: KrigingEstimate, truth: GridMap) -> float:
    return float(np.mean((est.evaluate(truth.grid.points()) - truth.values) ** 2))


def _survey(truth: GridMap, model: CovarianceModel, budget: int, next_point,
            noise_variance: float, seed: int, travel_weight: float) -> SurveyResult:
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if noise_variance < 0:
        raise ValueError("noise variance must be nonnegative")
    truth = truth.to_db() if truth.unit is not Unit.DB else truth
    grid = truth.grid
    rng = np.random.default_rng(seed)
    sd = np.sqrt(noise_variance)
    locs, vals, mse, tv = [], [], [], []
    est = fit_kriging(model, MeasurementSet(np.zeros((0, grid.dim)), [], Unit.DB, noise_variance))
    for step in range(budget):
        x = next_point(est, step)
        if x is None:
            break
        x = as_location(x)
        locs.append(x)
        vals.append(float(truth.at(x.reshape(1, -1))[0]) + sd * rng.standard_normal())
        data = MeasurementSet(np.array(locs), vals, Unit.DB, noise_variance)
        est = fit_kriging(model, data)
        mse.append(_map_mse(est, truth))
        tv.append(float(est.posterior_variance(grid.points()).sum()))
    plan = SurveyPlan(np.array(locs), budget, travel_weight)
    return SurveyResult(est.data, plan, np.array(mse), np.array(tv), est)


def run_survey(truth: GridMap, model: CovarianceModel, start, budget: int,
               travel_weight: float = 0.0, noise_variance: float = 0.0,
               seed: int = 0) -> SurveyResult:
    """Greedy uncertainty-driven survey of ``truth``.

    Each step plans the next grid point from the current estimate,
    measures ``truth`` there with Gaussian noise and refits.  ``mse`` and
    ``total_variance`` are recorded after every measurement.
    """
    grid = truth.grid
    current = [as_location(start)]

    def next_point(est, step):
        x = plan_next(est, grid, current[0], travel_weight)
        current[0] = x
        return x

    return _survey(truth, model, budget, next_point, noise_variance, seed, travel_weight)


def sweep_survey(truth: GridMap, model: CovarianceModel, budget: int,
                 noise_variance: float = 0.0, seed: int = 0, stride: int = 1) -> SurveyResult:
    """Baseline: measure along a boustrophedon sweep until the budget runs out."""
    route = boustrophedon(truth.grid, stride)

    def next_point(est, step):
        return route[step] if step < route.shape[0] else None

    return _survey(truth, model, budget, next_point, noise_variance, seed, 0.0)


def write_trajectory(path, result: SurveyResult) -> None:
    """CSV ``step,x,y,z,mse,total_variance`` with one row per measurement."""
    wp = result.plan.waypoints
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["step", "x", "y", "z", "mse", "total_variance"])
        for k in range(wp.shape[0]):
            coords = [repr(float(v)) for v in wp[k]] + [""] * (3 - wp.shape[1])
            wr.writerow([k + 1] + coords + [repr(float(result.mse[k])),
                                            repr(float(result.total_variance[k]))])


def read_trajectory(path):
    """Returns ``(steps, waypoints, mse, total_variance)``."""
    steps, pts, mse, tv = [], [], [], []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            steps.append(int(rec["step"]))
            pts.append([float(rec[k]) for k in ("x", "y", "z") if rec[k] not in ("", None)])
            mse.append(float(rec["mse"]))
            tv.append(float(rec["total_variance"]))
    return np.array(steps), as_locations(np.array(pts)), np.array(mse), np.array(tv)
