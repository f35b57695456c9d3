"""One-dimensional toy experiments: maps along a road.

Two transmitters at known positions radiate in free space; a sensor
measures the received power (linear units) with additive Gaussian noise
at random positions along the line.  Each figure function returns a
:class:`FigureResult` and can write a CSV and an SVG plot.

fig1  LS fit on Friis basis functions of the known transmitter positions.
fig2  LS fit of a degree-13 polynomial to the same measurements.
fig3  A random RKHS function built from 5 Gaussian kernel terms.
fig4  KRR estimate from the same measurements.
fig5  KRR estimate with twice as many measurements.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Optional

import numpy as np

from .core import MeasurementSet, Region, Unit
from .kernels import RBFKernel, fit_krr
from .parametric import fit_ls, friis_basis, polynomial_basis
from .simulator import friis_gain
from .svg import Series, write_line_plot


@dataclass(frozen=True)
class LineScenario:
    length: float = 100.0
    tx_positions: tuple = (25.0, 62.0)
    tx_powers: tuple = (25.0, 15.0)
    d_min: float = 5.0
    noise_std: float = 0.02
    n_measurements: int = 15
    n_test: int = 1001
    kernel_width: float = 4.0
    krr_lambda: float = 1e-4
    poly_degree: int = 13

    @property
    def region(self) -> Region:
        return Region((0.0,), (self.length,))

    def truth(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, 1)
        out = np.zeros(x.shape[0])
        for t, p in zip(self.tx_positions, self.tx_powers):
            out += p * friis_gain(np.array([t]), x, 2.0, self.d_min)
        return out

    def test_points(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_test)

    def measurements(self, seed: int, n: Optional[int] = None) -> MeasurementSet:
        """Measurement sets for the same seed are nested: the first ``k`` of
        a larger draw equal the smaller draw."""
        n = self.n_measurements if n is None else n
        rng = np.random.default_rng(seed)
        x = rng.uniform(0.0, self.length, 4096)[:n]
        noise = self.noise_std * np.random.default_rng([seed, 1]).standard_normal(4096)[:n]
        return MeasurementSet(x.reshape(-1, 1), self.truth(x) + noise, Unit.WATT, self.noise_std ** 2)


@dataclass
class FigureResult:
    name: str
    x: np.ndarray
    truth: np.ndarray
    estimate: np.ndarray
    measurements: Optional[MeasurementSet]
    metrics: Dict[str, float] = field(default_factory=dict)
    title: str = ""

    @property
    def test_mse(self) -> float:
        return float(np.mean((self.estimate - self.truth) ** 2))

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_figure_csv(out / f"{self.name}.csv", self)
        series = [Series("true map", self.x, self.truth), Series("estimate", self.x, self.estimate)]
        if self.measurements is not None and len(self.measurements):
            series.append(Series("measurements", self.measurements.locations[:, 0],
                                 self.measurements.values, markers=True))
        ref = [self.truth] if self.measurements is None else [self.truth, self.measurements.values]
        lo = min(float(np.min(r)) for r in ref)
        hi = max(float(np.max(r)) for r in ref)
        span = hi - lo or 1.0
        write_line_plot(out / f"{self.name}.svg", series, title=self.title, xlabel="position [m]",
                        ylabel="power", ylim=(lo - 0.1 * span, hi + 0.1 * span))


def write_figure_csv(path, fig: FigureResult) -> None:
    """Columns ``x,truth,estimate,measurement``; measurement rows carry the
    measured value, curve rows leave it empty.  Rows are sorted by ``x``."""
    rows = [(float(a), float(b), float(c), "") for a, b, c in zip(fig.x, fig.truth, fig.estimate)]
    if fig.measurements is not None and len(fig.measurements):
        mx = fig.measurements.locations[:, 0]
        rows += [(float(a), np.nan, np.nan, repr(float(v))) for a, v in zip(mx, fig.measurements.values)]
    rows.sort(key=lambda r: (r[0], r[3] != ""))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["x", "truth", "estimate", "measurement"])
        for a, b, c, m in rows:
            wr.writerow([repr(a), "" if np.isnan(b) else repr(b), "" if np.isnan(c) else repr(c), m])


def _result(name, sc: LineScenario, data, predict: Callable, title: str) -> FigureResult:
    x = sc.test_points()
    fig = FigureResult(name, x, sc.truth(x), predict(x.reshape(-1, 1)), data, title=title)
    fig.metrics["test_mse"] = fig.test_mse
    fig.metrics["n_measurements"] = float(len(data))
    return fig


def fig1(seed: int = 0, scenario: LineScenario = LineScenario()) -> FigureResult:
    data = scenario.measurements(seed)
    basis = friis_basis(np.reshape(scenario.tx_positions, (-1, 1)), 2.0, scenario.d_min)
    est = fit_ls(basis, data)
    return _result("fig1", scenario, data, est.evaluate, "LS with known transmitter positions")


def fig2(seed: int = 0, scenario: LineScenario = LineScenario()) -> FigureResult:
    data = scenario.measurements(seed)
    basis = polynomial_basis(scenario.poly_degree, scenario.region)
    est = fit_ls(basis, data)
    fig = _result("fig2", scenario, data, est.evaluate, f"LS polynomial of degree {scenario.poly_degree}")
    fig.metrics["n_basis_functions"] = float(len(basis))
    return fig


def fig3(seed: int = 0, scenario: LineScenario = LineScenario(), n_terms: int = 5) -> FigureResult:
    """``f(x) = sum_i a_i k(x, x'_i)`` with ``n_terms`` random centroids."""
    rng = np.random.default_rng(seed)
    centroids = np.sort(rng.uniform(0.0, scenario.length, n_terms))
    coef = rng.standard_normal(n_terms)
    kernel = RBFKernel(3.0 * scenario.kernel_width)
    x = scenario.test_points()
    f = kernel(x.reshape(-1, 1), centroids.reshape(-1, 1)) @ coef
    fig = FigureResult("fig3", x, f, f, MeasurementSet(centroids.reshape(-1, 1), coef, Unit.WATT),
                       title=f"RKHS function with {n_terms} terms")
    fig.metrics["n_terms"] = float(n_terms)
    return fig


def _krr(name, seed, scenario, n, title):
    data = scenario.measurements(seed, n)
    est = fit_krr(RBFKernel(scenario.kernel_width), data, scenario.krr_lambda)
    return _result(name, scenario, data, est.evaluate, title)


def fig4(seed: int = 0, scenario: LineScenario = LineScenario()) -> FigureResult:
    return _krr("fig4", seed, scenario, scenario.n_measurements, "KRR estimate")


def fig5(seed: int = 0, scenario: LineScenario = LineScenario()) -> FigureResult:
    return _krr("fig5", seed, scenario, 2 * scenario.n_measurements, "KRR estimate, twice the measurements")


FIGURES = {"fig1": fig1, "fig2": fig2, "fig3": fig3, "fig4": fig4, "fig5": fig5}


def make_figure(name: str, seed: int = 0, out_dir=None, scenario: LineScenario = LineScenario()) -> FigureResult:
    if name not in FIGURES:
        raise ValueError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")
    fig = FIGURES[name](seed, scenario)
    if out_dir is not None:
        fig.write(out_dir)
    return fig
