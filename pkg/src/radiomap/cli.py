"""Command-line front end.

Subcommands: ``simulate``, ``estimate``, ``survey``, ``admm``, ``figures``
and ``eval``.  Global flags ``--seed``, ``--out`` and ``--scenario`` come
before the subcommand.  Exit status is 0 on success, 2 on invalid input
and 3 when a solver stops without converging (outputs are still written).

A power-map scenario is a JSON object such as::

    {"region": {"lower": [0, 0], "upper": [20, 20]}, "grid": [20, 20],
     "transmitters": [{"location": [5, 5], "power_dB": 0}],
     "path_loss_exponent": 2,
     "shadowing": {"sigma2_s": 8, "delta_c": 3}, "fading": {"sigma2_f": 1},
     "measurements": {"count": 60, "noise_variance": 0.1},
     "estimator": {"name": "kriging"},
     "survey": {"budget": 100, "travel_weight": 0.0, "start": [0.5, 0.5]}}

Missing keys take the defaults in :data:`DEFAULT_SCENARIO`.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    Grid,
    GridMap,
    MeasurementSet,
    Region,
    Unit,
    UnitError,
    db_to_linear,
    linear_to_db,
    read_gridmap,
    read_measurements,
    write_gridmap,
    write_measurements,
)

METRICS_SCHEMA = "radiomap.metrics"
METRICS_VERSION = 1

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NONCONVERGED = 3

DEFAULT_SCENARIO = {
    "region": {"lower": [0.0, 0.0], "upper": [20.0, 20.0]},
    "grid": [20, 20],
    "transmitters": [{"location": [5.0, 5.0], "power_dB": 0.0}],
    "path_loss_exponent": 2.0,
    "shadowing": {"sigma2_s": 8.0, "delta_c": 3.0},
    "fading": {"sigma2_f": 1.0},
    "measurements": {"count": 60, "noise_variance": 0.1},
    "estimator": {"name": "kriging"},
    "survey": {"budget": 100, "travel_weight": 0.0, "start": [0.5, 0.5],
               "noise_variance": 0.0, "baseline": True},
    "admm": {"n_agents": 6, "topology": "ring", "samples_per_agent": 8, "dim": 4,
             "noise_std": 0.1, "regularizer": {"kind": "ridge", "lam": 0.5},
             "rho": 1.0, "tol": 1e-8, "max_rounds": 5000},
}

ESTIMATORS = ("kriging", "krr", "ls", "lasso", "completion")


class ValidationError(ValueError):
    pass


# scenario handling

def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_scenario(path) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULT_SCENARIO)
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"scenario file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"scenario is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ValidationError("scenario must be a JSON object")
    return _merge(DEFAULT_SCENARIO, raw)


def _grid(sc) -> Grid:
    r = sc["region"]
    return Grid(Region(r["lower"], r["upper"]), sc["grid"])


def _environment(sc, seed):
    from .simulator import Environment, FadingParams, ShadowingParams, Transmitter

    txs = [Transmitter(tuple(t["location"]), float(t.get("power_dB", 0.0))) for t in sc["transmitters"]]
    if not txs:
        raise ValidationError("scenario needs at least one transmitter")
    return Environment(txs, float(sc["path_loss_exponent"]), ShadowingParams(**sc["shadowing"]),
                       FadingParams(**sc["fading"]), seed=seed)


def _mean_db(env, grid):
    """Deterministic path-loss power in dB summed over transmitters."""
    from .simulator import friis_gain

    def mean(X):
        tot = np.zeros(X.shape[0])
        for tx in env.transmitters:
            tot += tx.power_linear * friis_gain(np.asarray(tx.location), X, env.path_loss_exponent,
                                                grid.cell_diagonal)
        return linear_to_db(tot)

    return mean


def _covariance(env, grid):
    from .kriging import build_covariance

    return build_covariance(env.shadowing, env.fading, _mean_db(env, grid))


def _seeds(seed, n):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def _truth_db(sc, seed) -> GridMap:
    from .simulator import true_power_map

    grid = _grid(sc)
    return true_power_map(_environment(sc, seed), grid).to_db()


def _draw(sc, truth: GridMap, seed) -> MeasurementSet:
    cfg = sc["measurements"]
    n = int(cfg["count"])
    nv = float(cfg.get("noise_variance", 0.0))
    if n < 1 or nv < 0:
        raise ValidationError("measurement count must be positive and noise variance nonnegative")
    s_loc, s_noise = _seeds(seed, 2)
    reg = truth.grid.region
    X = np.random.default_rng(s_loc).uniform(reg.lower, reg.upper, (n, truth.grid.dim))
    noise = np.sqrt(nv) * np.random.default_rng(s_noise).standard_normal(n)
    return MeasurementSet(X, truth.at(X) + noise, Unit.DB, nv)


# metrics

def map_metrics(estimate: GridMap, truth: GridMap) -> dict:
    if estimate.grid != truth.grid:
        raise ValidationError("estimate and truth live on different grids")
    if estimate.unit is not truth.unit:
        raise ValidationError("estimate and truth have different units")
    err = estimate.values - truth.values
    return {"mse": float(np.mean(err ** 2)), "mae": float(np.mean(np.abs(err))),
            "max_abs_error": float(np.max(np.abs(err))), "unit": truth.unit.value}


def write_metrics(path, command: str, seed: int, body: dict) -> dict:
    doc = {"schema": METRICS_SCHEMA, "schema_version": METRICS_VERSION,
           "package_version": __version__, "command": command, "seed": seed}
    doc.update(body)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return doc


# estimators

def run_estimator(cfg: dict, data: MeasurementSet, grid: Grid, env) -> tuple:
    """Returns ``(GridMap in dB, converged, extra metrics)``."""
    name = cfg.get("name")
    if name not in ESTIMATORS:
        raise ValidationError(f"unknown estimator {name!r}; choose from {', '.join(ESTIMATORS)}")
    data.require_unit(Unit.DB)
    P = grid.points()
    if name == "kriging":
        from .kriging import fit_kriging

        est = fit_kriging(_covariance(env, grid), data)
        return GridMap(grid, est.evaluate(P), Unit.DB), True, {}
    if name == "krr":
        from .kernels import RBFKernel, fit_krr

        centre = float(np.mean(data.values))
        centred = data.with_values(np.asarray(data.values) - centre)
        est = fit_krr(RBFKernel(float(cfg.get("sigma", 2.0))), centred, float(cfg.get("lam", 1e-3)))
        return GridMap(grid, centre + est.evaluate(P), Unit.DB), True, {}
    if name == "ls":
        from .parametric import fit_ls, friis_basis

        tx = np.array([t.location for t in env.transmitters])
        lin = data.with_values(db_to_linear(data.values), Unit.WATT)
        est = fit_ls(friis_basis(tx, env.path_loss_exponent, grid.cell_diagonal), lin)
        return _db_map(grid, est.evaluate(P), _floor(data)), True, {"coefficients": est.coefficients.tolist()}
    if name == "lasso":
        from .parametric import fit_lasso

        # lam applies to data scaled to unit peak
        scale = float(np.max(db_to_linear(data.values)))
        lin = data.with_values(db_to_linear(data.values) / scale, Unit.WATT)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            est = fit_lasso(grid, lin, float(cfg.get("lam", 1e-3)), env.path_loss_exponent,
                            max_iter=int(cfg.get("max_iter", 100_000)))
        extra = {"support": est.support().tolist(), "iterations": est.info.iterations}
        return _db_map(grid, scale * est.evaluate(P), _floor(data)), bool(est.info.converged), extra
    from .completion import complete, from_measurements

    if grid.dim != 2:
        raise ValidationError("matrix completion needs a 2-D grid")
    res = complete(from_measurements(grid, data), float(cfg.get("lam", 1.0)),
                   max_iter=int(cfg.get("max_iter", 10_000)))
    return res.map, bool(res.info.converged), {"iterations": res.info.iterations}


def _floor(data):
    return 1e-3 * float(np.min(db_to_linear(data.values)))


def _db_map(grid, linear_values, floor):
    """Nonpositive linear estimates are clipped to ``floor`` before taking dB."""
    return GridMap(grid, linear_to_db(np.maximum(linear_values, floor)), Unit.DB)


# commands

def cmd_simulate(args, sc, out: Path) -> int:
    s_env, s_meas = _seeds(args.seed, 2)
    truth = _truth_db(sc, s_env)
    write_gridmap(out / "truth.json", truth)
    if args.measurements:
        write_measurements(out / "measurements.csv", _draw(sc, truth, s_meas))
    return EXIT_OK


def cmd_estimate(args, sc, out: Path) -> int:
    s_env, s_meas = _seeds(args.seed, 2)
    grid = _grid(sc)
    env = _environment(sc, s_env)
    truth = _truth_db(sc, s_env)
    if args.measurements:
        data = read_measurements(args.measurements)
        if data.unit is not Unit.DB:
            raise ValidationError("measurement file must be in dB")
    else:
        data = _draw(sc, truth, s_meas)
    est, converged, extra = run_estimator(sc["estimator"], data, grid, env)
    write_gridmap(out / "estimate.json", est)
    body = {"estimator": sc["estimator"]["name"], "n_measurements": len(data), "converged": converged}
    body.update(map_metrics(est, truth))
    body.update(extra)
    write_metrics(out / "estimate_metrics.json", "estimate", args.seed, body)
    return EXIT_OK if converged else EXIT_NONCONVERGED


def cmd_survey(args, sc, out: Path) -> int:
    from .surveying import run_survey, sweep_survey, write_trajectory

    s_env, s_survey = _seeds(args.seed, 2)
    cfg = sc["survey"]
    grid = _grid(sc)
    env = _environment(sc, s_env)
    truth = _truth_db(sc, s_env)
    model = _covariance(env, grid)
    budget = int(cfg["budget"])
    if budget < 1:
        raise ValidationError("survey budget must be at least 1")
    nv = float(cfg.get("noise_variance", 0.0))
    res = run_survey(truth, model, cfg.get("start", grid.points()[0]), budget,
                     float(cfg.get("travel_weight", 0.0)), nv, s_survey)
    write_trajectory(out / "trajectory.csv", res)
    body = {"budget": budget, "final_mse": float(res.mse[-1]),
            "final_total_variance": float(res.total_variance[-1]),
            "path_length": res.plan.path_length(cfg.get("start"))}
    if cfg.get("baseline", True):
        base = sweep_survey(truth, model, budget, nv, s_survey)
        write_trajectory(out / "baseline_trajectory.csv", base)
        body["baseline_final_mse"] = float(base.mse[-1])
    write_metrics(out / "survey_metrics.json", "survey", args.seed, body)
    return EXIT_OK


def _admm_problem(cfg, seed, base: Path):
    from .consensus import AgentData, ConsensusProblem, Regularizer, load_scenario as load_c

    if "file" in cfg:
        return load_c(base / cfg["file"])
    n, dim = int(cfg["n_agents"]), int(cfg["dim"])
    topo = cfg.get("topology", "ring")
    builders = {"ring": ConsensusProblem.ring, "path": ConsensusProblem.path,
                "complete": ConsensusProblem.complete}
    reg = Regularizer(**cfg.get("regularizer", {}))
    if "edges" in cfg:
        problem = ConsensusProblem(n, cfg["edges"], reg, float(cfg.get("rho", 1.0)))
    elif topo in builders:
        problem = builders[topo](n, regularizer=reg, rho=float(cfg.get("rho", 1.0)))
    else:
        raise ValidationError(f"unknown topology {topo!r}")
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal(dim)
    data = []
    for _ in range(n):
        X = rng.standard_normal((int(cfg["samples_per_agent"]), dim))
        data.append(AgentData(X, X @ theta + float(cfg.get("noise_std", 0.0)) * rng.standard_normal(X.shape[0])))
    return problem, data, float(cfg.get("tol", 1e-8)), int(cfg.get("max_rounds", 5000))


def cmd_admm(args, sc, out: Path) -> int:
    from .consensus import centralized_solution, optimality_residual, run_to_consensus

    base = Path(args.scenario).parent if args.scenario else Path(".")
    problem, data, tol, max_rounds = _admm_problem(sc["admm"], args.seed, base)
    star = centralized_solution(problem.regularizer, data)
    gap = []

    def track(k, states):
        gap.append(max(float(np.linalg.norm(s.theta - star)) for s in states))

    res = run_to_consensus(problem, data, tol, max_rounds, record_log=False, callback=track)
    with open(out / "convergence.csv", "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["round", "disagreement", "change", "distance_to_centralized"])
        for k in range(res.rounds):
            wr.writerow([k + 1, repr(res.disagreement[k]), repr(res.change[k]), repr(gap[k])])
    body = {"rounds": res.rounds, "converged": bool(res.converged),
            "distance_to_centralized": gap[-1] if gap else None,
            "optimality_residual": optimality_residual(problem.regularizer, data, res.thetas.mean(0)),
            "n_agents": problem.n_agents, "regularizer": problem.regularizer.kind}
    write_metrics(out / "admm_metrics.json", "admm", args.seed, body)
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_figures(args, sc, out: Path) -> int:
    from .figures import FIGURES, make_figure

    names = list(FIGURES) if args.name == "all" else [args.name]
    for n in names:
        if n not in FIGURES:
            raise ValidationError(f"unknown figure {n!r}; choose from all, {', '.join(FIGURES)}")
    body = {}
    for n in names:
        body[n] = make_figure(n, args.seed, out).metrics
    write_metrics(out / "figures_metrics.json", "figures", args.seed, {"figures": body})
    return EXIT_OK


def cmd_eval(args, sc, out: Path) -> int:
    try:
        est = read_gridmap(args.estimate)
        truth = read_gridmap(args.truth)
    except (FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read map: {exc}")
    write_metrics(out / "eval_metrics.json", "eval", args.seed, map_metrics(est, truth))
    return EXIT_OK


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("seed must be an integer")
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="radiomap", description="Radio map estimation experiments.")
    p.add_argument("--seed", type=_seed, default=0, help="random seed (unsigned 64-bit)")
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--scenario", default=None, help="scenario JSON file")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", help="write the ground-truth map and optional measurements")
    s.add_argument("--measurements", action="store_true", help="also draw a measurement set")
    s.set_defaults(func=cmd_simulate)
    s = sub.add_parser("estimate", help="fit an estimator and score it against the truth")
    s.add_argument("--measurements", default=None, help="measurement CSV (dB) to use instead of drawing")
    s.set_defaults(func=cmd_estimate)
    s = sub.add_parser("survey", help="uncertainty-driven survey with a sweep baseline")
    s.set_defaults(func=cmd_survey)
    s = sub.add_parser("admm", help="decentralized regression by consensus ADMM")
    s.set_defaults(func=cmd_admm)
    s = sub.add_parser("figures", help="one-dimensional toy experiments")
    s.add_argument("name", help="fig1..fig5 or all")
    s.set_defaults(func=cmd_figures)
    s = sub.add_parser("eval", help="score an estimated map against a truth map")
    s.add_argument("--truth", required=True, help="truth map JSON header")
    s.add_argument("--estimate", required=True, help="estimated map JSON header")
    s.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    out = Path(args.out)
    try:
        sc = load_scenario(args.scenario)
        out.mkdir(parents=True, exist_ok=True)
        return args.func(args, sc, out)
    except (ValidationError, ValueError, KeyError, UnitError, FileNotFoundError) as exc:
        print(f"radiomap: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
