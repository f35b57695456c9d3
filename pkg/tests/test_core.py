import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radiomap.core import (
    Grid,
    GridMap,
    Measurement,
    MeasurementSet,
    Region,
    Unit,
    UnitError,
    as_locations,
    db_to_linear,
    distances,
    linear_to_db,
    nearest_grid_indices,
    read_gridmap,
    read_measurements,
    write_gridmap,
    write_measurements,
)

finite = st.floats(-100, 100, allow_nan=False)


@given(st.lists(finite, min_size=1, max_size=20))
def test_db_roundtrip(vals):
    v = np.array(vals)
    assert np.allclose(linear_to_db(db_to_linear(v)), v, atol=1e-9)


def test_linear_to_db_rejects_nonpositive():
    with pytest.raises(ValueError):
        linear_to_db(np.array([1.0, 0.0]))


def test_grid_points_are_cell_centres_row_major():
    g = Grid.from_bounds([0, 0], [4, 2], [4, 2])
    P = g.points()
    assert P.shape == (8, 2)
    assert np.allclose(P[0], [0.5, 0.5])
    assert np.allclose(P[1], [0.5, 1.5])
    assert np.allclose(P[2], [1.5, 0.5])
    assert g.cell_diagonal == pytest.approx(np.sqrt(2))


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid.from_bounds([0, 0], [1, 1], [3])
    with pytest.raises(ValueError):
        Grid.from_bounds([0], [1], [0])
    with pytest.raises(ValueError):
        Region((1.0,), (0.0,))


@settings(max_examples=50)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 1000))
def test_nearest_grid_index_of_grid_points_is_identity(nx, ny, seed):
    g = Grid.from_bounds([0, 0], [3, 5], [nx, ny])
    P = g.points()
    assert np.array_equal(nearest_grid_indices(g, P), np.arange(g.n_points))
    rng = np.random.default_rng(seed)
    X = rng.uniform([0, 0], [3, 5], (10, 2))
    idx = nearest_grid_indices(g, X)
    d = distances(X, P)
    assert np.allclose(d[np.arange(10), idx], d.min(axis=1))


def test_nearest_ties_resolve_to_lower_index():
    g = Grid.from_bounds([0.0], [2.0], [2])
    assert nearest_grid_indices(g, np.array([[1.0]]))[0] == 0


@given(st.integers(1, 8), st.integers(1, 8), st.integers(1, 3), st.integers(0, 99))
def test_distances_match_direct(n, m, d, seed):
    rng = np.random.default_rng(seed)
    X, Y = rng.normal(size=(n, d)), rng.normal(size=(m, d))
    D = distances(X, Y)
    ref = np.sqrt(((X[:, None] - Y[None]) ** 2).sum(-1))
    assert np.allclose(D, ref, atol=1e-12)
    assert np.all(D >= 0)


def test_as_locations_shapes():
    assert as_locations([1.0, 2.0, 3.0]).shape == (3, 1)
    assert as_locations([[1.0, 2.0]]).shape == (1, 2)
    with pytest.raises(ValueError):
        as_locations(np.zeros((2, 4)))


def test_gridmap_units_and_addition():
    g = Grid.from_bounds([0], [1], [3])
    a = GridMap(g, [1.0, 2.0, 3.0], Unit.WATT)
    b = GridMap(g, [0.0, 0.0, 0.0], Unit.DB)
    with pytest.raises(UnitError):
        a + b
    assert np.allclose((a + a).values, [2, 4, 6])
    assert np.allclose(a.to_db().to_linear().values, a.values)
    with pytest.raises(ValueError):
        GridMap(g, [1.0], Unit.WATT)
    with pytest.raises(ValueError):
        a.values[0] = 5.0


def test_measurement_set_validation_and_immutability():
    ms = MeasurementSet([[0.0, 0.0], [1.0, 1.0]], [1.0, 2.0], Unit.WATT, 0.1)
    assert len(ms) == 2 and ms.dim == 2
    with pytest.raises(ValueError):
        ms.values[0] = 3.0
    with pytest.raises(ValueError):
        MeasurementSet([[0.0, 0.0]], [1.0, 2.0])
    with pytest.raises(ValueError):
        MeasurementSet([[0.0]], [np.nan])
    with pytest.raises(ValueError):
        MeasurementSet([[0.0]], [1.0], noise_variance=-1)
    with pytest.raises(UnitError):
        ms.require_unit(Unit.DB)
    empty = MeasurementSet(np.zeros((0, 2)), [], Unit.DB)
    assert len(empty) == 0 and empty.dim == 2


def test_measurement_set_from_items_and_iteration():
    items = [Measurement(np.array([0.0, 1.0]), 2.0, np.array([1.0, 1.0]), 3, 4),
             Measurement(np.array([2.0, 1.0]), 5.0, np.array([0.0, 0.0]), 1, 0)]
    ms = MeasurementSet.from_measurements(items, Unit.DB)
    assert ms.is_link_data
    back = list(ms)
    assert back[1].frequency_index == 1 and back[0].time_index == 4
    with pytest.raises(ValueError):
        MeasurementSet.from_measurements([items[0], Measurement(np.array([0.0, 0.0]), 1.0)])
    sub = ms.subset([1])
    assert len(sub) == 1 and sub.values[0] == 5.0


def test_measurement_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    ms = MeasurementSet(rng.uniform(0, 5, (6, 2)), rng.normal(size=6), Unit.DB, 0.25,
                        second_locations=rng.uniform(0, 5, (6, 2)), time_index=np.arange(6))
    p = tmp_path / "m.csv"
    write_measurements(p, ms)
    back = read_measurements(p)
    assert back.unit is Unit.DB and back.noise_variance == 0.25
    assert np.array_equal(back.locations, ms.locations)
    assert np.array_equal(back.second_locations, ms.second_locations)
    assert np.array_equal(back.values, ms.values)
    assert np.array_equal(back.time_index, ms.time_index)
    assert p.read_text().splitlines()[0] == "x,y,z,x2,y2,z2,value,freq,time"


def test_gridmap_roundtrip(tmp_path):
    g = Grid.from_bounds([0, 0], [3, 2], [3, 2])
    gm = GridMap(g, np.arange(6.0) / 7, Unit.DB)
    write_gridmap(tmp_path / "map.json", gm)
    back = read_gridmap(tmp_path / "map.json")
    assert back.grid == g and back.unit is Unit.DB
    assert np.array_equal(back.values, gm.values)
