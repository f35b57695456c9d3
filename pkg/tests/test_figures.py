import csv
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from radiomap.figures import FIGURES, LineScenario, make_figure
from radiomap.svg import Series, line_plot


def test_measurements_nested():
    sc = LineScenario()
    a, b = sc.measurements(4), sc.measurements(4, 30)
    assert np.array_equal(a.locations, b.locations[:15]) and np.array_equal(a.values, b.values[:15])


@pytest.mark.parametrize("name", list(FIGURES))
def test_figure_outputs(name, tmp_path):
    fig = make_figure(name, 3, tmp_path)
    again = make_figure(name, 3, tmp_path / "again")
    for ext in ("csv", "svg"):
        assert (tmp_path / f"{name}.{ext}").read_bytes() == (tmp_path / "again" / f"{name}.{ext}").read_bytes()
    ET.parse(tmp_path / f"{name}.svg")
    with open(tmp_path / f"{name}.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["x", "truth", "estimate", "measurement"]
    xs = [float(r["x"]) for r in rows]
    assert xs == sorted(xs)
    n_meas = sum(r["measurement"] != "" for r in rows)
    assert n_meas == len(fig.measurements)
    assert fig.metrics == again.metrics


def test_fig3_is_exact_and_unknown_rejected():
    assert make_figure("fig3", 0).test_mse == 0.0
    with pytest.raises(ValueError):
        make_figure("fig6")


def test_line_plot_escapes_and_parses():
    doc = line_plot([Series("a<b & c", np.arange(5.0), np.arange(5.0) ** 2),
                     Series("pts", np.arange(3.0), np.ones(3), markers=True)], title="t & u")
    root = ET.fromstring(doc)
    texts = [e.text for e in root.iter("{http://www.w3.org/2000/svg}text")]
    assert "a<b & c" in texts and "t & u" in texts
    assert len(list(root.iter("{http://www.w3.org/2000/svg}circle"))) == 3
    assert line_plot([Series("c", np.zeros(2), np.ones(2))]) == line_plot([Series("c", np.zeros(2), np.ones(2))])
