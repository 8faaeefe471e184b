import csv
import json
import math

import numpy as np
import pytest

from spinsense.config import ExperimentConfig
from spinsense.presets import FIG3_RATIOS, figure_points, run_figure


def test_fig1_preset():
    [p] = figure_points("fig1")
    c = p.config
    assert (c.s, c.M, c.Q, c.protocol, c.model) == (0.5, 2, 40000, "dc", "secular")
    assert c.tau_points == 60


def test_fig2_desk_grid():
    pts = figure_points("fig2", "desk")
    assert [(p.label["s"], p.label["M"]) for p in pts] == \
        [(s, m) for s in (0.5, 1.0) for m in range(2, 7)]
    assert all(p.config.Q == 10000 for p in pts)


def test_full_scale_respects_dimension_limit():
    for name in ("fig2", "figS1"):
        pts = figure_points(name, "full")
        assert max(p.config.dim for p in pts) <= 4096
        assert {p.config.s for p in pts} >= {0.5, 3.0}


def test_fig3_points():
    pts = figure_points("fig3", "desk")
    full = [p for p in pts if p.config.model == "full"]
    assert tuple(p.config.omega_ratio for p in full) == FIG3_RATIOS["desk"]
    assert pts[-1].config.model == "secular" and math.isinf(pts[-1].label["omega_ratio"])
    assert len({p.config.seed for p in pts}) == 1
    assert all(p.config.Q == 4000 for p in pts)


def test_figS1_desk():
    pts = figure_points("figS1", "desk")
    assert [p.config.M for p in pts] == [2, 3, 4, 5]
    assert all(p.config.protocol == "rf" for p in pts)


def test_unknown_names():
    with pytest.raises(ValueError):
        figure_points("fig4")
    with pytest.raises(ValueError):
        figure_points("fig1", "huge")


def test_base_and_cluster_override():
    pts = figure_points("fig2", base=ExperimentConfig(seed=9), clusters=100)
    assert all(p.config.seed == 9 and p.config.Q == 100 for p in pts)


@pytest.mark.parametrize("name", ["fig1", "fig3"])
def test_run_figure_writes_tables(tmp_path, name):
    base = ExperimentConfig(tau_points=15)
    points, results, (header, rows) = run_figure(name, base=base, out_dir=tmp_path,
                                                 clusters=100)
    with open(tmp_path / f"{name}.csv") as fh:
        table = list(csv.reader(fh))
    assert table[0] == header
    assert len(table) == 1 + len(rows)
    manifest = json.loads((tmp_path / f"{name}.json").read_text())
    assert manifest["figure"] == name
    assert [p["config"]["Q"] for p in manifest["points"]] == [100] * len(points)
    if name == "fig1":
        assert len(rows) == 15
        er = np.array([float(r[header.index("er_over_hbar")]) for r in table[1:]])
        assert np.all(np.isfinite(er))
    else:
        assert [r[0] for r in table[1:]] == ["full"] * 6 + ["secular"]
        assert table[-1][1] == "inf"
