"""Figure-reproduction presets.

Each figure is a list of named experiments plus a tabulator that turns their
results into one CSV table. ``desk`` scale is sized for a workstation;
``full`` widens the (M, s) ranges as far as the dimension limit allows.
Points within one figure share the master seed, so differences between them
are not inflated by independent sampling noise.
"""

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .ensemble import run_experiment
from .quantum_kernel import MAX_DIM

FIGURES = ("fig1", "fig2", "fig3", "figS1")
SCALES = ("desk", "full")
FIG3_RATIOS = {"desk": (0.5, 1.0, 2.0, 5.0, 20.0, 100.0),
               "full": (0.3, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0)}


@dataclass(frozen=True)
class Point:
    label: dict  # values written to the figure table
    config: ExperimentConfig


def _max_sites(s, upper):
    dim = int(round(2 * s + 1))
    return max(m for m in range(1, upper + 1) if dim**m <= MAX_DIM)


def _grid(template, spins, m_range):
    points = []
    for s in spins:
        for m in range(m_range[0], min(m_range[1], _max_sites(s, m_range[1])) + 1):
            points.append(Point({"s": s, "M": m}, template.replace(s=s, M=m)))
    return points


def figure_points(name, scale="desk", base=None, clusters=None):
    """Configurations making up figure ``name`` at ``scale``.

    ``clusters`` replaces the preset Q of every point (quick previews).
    """
    points = _figure_points(name, scale, base)
    if clusters is not None:
        points = [Point(p.label, p.config.replace(Q=clusters)) for p in points]
    return points


def _figure_points(name, scale, base):
    if name not in FIGURES:
        raise ValueError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}; choose from {', '.join(SCALES)}")
    base = base or ExperimentConfig()
    full = scale == "full"
    if name == "fig1":
        return [Point({}, base.replace(s=0.5, M=2, Q=40000, protocol="dc", model="secular"))]
    if name == "fig2":
        template = base.replace(Q=10000, protocol="dc", model="secular", tau_max=4.0)
        spins = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0) if full else (0.5, 1.0)
        return _grid(template, spins, (2, 8 if full else 6))
    if name == "figS1":
        template = base.replace(Q=10000, protocol="rf", model="secular", tau_max=6.0)
        spins = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0) if full else (0.5,)
        return _grid(template, spins, (2, 8 if full else 5))
    template = base.replace(s=0.5, M=2, Q=40000 if full else 4000, protocol="dc")
    points = [Point({"model": "full", "omega_ratio": r},
                    template.replace(model="full", omega_ratio=r))
              for r in FIG3_RATIOS[scale]]
    points.append(Point({"model": "secular", "omega_ratio": math.inf},
                        template.replace(model="secular")))
    return points


def fig1_rows(result):
    d, c = result.diagnostics, result.curve
    mean, var = np.asarray(d["mean_per_spin"]), np.asarray(d["var_per_spin"])
    header = ["tau"]
    for a in "xyz":
        header += [f"mean_s{a}_per_spin", f"rms_s{a}_per_spin"]
    header += ["er_over_hbar", "stderr"]
    rows = []
    for k, tau in enumerate(c.tau):
        row = [tau]
        for a in range(3):
            row += [mean[k, a], math.sqrt(max(var[k, a], 0.0))]
        rows.append(row + [c.er_over_hbar[k], c.stderr[k]])
    return header, rows


def summary_rows(points, results, label_keys):
    header = list(label_keys) + ["er_min", "er_min_stderr", "tau_opt", "tau_opt_stderr",
                                 "boundary_minimum", "error"]
    rows = []
    for point, res in zip(points, results):
        row = [point.label[k] for k in label_keys]
        if isinstance(res, Exception):
            rows.append(row + [math.nan] * 4 + ["", f"{type(res).__name__}: {res}"])
            continue
        c = res.curve
        rows.append(row + [c.er_min, c.er_min_stderr, c.tau_opt, c.tau_opt_stderr,
                           c.boundary, ""])
    return header, rows


def tabulate(name, points, results):
    if name == "fig1":
        return fig1_rows(results[0])
    if name == "fig3":
        return summary_rows(points, results, ("model", "omega_ratio"))
    return summary_rows(points, results, ("s", "M"))


def write_table(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x
                             for x in row])


def run_figure(name, scale="desk", base=None, out_dir=None, progress=None, clusters=None):
    """Run every point of a figure; failures are recorded per point."""
    points = figure_points(name, scale, base, clusters)
    results = []
    for i, point in enumerate(points):
        if progress is not None:
            progress(f"{name} point {i + 1}/{len(points)} {point.label}")
        try:
            results.append(run_experiment(point.config))
        except Exception as exc:  # keep the rest of the figure
            results.append(exc)
    if name == "fig1" and isinstance(results[0], Exception):
        raise results[0]
    header, rows = tabulate(name, points, results)
    if out_dir is not None:
        write_table(f"{out_dir}/{name}.csv", header, rows)
        manifest = {
            "figure": name,
            "scale": scale,
            "points": [
                {"label": p.label,
                 "result": r.to_dict() if not isinstance(r, Exception) else None,
                 "config": p.config.to_dict(),
                 "error": f"{type(r).__name__}: {r}" if isinstance(r, Exception) else None}
                for p, r in zip(points, results)
            ],
        }
        with open(f"{out_dir}/{name}.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return points, results, (header, rows)

