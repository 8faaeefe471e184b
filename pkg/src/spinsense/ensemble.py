"""Parallel Monte Carlo over spin clusters.

Cluster q always draws its geometry from the counter-based stream
(seed, q), clusters are grouped into fixed chunks, and chunk accumulators are
merged in chunk order. Results are therefore bit-identical for any thread
count.
"""

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, kernels
from .config import ConfigError, ExperimentConfig
from .dynamics import periodic_states, sz_sectors
from .estimation import (
    MomentAccumulator,
    SensitivityCurve,
    central_difference,
    collective_moments,
    dc_gradient,
    find_optimum,
    jackknife_se,
    optimal_variance,
    per_cluster_covariance,
    richardson_discrepancy,
)
from .geometry import sample_clusters
from .hamiltonians import UnitSystem, rf_drive, rotating_fourier_components, secular_hamiltonians
from .quantum_kernel import SpectralPropagator, coherent_product_state

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "tau", "er_over_hbar", "stderr",
    "mean_sx_per_spin", "mean_sy_per_spin", "mean_sz_per_spin",
    "var_sx", "var_sy", "var_sz",
]
RICHARDSON_WARN = 0.01
RICHARDSON_FAIL = 0.05


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    curve: SensitivityCurve
    diagnostics: dict
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        c = self.curve
        return {
            "config": self.config.to_dict(),
            "curve": {
                "tau": c.tau.tolist(),
                "er_over_hbar": _json_floats(c.er_over_hbar),
                "stderr": _json_floats(c.stderr),
                "tau_opt": c.tau_opt,
                "tau_opt_stderr": c.tau_opt_stderr,
                "er_min": c.er_min,
                "er_min_stderr": c.er_min_stderr,
                "boundary_minimum": c.boundary,
                "monotone": c.monotone,
            },
            "diagnostics": {k: _jsonable(v) for k, v in self.diagnostics.items()},
            "provenance": self.provenance,
        }

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def csv_rows(self):
        c, d = self.curve, self.diagnostics
        mean, var = np.asarray(d["mean_per_spin"]), np.asarray(d["var_per_spin"])
        for k, tau in enumerate(c.tau):
            yield [tau, c.er_over_hbar[k], c.stderr[k], *mean[k], *var[k]]

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in self.csv_rows():
                writer.writerow([repr(float(x)) for x in row])


def _json_floats(values):
    return [float(v) if np.isfinite(v) else None for v in np.asarray(values, dtype=float)]


def _jsonable(value):
    if isinstance(value, np.ndarray):
        if value.dtype.kind == "f":
            return np.where(np.isfinite(value), value, np.nan).tolist()
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value


def initial_state(config: ExperimentConfig):
    axis = [1.0, 0.0, 0.0] if config.protocol == "dc" else [0.0, 0.0, 1.0]
    return coherent_product_state(axis, config.species, config.M)


def rf_field_points(config: ExperimentConfig):
    """Named RF amplitudes at which cluster means are evaluated."""
    b0, h = config.b_rf, config.rf_step
    points = {"+h": b0 + h, "-h": b0 - h, "+h/2": b0 + h / 2, "-h/2": b0 - h / 2}
    if config.rf_linearity_check:
        points.update({"half+h": b0 / 2 + h, "half-h": b0 / 2 - h})
    return points


def _dc_full_points(config):
    h = config.fd_rel_step * config.omega_ratio
    return {"+h": config.omega_ratio + h, "-h": config.omega_ratio - h}


def simulate_chunk(config: ExperimentConfig, start: int, stop: int) -> MomentAccumulator:
    """Moments of clusters ``start..stop-1`` accumulated into jackknife blocks."""
    species, taus = config.species, config.taus
    indices = np.arange(start, stop)
    blocks = indices * config.n_blocks // config.Q
    positions = sample_clusters(config.M, config.seed, indices, config.min_distance)
    psi0 = initial_state(config)
    acc = MomentAccumulator(config.n_blocks, taus.size)

    def moments(states):
        return collective_moments(states, species, config.M)

    if config.protocol == "dc" and config.model == "secular":
        h = secular_hamiltonians(positions, species)
        prop = SpectralPropagator(h, blocks=sz_sectors(species, config.M), check=False)
        acc.add(blocks, moments(prop.apply(psi0, taus)))
    elif config.protocol == "dc":
        comps = rotating_fourier_components(positions, species)
        max_step = config.max_step or None
        run = lambda ratio: periodic_states(  # noqa: E731
            comps, psi0, ratio, taus, config.steps_per_period, max_step,
            grid_ratio=config.omega_ratio)
        shifted = {k: moments(run(r)).mean for k, r in _dc_full_points(config).items()}
        acc.add(blocks, moments(run(config.omega_ratio)), shifted)
    else:
        h0 = secular_hamiltonians(positions, species)
        drive = rf_drive(species, config.M, 1.0)

        def evolve(b):
            return SpectralPropagator(h0 + b * drive, check=False).apply(psi0, taus)

        shifted = {k: moments(evolve(b)).mean for k, b in rf_field_points(config).items()}
        acc.add(blocks, moments(evolve(config.b_rf)), shifted)
    return acc


def chunk_bounds(config: ExperimentConfig):
    size = config.effective_chunk()
    return [(a, min(a + size, config.Q)) for a in range(0, config.Q, size)]


def accumulate(config: ExperimentConfig, progress=None) -> MomentAccumulator:
    bounds = chunk_bounds(config)
    total = MomentAccumulator(config.n_blocks, config.tau_points)

    def job(bound):
        return simulate_chunk(config, *bound)

    if config.threads == 1:
        parts = map(job, bounds)
    else:
        pool = ThreadPoolExecutor(max_workers=config.threads)
        parts = pool.map(job, bounds)
    try:
        for done, part in enumerate(parts, 1):
            total.merge(part)
            if progress is not None:
                progress(done, len(bounds))
    finally:
        if config.threads != 1:
            pool.shutdown()
    return total


def signal_gradient(config: ExperimentConfig, avg):
    """Per-cluster d<S>/db in the rotating frame, plus FD diagnostics."""
    taus = config.taus
    shifted = avg["shifted"]
    diag = {}
    if config.protocol == "dc":
        # lab-frame mean is R_z(-b tau) <S~>; differentiating the rotation
        # gives -tau z x <S~>
        g = -dc_gradient(avg["mean"], taus)
        if config.model == "full":
            h = config.fd_rel_step * config.omega_ratio
            dyn = central_difference(shifted["+h"], shifted["-h"], h)
            diag["dynamical_gradient"] = dyn
            g = g + dyn
        return g, diag
    h = config.rf_step
    g = central_difference(shifted["+h"], shifted["-h"], h)
    g_half = central_difference(shifted["+h/2"], shifted["-h/2"], h / 2)
    diag["richardson_discrepancy"] = richardson_discrepancy(g, g_half)
    if config.rf_linearity_check:
        g_lin = central_difference(shifted["half+h"], shifted["half-h"], h)
        diag["linearity_discrepancy"] = richardson_discrepancy(g, g_lin)
    return g, diag


def energy_resolution(config: ExperimentConfig, avg, units=None):
    """E_R/hbar on the tau grid from per-cluster averages."""
    units = units or UnitSystem(config.species, config.rho)
    q = avg["count"]
    gamma1 = per_cluster_covariance(avg, config.covariance)
    g, diag = signal_gradient(config, avg)
    readout = optimal_variance(q * gamma1, q * g, config.readout)
    er = units.energy_resolution_over_hbar(readout.variance, q * config.M, config.taus)
    return er, gamma1, g, readout, diag


def build_curve(config: ExperimentConfig, acc: MomentAccumulator):
    avg = acc.averages()
    er, gamma1, g, readout, diag = energy_resolution(config, avg)
    opt = find_optimum(config.taus, er)
    replicas, opts = [], []
    for b in range(acc.n_blocks):
        if acc.counts[b] == 0:
            continue
        er_b = energy_resolution(config, acc.averages(exclude=b))[0]
        replicas.append(er_b)
        try:
            opts.append(find_optimum(config.taus, er_b))
        except ValueError:
            pass
    se = jackknife_se(np.array(replicas))
    curve = SensitivityCurve(
        tau=config.taus,
        er_over_hbar=er,
        stderr=se,
        tau_opt=opt.tau_opt,
        er_min=opt.er_min,
        er_min_stderr=float(jackknife_se([o.er_min for o in opts])) if opts else np.nan,
        tau_opt_stderr=float(jackknife_se([o.tau_opt for o in opts])) if opts else np.nan,
        boundary=opt.boundary,
        monotone=opt.monotone,
    )
    psd_floor = np.linalg.eigvalsh(gamma1).min(axis=-1) / np.maximum(
        np.trace(gamma1, axis1=-2, axis2=-1), 1e-300)
    diagnostics = {
        "mean_per_spin": avg["mean"] / config.M,
        "var_per_spin": np.diagonal(gamma1, axis1=-2, axis2=-1) / config.M**2,
        "gradient": g,
        "readout_direction": readout.direction,
        "readout_rank": readout.rank,
        "min_relative_covariance_eigenvalue": psd_floor,
        **diag,
    }
    if "richardson_discrepancy" in diag:
        r = diag["richardson_discrepancy"]
        diagnostics["fd_converged"] = bool(r <= RICHARDSON_FAIL)
        if r > RICHARDSON_FAIL:
            log.error("RF finite difference not converged: step halving changes g by %.1f%%",
                      100 * r)
        elif r > RICHARDSON_WARN:
            log.warning("RF finite difference step halving changes g by %.2f%%", 100 * r)
    if opt.boundary:
        log.warning("minimum of E_R sits on the tau-grid boundary (tau = %g)", opt.tau_opt)
    return curve, diagnostics


def run_experiment(config: ExperimentConfig, progress=None) -> ExperimentResult:
    """Simulate ``config.Q`` clusters and build the energy-resolution curve."""
    config.effective_chunk()  # resource check before any work
    start = time.perf_counter()
    acc = accumulate(config, progress)
    curve, diagnostics = build_curve(config, acc)
    provenance = {
        "code_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "seed": config.seed,
        "n_clusters": int(acc.counts.sum()),
        "wall_time_s": time.perf_counter() - start,
    }
    return ExperimentResult(config, curve, diagnostics, provenance)


SWEEP_AXES = ("M", "s", "omega_ratio")


def derived_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


@dataclass
class SweepPoint:
    value: float
    config: ExperimentConfig | None
    result: ExperimentResult | None
    error: str | None = None


def sweep(template: ExperimentConfig, axis: str, values, progress=None):
    """Independent experiments along one axis, each with a derived seed."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"axis: must be one of {', '.join(SWEEP_AXES)}")
    points = []
    for i, value in enumerate(values):
        try:
            cfg = template.replace(**{axis: value, "seed": derived_seed(template.seed, i)})
            points.append(SweepPoint(value, cfg, run_experiment(cfg)))
        except Exception as exc:  # isolate per-point failures
            log.error("sweep point %s=%s failed: %s", axis, value, exc)
            points.append(SweepPoint(value, None, None, f"{type(exc).__name__}: {exc}"))
        if progress is not None:
            progress(i + 1, len(values))
    return points
