"""Time evolution of cluster states.

Static Hamiltonians are exponentiated spectrally, one factorization per
cluster for the whole tau grid. The rotating-frame Hamiltonian is periodic in
phi = omega_ratio * tau; it is integrated with exponential-midpoint steps on a
grid anchored at period boundaries, so the one-period propagator is computed
once and reused for every later period.
"""

from dataclasses import dataclass

import numpy as np

from .hamiltonians import hamiltonian_at_phase, rotating_fourier_components
from .quantum_kernel import SpectralPropagator, total_sz_diagonal

DEFAULT_STEPS_PER_PERIOD = 64
MIN_STEPS_PER_PERIOD = 4


@dataclass(frozen=True)
class Trajectory:
    taus: np.ndarray
    states: np.ndarray  # (len(taus), D)

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        if taus.ndim != 1 or (taus.size > 1 and np.any(np.diff(taus) <= 0)):
            raise ValueError("tau grid must be strictly increasing")
        if taus.size and taus[0] < 0:
            raise ValueError("tau grid must start at or after 0")
        object.__setattr__(self, "taus", taus)


def _check_grid(taus):
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if taus.size and (taus[0] < 0 or np.any(np.diff(taus) <= 0)):
        raise ValueError("tau grid must be non-negative and strictly increasing")
    return taus


def sz_sectors(species, n_sites):
    """Index sets of the total-Sz sectors of the product basis."""
    mz = np.round(2 * total_sz_diagonal(species, n_sites)).astype(int)
    return [np.flatnonzero(mz == m) for m in np.unique(mz)]


def evolve_static(h, psi0, taus, blocks=None):
    """Trajectory of psi0 under a time-independent Hermitian ``h``."""
    h = np.asarray(h)
    psi0 = np.asarray(psi0, dtype=complex)
    if h.shape != (psi0.size, psi0.size):
        raise ValueError(f"Hamiltonian shape {h.shape} does not match state size {psi0.size}")
    taus = _check_grid(taus)
    states = SpectralPropagator(h, blocks=blocks).apply(psi0, taus)
    return Trajectory(taus, states)


def _expm_hermitian(h, dt):
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * dt)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def _step_size(omega_ratio, steps_per_period, max_step):
    if steps_per_period < MIN_STEPS_PER_PERIOD:
        raise ValueError(f"need at least {MIN_STEPS_PER_PERIOD} steps per period")
    if not omega_ratio > 0:
        raise ValueError("omega_ratio must be positive")
    period = 2 * np.pi / omega_ratio
    n_steps = steps_per_period
    if max_step:
        n_steps = max(n_steps, int(np.ceil(period / max_step)))
    return period, n_steps, period / n_steps


def periodic_states(components, psi0, omega_ratio, taus,
                    steps_per_period=DEFAULT_STEPS_PER_PERIOD, max_step=None,
                    grid_ratio=None):
    """Evolve ``psi0`` under H(phi = omega_ratio * tau) for a batch of clusters.

    ``components`` are the Fourier components (B, 5, D, D) from
    ``rotating_fourier_components``. Returns states of shape (B, len(taus), D).
    The step grid is built from ``grid_ratio`` (default ``omega_ratio``); a
    different value keeps the time partition fixed while the phase rate
    changes, which is what a finite difference over omega_ratio needs.
    """
    if grid_ratio is not None and grid_ratio != omega_ratio:
        return periodic_states_stepwise(components, psi0, omega_ratio, taus,
                                        steps_per_period, max_step, grid_ratio)
    taus = _check_grid(taus)
    components = np.asarray(components)
    n_batch, dim = components.shape[0], components.shape[-1]
    period, n_steps, dt = _step_size(omega_ratio, steps_per_period, max_step)

    n_per = np.floor(taus / period + 1e-12).astype(int)
    rem = np.maximum(taus - n_per * period, 0.0)
    n_full = np.minimum(np.floor(rem / dt + 1e-9).astype(int), n_steps)
    frac = rem - n_full * dt
    frac[frac < 1e-12 * dt] = 0.0

    needed = set(n_full.tolist())
    last = n_steps if n_per.max(initial=0) >= 1 else max(needed, default=0)
    needed.add(last)
    prefix = {}
    w = np.broadcast_to(np.eye(dim, dtype=complex), (n_batch, dim, dim)).copy()
    for m in range(last + 1):
        if m in needed:
            prefix[m] = w.copy()
        if m == last:
            break
        h = hamiltonian_at_phase(components, omega_ratio * (m + 0.5) * dt)
        w = _expm_hermitian(h, dt) @ w

    psi = np.broadcast_to(np.asarray(psi0, dtype=complex), (n_batch, dim)).copy()
    by_period = {}
    wanted = set(n_per.tolist())
    for n in range(n_per.max(initial=0) + 1):
        if n in wanted:
            by_period[n] = psi
        psi = np.einsum("bij,bj->bi", prefix[n_steps], psi) if n_steps in prefix else psi

    out = np.empty((n_batch, taus.size, dim), dtype=complex)
    for k in range(taus.size):
        state = np.einsum("bij,bj->bi", prefix[n_full[k]], by_period[n_per[k]])
        if frac[k] > 0:
            phi = omega_ratio * (n_full[k] * dt + 0.5 * frac[k])
            u = _expm_hermitian(hamiltonian_at_phase(components, phi), frac[k])
            state = np.einsum("bij,bj->bi", u, state)
        out[:, k] = state
    return out


def periodic_states_stepwise(components, psi0, omega_ratio, taus,
                             steps_per_period=DEFAULT_STEPS_PER_PERIOD, max_step=None,
                             grid_ratio=None):
    """Reference for ``periodic_states``: plain stepping, no period reuse.

    Full midpoint steps sit on the fixed grid m * dt; each requested time adds
    one fractional step from the last grid edge, as in ``periodic_states``.
    """
    taus = _check_grid(taus)
    components = np.asarray(components)
    n_batch, dim = components.shape[0], components.shape[-1]
    _, _, dt = _step_size(grid_ratio or omega_ratio, steps_per_period, max_step)
    psi = np.broadcast_to(np.asarray(psi0, dtype=complex), (n_batch, dim)).copy()
    out = np.empty((n_batch, taus.size, dim), dtype=complex)
    m = 0
    for k, tau in enumerate(taus):
        while (m + 1) * dt <= tau + 1e-9 * dt:
            h = hamiltonian_at_phase(components, omega_ratio * (m + 0.5) * dt)
            psi = np.einsum("bij,bj->bi", _expm_hermitian(h, dt), psi)
            m += 1
        frac = tau - m * dt
        state = psi
        if frac > 1e-12 * dt:
            h = hamiltonian_at_phase(components, omega_ratio * (m * dt + 0.5 * frac))
            state = np.einsum("bij,bj->bi", _expm_hermitian(h, frac), psi)
        out[:, k] = state
    return out


def evolve_periodic(cluster, species, omega_ratio, taus, psi0,
                    steps_per_period=DEFAULT_STEPS_PER_PERIOD, max_step=None):
    """Trajectory of one cluster under the full rotating-frame Hamiltonian."""
    components = rotating_fourier_components(cluster.positions[None], species)
    states = periodic_states(components, psi0, omega_ratio, taus, steps_per_period, max_step)
    return Trajectory(_check_grid(taus), states[0])
