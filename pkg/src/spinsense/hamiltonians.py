"""Dimensionless dipolar Hamiltonians for a spin cluster.

Energies are in units of hbar * omega_dd with omega_dd = s^2 gamma^2 hbar mu0 rho
and lengths in units of rho^(-1/3). Each unordered pair carries the physical
dipolar energy mu0 gamma^2 hbar^2 / (4 pi r^3) [...], which in these units is

    (1 / (4 pi s^2 u^3)) [s_i . s_j - 3 (s_i . r)(s_j . r)].

The rotating frame turns with the Larmor precession: r -> R_z(phi) r with
phi = omega_L t. Averaging over phi gives the secular Hamiltonian

    (1 / (4 pi s^2 u^3)) ((1 - 3 r_z^2) / 2) (3 s_iz s_jz - s_i . s_j).
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import constants

from . import kernels
from .geometry import ClusterGeometry
from .quantum_kernel import SpinSpecies, cluster_dim, embed_operator, spin_operators

PAIR_PREFACTOR = 1.0 / (4.0 * np.pi)
N_FOURIER = 5  # the rotating coupling is a trig polynomial of degree 2 in phi


class Protocol(str, Enum):
    DC = "dc"
    RF = "rf"


class Model(str, Enum):
    SECULAR = "secular"
    FULL = "full"


@dataclass(frozen=True)
class UnitSystem:
    """SI boundary. ``omega_dd`` is s^2 gamma^2 hbar mu0 rho in rad/s."""

    species: SpinSpecies
    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("number density must be positive")

    @property
    def gamma(self):
        return abs(self.species.gamma)

    @property
    def omega_dd(self):
        s = self.species.s
        return s * s * self.gamma**2 * constants.hbar * constants.mu_0 * self.rho

    def time_to_si(self, tau):
        return np.asarray(tau) / self.omega_dd

    def time_from_si(self, t):
        return np.asarray(t) * self.omega_dd

    def field_to_si(self, b):
        return np.asarray(b) * self.omega_dd / self.gamma

    def field_from_si(self, field):
        return np.asarray(field) * self.gamma / self.omega_dd

    def length_to_si(self, u):
        return np.asarray(u) * self.rho ** (-1.0 / 3.0)

    def energy_resolution_over_hbar(self, var_b, n_spins, tau):
        """E_R / hbar = <dB^2> V T / (2 mu0 hbar) evaluated in SI."""
        var_field = np.asarray(var_b) * (self.omega_dd / self.gamma) ** 2
        volume = n_spins / self.rho
        duration = self.time_to_si(tau)
        return var_field * volume * duration / (2 * constants.mu_0 * constants.hbar)


def energy_resolution_closed_form(var_b, n_spins, tau, s):
    """Same quantity with rho, gamma and mu0 eliminated: s^2 N tau <db^2> / 2."""
    return 0.5 * s * s * n_spins * np.asarray(tau) * np.asarray(var_b)


@dataclass(frozen=True)
class ProtocolParams:
    protocol: Protocol = Protocol.DC
    model: Model = Model.SECULAR
    omega_ratio: float = 100.0
    b_rf: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        object.__setattr__(self, "model", Model(self.model))
        if self.protocol is Protocol.RF and not self.b_rf >= 0:
            raise ValueError("b_rf must be non-negative")
        if self.model is Model.FULL and not self.omega_ratio > 0:
            raise ValueError("the full model needs omega_ratio > 0")
        if self.protocol is Protocol.RF and self.model is Model.FULL:
            raise ValueError("the RF protocol is defined on the secular Hamiltonian only")


def _pair_geometry(positions):
    positions = np.asarray(positions, dtype=float)
    n_sites = positions.shape[-2]
    i, j = np.triu_indices(n_sites, k=1)
    r = positions[..., i, :] - positions[..., j, :]
    u = np.linalg.norm(r, axis=-1)
    if np.any(u <= 0):
        raise ValueError("coincident spin positions")
    return np.stack([i, j], axis=1), r / u[..., None], u


def _rotate_z(vectors, phi):
    c, s = np.cos(phi), np.sin(phi)
    x, y, z = vectors[..., 0], vectors[..., 1], vectors[..., 2]
    return np.stack([c * x - s * y, s * x + c * y, z], axis=-1)


def rotating_couplings(positions, species: SpinSpecies, phi=0.0):
    """Cartesian pair couplings J[..., p, a, b] of the rotating-frame Hamiltonian."""
    pairs, rhat, u = _pair_geometry(positions)
    rt = _rotate_z(rhat, phi)
    strength = PAIR_PREFACTOR / (species.s**2 * u**3)
    j = np.eye(3) - 3.0 * rt[..., :, None] * rt[..., None, :]
    return pairs, strength[..., None, None] * j


def secular_couplings(positions, species: SpinSpecies):
    pairs, rhat, u = _pair_geometry(positions)
    strength = PAIR_PREFACTOR / (species.s**2 * u**3) * (1.0 - 3.0 * rhat[..., 2] ** 2) / 2.0
    tensor = np.diag([-1.0, -1.0, 2.0])  # 3 zz - (xx + yy + zz)
    return pairs, strength[..., None, None] * tensor


def _assemble(pairs, couplings, species, n_sites):
    cluster_dim(species, n_sites)
    batch_shape = couplings.shape[:-3]
    flat = couplings.reshape((-1,) + couplings.shape[-3:])
    h = kernels.pair_hamiltonian(flat, pairs, species.twice_s, n_sites)
    return h.reshape(batch_shape + h.shape[-2:])


def _zero(species, n_sites, dtype):
    dim = cluster_dim(species, n_sites)
    return np.zeros((dim, dim), dtype=dtype)


def rotating_dd_hamiltonian(cluster: ClusterGeometry, species: SpinSpecies, phi=0.0):
    """Rotating-frame dipolar Hamiltonian at Larmor phase ``phi``."""
    if cluster.n_sites < 2:
        return _zero(species, cluster.n_sites, complex)
    pairs, j = rotating_couplings(cluster.positions, species, phi)
    return _assemble(pairs, j, species, cluster.n_sites)


def secular_dd_hamiltonian(cluster: ClusterGeometry, species: SpinSpecies):
    """Larmor-cycle-averaged dipolar Hamiltonian (real symmetric)."""
    if cluster.n_sites < 2:
        return _zero(species, cluster.n_sites, float)
    return secular_hamiltonians(cluster.positions[None], species)[0]


def secular_hamiltonians(positions, species: SpinSpecies):
    """Batched secular Hamiltonians for positions of shape (B, M, 3)."""
    positions = np.asarray(positions, dtype=float)
    n_sites = positions.shape[-2]
    if n_sites < 2:
        return np.zeros(positions.shape[:-2] + (species.dim,) * 2)
    pairs, j = secular_couplings(positions, species)
    h = _assemble(pairs, j, species, n_sites)
    return np.ascontiguousarray(h.real)


def rotating_fourier_components(positions, species: SpinSpecies):
    """Fourier components of the rotating-frame Hamiltonian.

    Returns an array of shape (..., 5, D, D) holding (A0, A1c, A1s, A2c, A2s) with
    H(phi) = A0 + A1c cos(phi) + A1s sin(phi) + A2c cos(2 phi) + A2s sin(2 phi).
    """
    positions = np.asarray(positions, dtype=float)
    n_sites = positions.shape[-2]
    phis = 2 * np.pi * np.arange(N_FOURIER) / N_FOURIER
    samples = []
    for phi in phis:
        pairs, j = rotating_couplings(positions, species, phi)
        samples.append(j)
    samples = np.stack(samples, axis=-4)  # (..., 5, P, 3, 3)
    basis = np.stack(
        [np.ones_like(phis), np.cos(phis), np.sin(phis), np.cos(2 * phis), np.sin(2 * phis)]
    )
    # exact inversion: 5 samples of a degree-2 trig polynomial
    coeffs = np.einsum("kn,...npab->...kpab", np.linalg.inv(basis.T), samples)
    h = _assemble(pairs, coeffs, species, n_sites)
    return h


def fourier_weights(phi):
    phi = np.asarray(phi, dtype=float)
    return np.stack(
        [np.ones_like(phi), np.cos(phi), np.sin(phi), np.cos(2 * phi), np.sin(2 * phi)], axis=-1
    )


def hamiltonian_at_phase(components, phi):
    """Evaluate H(phi) from ``rotating_fourier_components`` output."""
    return np.einsum("k,...kij->...ij", fourier_weights(phi), components)


def rf_drive(species: SpinSpecies, n_sites: int, b_rf: float):
    """Static rotating-frame RF term -b_rf sum_i s_i,x (co-rotating amplitude b_rf)."""
    if not np.isfinite(b_rf):
        raise ValueError("b_rf must be finite")
    cluster_dim(species, n_sites)
    sx = spin_operators(species)[0].real
    return -b_rf * sum(embed_operator(sx, i, n_sites) for i in range(n_sites))
