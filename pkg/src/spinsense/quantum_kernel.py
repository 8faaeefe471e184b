"""Dense linear algebra on small spin-cluster Hilbert spaces.

Conventions: hbar = 1, the local basis is ordered m = s, s-1, ..., -s, and
site 0 is the most significant digit of the product-basis index.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, reduce

import numpy as np

MAX_DIM = 4096
HERMITIAN_RTOL = 1e-12


class DimensionError(ValueError):
    """Requested Hilbert space exceeds the dense-storage ceiling."""


@dataclass(frozen=True)
class SpinSpecies:
    """Spin quantum number ``s`` and gyromagnetic ratio ``gamma`` (rad/s/T)."""

    s: float
    gamma: float = 1.760859e11

    def __post_init__(self):
        twice = 2 * float(self.s)
        if twice < 1 or abs(twice - round(twice)) > 1e-9:
            raise ValueError(f"spin must be a positive half-integer, got {self.s}")
        object.__setattr__(self, "s", round(twice) / 2)

    @classmethod
    def parse(cls, text, gamma=None):
        """Build from a string such as ``"1/2"`` or ``"1.5"``."""
        s = float(Fraction(str(text).strip()))
        return cls(s) if gamma is None else cls(s, gamma)

    @property
    def twice_s(self) -> int:
        return int(round(2 * self.s))

    @property
    def dim(self) -> int:
        return self.twice_s + 1


def cluster_dim(species: SpinSpecies, n_sites: int) -> int:
    dim = species.dim**n_sites
    if dim > MAX_DIM:
        raise DimensionError(
            f"(2s+1)^M = {species.dim}^{n_sites} = {dim} exceeds the dense limit {MAX_DIM}"
        )
    return dim


@lru_cache(maxsize=32)
def _spin_matrices(twice_s):
    s = twice_s / 2
    m = s - np.arange(twice_s + 1)
    raise_ = np.diag(np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1)), 1).astype(complex)
    sx = (raise_ + raise_.T) / 2
    sy = (raise_ - raise_.T) / 2j
    sz = np.diag(m).astype(complex)
    for op in (sx, sy, sz):
        op.setflags(write=False)
    return sx, sy, sz


def spin_operators(species: SpinSpecies):
    """Return ``(Sx, Sy, Sz)`` as (2s+1) x (2s+1) complex arrays."""
    return _spin_matrices(species.twice_s)


def embed_operator(op, site: int, n_sites: int):
    """Place a single-site operator on ``site`` (0-based) of an M-site cluster."""
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError("operator must be square")
    if not 0 <= site < n_sites:
        raise IndexError(f"site {site} out of range for {n_sites} sites")
    eye = np.eye(op.shape[0])
    return reduce(np.kron, [op if k == site else eye for k in range(n_sites)])


def collective_operators(species: SpinSpecies, n_sites: int):
    """Dense total-spin operators (Sx, Sy, Sz) on the cluster space."""
    cluster_dim(species, n_sites)
    return tuple(
        sum(embed_operator(op, i, n_sites) for i in range(n_sites))
        for op in spin_operators(species)
    )


def total_sz_diagonal(species: SpinSpecies, n_sites: int):
    """Diagonal of the total Sz operator in the product basis."""
    m = species.s - np.arange(species.dim)
    return reduce(np.add.outer, [m] * n_sites).reshape(-1)


def check_hermitian(h, rtol=HERMITIAN_RTOL):
    h = np.asarray(h)
    scale = max(np.linalg.norm(h, axis=(-2, -1)).max(initial=0.0), 1.0)
    err = np.linalg.norm(h - np.conj(np.swapaxes(h, -1, -2)), axis=(-2, -1)).max(initial=0.0)
    if err > rtol * scale:
        raise ValueError(f"operator is not Hermitian (relative defect {err / scale:.2e})")


class SpectralPropagator:
    """exp(-i H tau) from one eigendecomposition of a Hermitian H.

    ``H`` may carry leading batch axes. If ``blocks`` is given (a list of index
    arrays partitioning the basis, e.g. total-Sz sectors of an Sz-conserving
    Hamiltonian), each block is diagonalized separately.
    """

    def __init__(self, h, blocks=None, check=True):
        h = np.asarray(h)
        if check:
            check_hermitian(h)
        self.dim = h.shape[-1]
        self.batch_shape = h.shape[:-2]
        if blocks is None:
            blocks = [np.arange(self.dim)]
        self.blocks = [np.asarray(b) for b in blocks]
        self.factors = []
        for idx in self.blocks:
            sub = h[..., idx[:, None], idx[None, :]]
            w, v = np.linalg.eigh(sub)
            self.factors.append((w, v))

    def matrix(self, tau):
        out = np.zeros(self.batch_shape + (self.dim, self.dim), dtype=complex)
        for idx, (w, v) in zip(self.blocks, self.factors):
            phase = np.exp(-1j * w * tau)
            out[..., idx[:, None], idx[None, :]] = (v * phase[..., None, :]) @ np.conj(
                np.swapaxes(v, -1, -2)
            )
        return out

    def apply(self, psi, taus):
        """Evolve ``psi`` (shape (..., D) or (D,)) to every time in ``taus``.

        Returns an array of shape batch + (len(taus), D).
        """
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        psi = np.broadcast_to(np.asarray(psi, dtype=complex), self.batch_shape + (self.dim,))
        out = np.empty(self.batch_shape + (taus.size, self.dim), dtype=complex)
        for idx, (w, v) in zip(self.blocks, self.factors):
            coeff = np.einsum("...ji,...j->...i", np.conj(v), psi[..., idx])
            phase = np.exp(-1j * w[..., :, None] * taus)
            out[..., idx] = np.swapaxes(v @ (phase * coeff[..., :, None]), -1, -2)
        return out


def hermitian_propagator(h, tau):
    """U = exp(-i H tau) for Hermitian ``h``."""
    return SpectralPropagator(h).matrix(tau)


def coherent_product_state(axis, species: SpinSpecies, n_sites: int):
    """Product of single-site spin-coherent states pointing along ``axis``."""
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0:
        raise ValueError("axis must be nonzero")
    cluster_dim(species, n_sites)
    x, y, z = axis / norm
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    phi = np.arctan2(y, x)
    sx, sy, sz = spin_operators(species)
    # rotate |m = s> by R_z(phi) R_y(theta)
    rot = hermitian_propagator(sz, phi) @ hermitian_propagator(sy, theta)
    local = rot[:, 0]
    return reduce(np.kron, [local] * n_sites)
