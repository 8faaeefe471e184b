"""Pure-numpy implementations of the hot kernels.

Both kernels work directly in the product basis |n_1 ... n_M>, where digit
n_i = 0 is the m = +s state of site i. They only need the ladder action of
s+, s- and sz on one site, so no d^M x d^M operator is ever materialized.
The compiled module ``_kernels`` exposes the same functions with the same
signatures; ``spinsense.kernels`` picks one at import time.
"""

from functools import lru_cache

import numpy as np

# s^a = sum_mu LADDER[a, mu] s^mu with mu in (+, -, z)
LADDER = np.array(
    [
        [0.5, 0.5, 0.0],
        [-0.5j, 0.5j, 0.0],
        [0.0, 0.0, 1.0],
    ]
)


def cartesian_to_ladder(couplings):
    """Rewrite sum_ab J_ab s_i^a s_j^b as sum_{mu,nu} K_{mu nu} s_i^mu s_j^nu."""
    return np.einsum("am,...ab,bn->...mn", LADDER, couplings, LADDER)


@lru_cache(maxsize=64)
def site_tables(twice_s, n_sites):
    """Per-site ladder tables for the product basis.

    Returns ``(mz, ops)`` where ``mz`` has shape (D, M) with the local m values
    and ``ops[i][mu] = (valid, target, amp)`` describes s_i^mu acting on every
    basis index (mu = 0: raise, 1: lower, 2: z).
    """
    d = twice_s + 1
    s = twice_s / 2.0
    dim = d**n_sites
    index = np.arange(dim)
    ops = []
    mz = np.empty((dim, n_sites))
    for i in range(n_sites):
        stride = d ** (n_sites - 1 - i)
        digit = (index // stride) % d
        m = s - digit
        mz[:, i] = m
        raise_ok = digit > 0
        lower_ok = digit < d - 1
        raise_amp = np.sqrt(np.maximum(s * (s + 1) - m * (m + 1), 0.0))
        lower_amp = np.sqrt(np.maximum(s * (s + 1) - m * (m - 1), 0.0))
        ops.append(
            (
                (raise_ok, index - stride, raise_amp),
                (lower_ok, index + stride, lower_amp),
                (np.ones(dim, dtype=bool), index, m),
            )
        )
    return mz, ops


def pair_hamiltonian(couplings, pairs, twice_s, n_sites):
    """Assemble H = sum_p sum_ab J[p, a, b] s_{i_p}^a s_{j_p}^b for a batch.

    ``couplings`` has shape (B, P, 3, 3) (real), ``pairs`` shape (P, 2) with
    distinct site indices. Returns a complex array of shape (B, D, D).
    """
    couplings = np.asarray(couplings, dtype=float)
    pairs = np.asarray(pairs, dtype=np.intp)
    n_batch = couplings.shape[0]
    dim = (twice_s + 1) ** n_sites
    ladder = cartesian_to_ladder(couplings)
    _, ops = site_tables(twice_s, n_sites)
    h = np.zeros((n_batch, dim, dim), dtype=complex)
    for p, (i, j) in enumerate(pairs):
        for mu in range(3):
            ok_i, shift_i, amp_i = ops[i][mu]
            for nu in range(3):
                k = ladder[:, p, mu, nu]
                if not np.any(k):
                    continue
                ok_j, shift_j, amp_j = ops[j][nu]
                src = np.flatnonzero(ok_i & ok_j)
                # the two site shifts are independent offsets on the flat index
                tgt = shift_i[src] + shift_j[src] - src
                amp = amp_i[src] * amp_j[src]
                h[:, tgt, src] += k[:, None] * amp[None, :]
    return h


def collective_moments(states, twice_s, n_sites):
    """Means and symmetrized second moments of the collective spin.

    ``states`` has shape (n, D). Returns ``mean`` (n, 3) and ``second``
    (n, 3, 3) with second[a, b] = <(S_a S_b + S_b S_a) / 2>.
    """
    psi = np.asarray(states, dtype=complex)
    mz, ops = site_tables(twice_s, n_sites)
    mz_tot = mz.sum(axis=1)
    up = np.zeros_like(psi)
    down = np.zeros_like(psi)
    for i in range(n_sites):
        ok, tgt, amp = ops[i][0]
        src = np.flatnonzero(ok)
        up[:, tgt[src]] += amp[src] * psi[:, src]
        down[:, src] += amp[src] * psi[:, tgt[src]]
    zpsi = mz_tot * psi
    prob = np.abs(psi) ** 2

    plus = np.einsum("nk,nk->n", psi.conj(), up)
    pp = np.einsum("nk,nk->n", down.conj(), up)
    nu = np.einsum("nk,nk->n", up.conj(), up).real
    nd = np.einsum("nk,nk->n", down.conj(), down).real
    z_up = np.einsum("nk,nk->n", zpsi.conj(), up)
    z_down = np.einsum("nk,nk->n", zpsi.conj(), down)

    mean = np.stack([plus.real, plus.imag, prob @ mz_tot], axis=-1)
    second = np.empty(psi.shape[:1] + (3, 3))
    second[:, 0, 0] = 0.25 * (nu + nd + 2 * pp.real)
    second[:, 1, 1] = 0.25 * (nu + nd - 2 * pp.real)
    second[:, 2, 2] = prob @ mz_tot**2
    second[:, 0, 1] = second[:, 1, 0] = 0.5 * pp.imag
    second[:, 0, 2] = second[:, 2, 0] = 0.5 * (z_up + z_down).real
    second[:, 1, 2] = second[:, 2, 1] = 0.5 * (z_up - z_down).imag
    return mean, second
