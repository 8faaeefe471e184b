# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same signatures as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

cdef enum:
    MAX_SITES = 16


cdef inline void _ladder(int mu, int digit, int d, double s,
                         int *new_digit, double *amp) noexcept nogil:
    cdef double m = s - digit
    if mu == 0:
        if digit == 0:
            amp[0] = 0.0
            return
        new_digit[0] = digit - 1
        amp[0] = sqrt(s * (s + 1) - m * (m + 1))
    elif mu == 1:
        if digit == d - 1:
            amp[0] = 0.0
            return
        new_digit[0] = digit + 1
        amp[0] = sqrt(s * (s + 1) - m * (m - 1))
    else:
        new_digit[0] = digit
        amp[0] = m


def pair_hamiltonian(couplings, pairs, int twice_s, int n_sites):
    if n_sites > MAX_SITES:
        raise ValueError("too many sites for the compiled kernel")
    cdef double complex[:, :, :, ::1] K = np.ascontiguousarray(
        _to_ladder(np.asarray(couplings, dtype=np.float64)))
    cdef long[:, ::1] pr = np.ascontiguousarray(pairs, dtype=np.int64)
    cdef int d = twice_s + 1
    cdef double s = twice_s / 2.0
    cdef Py_ssize_t n_batch = K.shape[0], n_pairs = K.shape[1]
    cdef Py_ssize_t dim = d ** n_sites
    out = np.zeros((n_batch, dim, dim), dtype=np.complex128)
    cdef double complex[:, :, ::1] h = out
    cdef long strides[MAX_SITES]
    cdef Py_ssize_t b, k, p, tgt
    cdef int i, j, mu, nu, di, dj, ni, nj
    cdef double ai, aj
    for i in range(n_sites):
        strides[i] = d ** (n_sites - 1 - i)
    with nogil:
        for b in range(n_batch):
            for k in range(dim):
                for p in range(n_pairs):
                    i = pr[p, 0]
                    j = pr[p, 1]
                    di = (k // strides[i]) % d
                    dj = (k // strides[j]) % d
                    for mu in range(3):
                        _ladder(mu, di, d, s, &ni, &ai)
                        if ai == 0.0:
                            continue
                        for nu in range(3):
                            _ladder(nu, dj, d, s, &nj, &aj)
                            if aj == 0.0:
                                continue
                            tgt = k + (ni - di) * strides[i] + (nj - dj) * strides[j]
                            h[b, tgt, k] = h[b, tgt, k] + K[b, p, mu, nu] * (ai * aj)
    return out


def _to_ladder(couplings):
    from ._kernels_py import cartesian_to_ladder
    return cartesian_to_ladder(couplings)


def collective_moments(states, int twice_s, int n_sites):
    cdef double complex[:, ::1] psi = np.ascontiguousarray(states, dtype=np.complex128)
    cdef int d = twice_s + 1
    cdef double s = twice_s / 2.0
    cdef Py_ssize_t n = psi.shape[0], dim = psi.shape[1]
    mean_arr = np.empty((n, 3))
    second_arr = np.empty((n, 3, 3))
    cdef double[:, ::1] mean = mean_arr
    cdef double[:, :, ::1] second = second_arr
    up_arr = np.empty(dim, dtype=np.complex128)
    down_arr = np.empty(dim, dtype=np.complex128)
    cdef double complex[::1] up = up_arr
    cdef double complex[::1] down = down_arr
    cdef long strides[MAX_SITES]
    cdef Py_ssize_t r, k, i
    cdef int digit
    cdef double m, amp, mz, prob, nu_, nd_, sz, szz
    cdef double complex c, plus, pp, z_up, z_down
    if n_sites > MAX_SITES:
        raise ValueError("too many sites for the compiled kernel")
    for i in range(n_sites):
        strides[i] = d ** (n_sites - 1 - i)
    with nogil:
        for r in range(n):
            for k in range(dim):
                up[k] = 0
                down[k] = 0
            for k in range(dim):
                c = psi[r, k]
                for i in range(n_sites):
                    digit = (k // strides[i]) % d
                    if digit > 0:
                        m = s - digit
                        amp = sqrt(s * (s + 1) - m * (m + 1))
                        up[k - strides[i]] = up[k - strides[i]] + amp * c
                        down[k] = down[k] + amp * psi[r, k - strides[i]]
            plus = 0
            pp = 0
            nu_ = 0
            nd_ = 0
            z_up = 0
            z_down = 0
            sz = 0
            szz = 0
            for k in range(dim):
                mz = 0
                for i in range(n_sites):
                    mz = mz + s - (k // strides[i]) % d
                c = psi[r, k]
                prob = c.real * c.real + c.imag * c.imag
                sz = sz + prob * mz
                szz = szz + prob * mz * mz
                plus = plus + c.conjugate() * up[k]
                pp = pp + down[k].conjugate() * up[k]
                nu_ = nu_ + up[k].real * up[k].real + up[k].imag * up[k].imag
                nd_ = nd_ + down[k].real * down[k].real + down[k].imag * down[k].imag
                z_up = z_up + mz * c.conjugate() * up[k]
                z_down = z_down + mz * c.conjugate() * down[k]
            mean[r, 0] = plus.real
            mean[r, 1] = plus.imag
            mean[r, 2] = sz
            second[r, 0, 0] = 0.25 * (nu_ + nd_ + 2 * pp.real)
            second[r, 1, 1] = 0.25 * (nu_ + nd_ - 2 * pp.real)
            second[r, 2, 2] = szz
            second[r, 0, 1] = 0.5 * pp.imag
            second[r, 1, 0] = 0.5 * pp.imag
            second[r, 0, 2] = 0.5 * (z_up + z_down).real
            second[r, 2, 0] = 0.5 * (z_up + z_down).real
            second[r, 1, 2] = 0.5 * (z_up - z_down).imag
            second[r, 2, 1] = 0.5 * (z_up - z_down).imag
    return mean_arr, second_arr
