# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the per-sweep block loops.

Signature-compatible with ``_kernels_py``; the floating-point work is kept
operation-for-operation identical to the numpy fallback (elementwise C
arithmetic, BLAS ddot/dgemv for every reduction, no FMA contraction) so the
two backends produce the same bits.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, sqrt
from scipy.linalg.cython_blas cimport ddot, dgemv


cdef inline double _expit(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef inline void _colblock_matvec(double[:, ::1] ZTZ, Py_ssize_t start, int kj,
                                  double* x, double* out) noexcept nogil:
    """out = ZTZ[:, start:start+kj] @ x, matching numpy's gemv call.

    The C-order column block is a valid column-major description of its own
    transpose, so BLAS computes A^T x on the raw buffer.
    """
    cdef int m = kj
    cdef int n = <int> ZTZ.shape[0]
    cdef int lda = <int> ZTZ.shape[1]
    cdef int inc = 1
    cdef double one = 1.0
    cdef double zero = 0.0
    cdef char trans = b'T'
    dgemv(&trans, &m, &n, &one, &ZTZ[0, 0] + start, &lda, x, &inc, &zero, out, &inc)


def gibbs_u_tilde_sweep(double[::1] u, double[::1] R, double[::1] gamma_u,
                        double[::1] b_u, double[::1] sig2_u, double[::1] wz,
                        double[:, ::1] ZTZ, long[::1] starts, double sig2_eps,
                        double[::1] z):
    cdef Py_ssize_t d_non = starts.shape[0] - 1
    cdef Py_ssize_t k_tot = u.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scratch = np.empty(2 * k_tot)
    cdef double[::1] buf = scratch
    cdef Py_ssize_t j, i, s, e
    cdef int kj
    cdef double g, om6, om7, newv, prior
    for j in range(d_non):
        s = starts[j]
        e = starts[j + 1]
        kj = <int> (e - s)
        g = gamma_u[j]
        prior = b_u[j] / sig2_u[j]
        for i in range(kj):
            om6 = R[s + i] + g * (wz[s + i] * u[s + i])
            om7 = g * wz[s + i] / sig2_eps + prior
            newv = z[s + i] / sqrt(om7) + (g * om6) / (om7 * sig2_eps)
            buf[k_tot + i] = g * (newv - u[s + i])
            u[s + i] = newv
        _colblock_matvec(ZTZ, s, kj, &buf[k_tot], &buf[0])
        for i in range(k_tot):
            R[i] = R[i] - buf[i]


def gibbs_gamma_u_sweep(double[::1] gamma_u, double[::1] R2, double[::1] u,
                        double[::1] wz, double[:, ::1] ZTZ, long[::1] starts,
                        double sig2_eps, double logit_rho_u, double[::1] unif):
    cdef Py_ssize_t d_non = starts.shape[0] - 1
    cdef Py_ssize_t k_tot = u.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scratch = np.empty(3 * k_tot)
    cdef double[::1] buf = scratch
    cdef Py_ssize_t j, i, s, e
    cdef int kj, inc = 1
    cdef double g, g_new, om9, d1, d2
    for j in range(d_non):
        s = starts[j]
        e = starts[j + 1]
        kj = <int> (e - s)
        g = gamma_u[j]
        for i in range(kj):
            buf[i] = R2[s + i] + g * (wz[s + i] * u[s + i])  # om8
            buf[k_tot + i] = u[s + i] * u[s + i]
        d1 = ddot(&kj, &wz[s], &inc, &buf[k_tot], &inc)
        d2 = ddot(&kj, &u[s], &inc, &buf[0], &inc)
        om9 = logit_rho_u - 0.5 * (d1 - 2.0 * d2) / sig2_eps
        g_new = 1.0 if unif[j] < _expit(om9) else 0.0
        if g_new != g:
            for i in range(kj):
                buf[k_tot + i] = (g_new - g) * u[s + i]
            _colblock_matvec(ZTZ, s, kj, &buf[k_tot], &buf[2 * k_tot])
            for i in range(k_tot):
                R2[i] = R2[i] - buf[2 * k_tot + i]
            gamma_u[j] = g_new


def mfvb_gamma_beta_sweep(double[::1] mu_gb, double[:, ::1] XTX, double[:, ::1] Sigma,
                          double[::1] mu_bt, double[::1] base, double factor,
                          double logit_rho_b):
    cdef Py_ssize_t d = mu_gb.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scratch = np.empty(d)
    cdef double[::1] w = scratch
    cdef Py_ssize_t j, i
    cdef int n = <int> d, inc = 1
    cdef double v, om15, arg, mbj
    for j in range(d):
        mbj = mu_bt[j]
        for i in range(d):
            w[i] = XTX[i, j] * (Sigma[i, j] + mbj * mu_bt[i])
        v = ddot(&n, &mu_gb[0], &inc, &w[0], &inc) - mu_gb[j] * w[j]
        om15 = mbj * base[j] - v
        arg = logit_rho_b - 0.5 * factor * ((mbj * mbj + Sigma[j, j]) * XTX[j, j] - 2.0 * om15)
        mu_gb[j] = _expit(arg)


def mfvb_u_block_sweep(double[::1] mu_ut, double[::1] sig2_ut, double[::1] mu_u,
                       double[::1] R, double[::1] mu_gu, double[::1] wz,
                       double[:, ::1] ZTZ, long[::1] starts, double factor,
                       double[::1] prior_prec):
    cdef Py_ssize_t d_non = starts.shape[0] - 1
    cdef Py_ssize_t k_tot = mu_ut.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scratch = np.empty(2 * k_tot)
    cdef double[::1] buf = scratch
    cdef Py_ssize_t j, i, s, e
    cdef int kj
    cdef double g, om16, s2, new_mu, new_mu_u, pr
    for j in range(d_non):
        s = starts[j]
        e = starts[j + 1]
        kj = <int> (e - s)
        g = mu_gu[j]
        pr = prior_prec[j]
        for i in range(kj):
            om16 = R[s + i] + wz[s + i] * mu_u[s + i]
            s2 = 1.0 / (factor * g * wz[s + i] + pr)
            new_mu = factor * g * om16 * s2
            sig2_ut[s + i] = s2
            mu_ut[s + i] = new_mu
            new_mu_u = g * new_mu
            buf[k_tot + i] = new_mu_u - mu_u[s + i]
            mu_u[s + i] = new_mu_u
        _colblock_matvec(ZTZ, s, kj, &buf[k_tot], &buf[0])
        for i in range(k_tot):
            R[i] = R[i] - buf[i]


def mfvb_gamma_u_sweep(double[::1] mu_gu, double[::1] mu_ut, double[::1] sig2_ut,
                       double[::1] mu_u, double[::1] R2, double[::1] wz,
                       double[:, ::1] ZTZ, long[::1] starts, double factor,
                       double logit_rho_u):
    cdef Py_ssize_t d_non = starts.shape[0] - 1
    cdef Py_ssize_t k_tot = mu_ut.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scratch = np.empty(3 * k_tot)
    cdef double[::1] buf = scratch
    cdef Py_ssize_t j, i, s, e
    cdef int kj, inc = 1
    cdef double g_new, om19, d1, d2, new_mu_u
    for j in range(d_non):
        s = starts[j]
        e = starts[j + 1]
        kj = <int> (e - s)
        for i in range(kj):
            buf[i] = R2[s + i] + wz[s + i] * mu_u[s + i]  # om18
            buf[k_tot + i] = mu_ut[s + i] * mu_ut[s + i] + sig2_ut[s + i]
        d1 = ddot(&kj, &wz[s], &inc, &buf[k_tot], &inc)
        d2 = ddot(&kj, &mu_ut[s], &inc, &buf[0], &inc)
        om19 = d1 - 2.0 * d2
        g_new = _expit(logit_rho_u - 0.5 * factor * om19)
        for i in range(kj):
            new_mu_u = g_new * mu_ut[s + i]
            buf[k_tot + i] = new_mu_u - mu_u[s + i]
            mu_u[s + i] = new_mu_u
        _colblock_matvec(ZTZ, s, kj, &buf[k_tot], &buf[2 * k_tot])
        for i in range(k_tot):
            R2[i] = R2[i] - buf[2 * k_tot + i]
        mu_gu[j] = g_new
