"""Pure-numpy implementations of the per-sweep block loops.

These are the hot paths of the Gibbs sweep and the variational cycle: the
sequential loops over spline blocks (and coefficients) whose iterations
depend on each other through a running residual.  A compiled twin with the
same signatures lives in ``_kernels_cy``; the backend module picks one at
import.  Both implementations perform the same floating-point operations in
the same order (elementwise arithmetic plus BLAS dot/gemv), so results
match across backends.
"""

from __future__ import annotations

from math import exp

import numpy as np


def _expit(x: float) -> float:
    # Branch on sign so exp never overflows.
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def gibbs_u_tilde_sweep(u, R, gamma_u, b_u, sig2_u, wz, ZTZ, starts, sig2_eps, z):
    """One pass of spline-coefficient block draws.

    ``u`` enters as the previous sweep's coefficients and leaves updated; the
    residual ``R = ZTy_adj - ZTX @ beta - ZTZ @ (gamma_rep * u)`` is
    maintained in place.  ``z`` holds the pre-drawn standard normals.
    """
    d_non = len(starts) - 1
    for j in range(d_non):
        sl = slice(starts[j], starts[j + 1])
        g = gamma_u[j]
        om6 = R[sl] + g * (wz[sl] * u[sl])
        om7 = g * wz[sl] / sig2_eps + (b_u[j] / sig2_u[j])
        new = z[sl] / np.sqrt(om7) + g * om6 / (om7 * sig2_eps)
        delta_eff = g * (new - u[sl])
        R -= ZTZ[:, sl] @ delta_eff
        u[sl] = new


def gibbs_gamma_u_sweep(gamma_u, R2, u, wz, ZTZ, starts, sig2_eps, logit_rho_u, unif):
    """One pass of block inclusion-indicator draws (staging buffer updated
    in place, so later blocks see earlier decisions)."""
    d_non = len(starts) - 1
    for j in range(d_non):
        sl = slice(starts[j], starts[j + 1])
        g = gamma_u[j]
        uj = u[sl]
        om8 = R2[sl] + g * (wz[sl] * uj)
        om9 = logit_rho_u - 0.5 * (np.dot(wz[sl], uj * uj) - 2.0 * np.dot(uj, om8)) / sig2_eps
        g_new = 1.0 if unif[j] < _expit(om9) else 0.0
        if g_new != g:
            R2 -= ZTZ[:, sl] @ ((g_new - g) * uj)
            gamma_u[j] = g_new


def mfvb_gamma_beta_sweep(mu_gb, XTX, Sigma, mu_bt, base, factor, logit_rho_b):
    """Coordinate updates of the coefficient inclusion probabilities.

    ``base[j]`` is the precomputed XTy_adj[j] minus the spline-block
    contribution; ``factor`` is the posterior mean of the noise precision.
    Updates are sequential: coordinate j sees the new probabilities of
    coordinates before it.
    """
    d = mu_gb.shape[0]
    for j in range(d):
        w = XTX[:, j] * (Sigma[:, j] + mu_bt[j] * mu_bt)
        v = np.dot(mu_gb, w) - mu_gb[j] * w[j]
        om15 = mu_bt[j] * base[j] - v
        arg = logit_rho_b - 0.5 * factor * ((mu_bt[j] * mu_bt[j] + Sigma[j, j]) * XTX[j, j] - 2.0 * om15)
        mu_gb[j] = _expit(arg)


def mfvb_u_block_sweep(mu_ut, sig2_ut, mu_u, R, mu_gu, wz, ZTZ, starts, factor, prior_prec):
    """Coordinate updates of the spline-coefficient q-densities.

    ``mu_u = mu_gu_rep * mu_ut`` and the residual ``R`` are refreshed block
    by block so each update conditions on the current state of the others.
    """
    d_non = len(starts) - 1
    for j in range(d_non):
        sl = slice(starts[j], starts[j + 1])
        g = mu_gu[j]
        om16 = R[sl] + wz[sl] * mu_u[sl]
        s2 = 1.0 / (factor * g * wz[sl] + prior_prec[j])
        new_mu = factor * g * om16 * s2
        sig2_ut[sl] = s2
        mu_ut[sl] = new_mu
        new_mu_u = g * new_mu
        R -= ZTZ[:, sl] @ (new_mu_u - mu_u[sl])
        mu_u[sl] = new_mu_u


def mfvb_gamma_u_sweep(mu_gu, mu_ut, sig2_ut, mu_u, R2, wz, ZTZ, starts, factor, logit_rho_u):
    """Coordinate updates of the block inclusion probabilities."""
    d_non = len(starts) - 1
    for j in range(d_non):
        sl = slice(starts[j], starts[j + 1])
        uj = mu_ut[sl]
        om18 = R2[sl] + wz[sl] * mu_u[sl]
        om19 = np.dot(wz[sl], uj * uj + sig2_ut[sl]) - 2.0 * np.dot(uj, om18)
        g_new = _expit(logit_rho_u - 0.5 * factor * om19)
        new_mu_u = g_new * uj
        R2 -= ZTZ[:, sl] @ (new_mu_u - mu_u[sl])
        mu_gu[j] = g_new
        mu_u[sl] = new_mu_u
