"""Gibbs sampler over the full selection model.

One sweep updates, in order: the intercept; the joint coefficient vector
via an eigendecomposition of its conditional precision; the coefficient
auxiliary scales; the coefficient inclusion indicators; the spline blocks;
the block auxiliary scales; the block inclusion indicators; and finally the
response-specific step (noise variance for Gaussian responses, latent
truncated-normal variables for binary ones).  All steps except the two
response-specific ones touch the data only through the sufficient-statistic
matrices, so sweep cost is essentially independent of the sample size.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit as sp_expit

from ._backend import get_kernels
from .distributions import (
    logit,
    sample_inverse_gamma,
    sample_inverse_gaussian,
    sample_truncated_normal_plus,
)
from .errors import InvalidParameterError, NumericalError
from .hyper import Hyperparameters
from .prepare import BERNOULLI, GAUSSIAN, PreparedData

__all__ = ["GibbsSamples", "run_gibbs", "draw_mvn_via_eigen", "posterior_inclusion_means"]

# Conditional inverse-Gaussian means are clamped here; the exact conditional
# degenerates only on a measure-zero event and the clamp keeps double
# precision finite.
_IG_MEAN_CLAMP = 1e12
_IG_EPS = 1e-300


@dataclass
class GibbsSamples:
    """Retained chains (warm-up discarded), one row per kept sweep."""

    response_type: str
    beta0: np.ndarray  # (N,)
    gamma_beta: np.ndarray  # (N, d)
    beta_tilde: np.ndarray  # (N, d)
    b_beta: np.ndarray  # (N, d)
    sigma2_beta: np.ndarray  # (N,)
    a_beta: np.ndarray  # (N,)
    gamma_u: np.ndarray  # (N, d_non)
    u_tilde: np.ndarray  # (N, sum K_j)
    b_u: np.ndarray  # (N, d_non)
    sigma2_u: np.ndarray  # (N, d_non)
    a_u: np.ndarray  # (N, d_non)
    sigma2_eps: np.ndarray | None  # (N,), Gaussian only (fixed at 1 for binary)
    a_eps: np.ndarray | None  # (N,), Gaussian only
    c: np.ndarray | None  # (N, n), binary only, None when not retained
    block_index: np.ndarray
    timings: dict = field(default_factory=dict)

    @property
    def n_kept(self) -> int:
        return self.beta0.shape[0]

    @property
    def beta(self) -> np.ndarray:
        """Derived chain of actual coefficients gamma_beta * beta_tilde."""
        return self.gamma_beta * self.beta_tilde

    @property
    def u(self) -> np.ndarray:
        """Derived chain of actual spline coefficients gamma_u * u_tilde."""
        if self.gamma_u.shape[1] == 0:
            return self.u_tilde.copy()
        sizes = np.diff(self.block_index)
        return np.repeat(self.gamma_u, sizes.astype(int), axis=1) * self.u_tilde


def draw_mvn_via_eigen(omega, rhs, scale, rng):
    """Draw from N(Omega^{-1} rhs / scale, Omega^{-1}).

    Decomposes Omega = U diag(d) U' and returns
    U(U'z / sqrt(d) + U'rhs / (d * scale)) for z ~ N(0, I).
    """
    omega = np.asarray(omega, dtype=float)
    try:
        d_om, U = np.linalg.eigh(omega)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigendecomposition failed", quantity="Omega") from exc
    if d_om[0] <= 0.0 or not np.all(np.isfinite(d_om)):
        raise NumericalError("conditional precision not positive definite", quantity=f"min eigenvalue {d_om[0]:.3e}")
    z = rng.standard_normal(omega.shape[0])
    return U @ (U.T @ z / np.sqrt(d_om) + U.T @ np.asarray(rhs, dtype=float) / (d_om * scale))


def _clamped_ig_mean(scale, norms):
    with np.errstate(divide="ignore"):
        return np.minimum(scale / np.maximum(norms, _IG_EPS), _IG_MEAN_CLAMP)


def run_gibbs(
    prepared: PreparedData,
    hyper: Hyperparameters,
    n_warm: int = 1000,
    n_kept: int = 1000,
    rng: np.random.Generator | None = None,
    keep_c: bool = True,
    backend: str | None = None,
) -> GibbsSamples:
    """Run the sampler and return the retained chains.

    ``rng`` must be a numpy Generator; fixing it fixes the output exactly.
    ``keep_c`` controls whether the binary-case latent chains are stored
    (they are n-dimensional per sweep, which matters for very large n).
    """
    if n_warm < 1 or n_kept < 1:
        raise InvalidParameterError("n_warm and n_kept must be >= 1")
    if rng is None:
        raise InvalidParameterError("an explicit numpy Generator is required")
    kern = get_kernels(backend)

    X, Z, y = prepared.X, prepared.Z, prepared.y
    XTX, ZTX, ZTZ = prepared.XTX, prepared.ZTX, prepared.ZTZ
    wz = prepared.wZ
    starts = prepared.block_index.astype(np.int64)
    sizes = np.diff(starts)
    n, d = X.shape
    d_non = prepared.d_non
    k_tot = Z.shape[1]
    gaussian = prepared.response_type == GAUSSIAN
    binary = prepared.response_type == BERNOULLI

    sigma_beta0_sq = hyper.sigma_beta0**2
    s_beta_sq, s_eps_sq, s_u_sq = hyper.s_beta**2, hyper.s_eps**2, hyper.s_u**2
    logit_rho_b = logit(hyper.rho_beta)
    logit_rho_u = logit(hyper.rho_u)
    xtx_diag = np.diag(XTX).copy()

    # Initialization as listed: relaxed 1/2 indicators, zero coefficients,
    # unit scales; adjusted statistics start at the raw ones.
    gamma_b = np.full(d, 0.5)
    gamma_u = np.full(d_non, 0.5)
    beta_t = np.zeros(d)
    u_t = np.zeros(k_tot)
    b_beta = np.ones(d)
    b_u = np.ones(d_non)
    sig2_beta = 1.0
    a_beta = 1.0
    sig2_u = np.ones(d_non)
    a_u = np.ones(d_non)
    sig2_eps = 1.0
    a_eps = 1.0
    yT1_adj = 0.0
    XTy_adj = prepared.XTy.copy()
    ZTy_adj = prepared.ZTy.copy()
    two_y_minus_1 = 2.0 * y - 1.0 if binary else None

    out = GibbsSamples(
        response_type=prepared.response_type,
        beta0=np.empty(n_kept),
        gamma_beta=np.empty((n_kept, d)),
        beta_tilde=np.empty((n_kept, d)),
        b_beta=np.empty((n_kept, d)),
        sigma2_beta=np.empty(n_kept),
        a_beta=np.empty(n_kept),
        gamma_u=np.empty((n_kept, d_non)),
        u_tilde=np.empty((n_kept, k_tot)),
        b_u=np.empty((n_kept, d_non)),
        sigma2_u=np.empty((n_kept, d_non)),
        a_u=np.empty((n_kept, d_non)),
        sigma2_eps=np.empty(n_kept) if gaussian else None,
        a_eps=np.empty(n_kept) if gaussian else None,
        c=np.empty((n_kept, n)) if (binary and keep_c) else None,
        block_index=starts.copy(),
    )

    t_core = 0.0
    t_resp = 0.0
    for g in range(n_warm + n_kept):
        t0 = time.perf_counter()
        # Intercept.
        om2 = n / sig2_eps + 1.0 / sigma_beta0_sq
        beta0 = rng.normal(yT1_adj / (sig2_eps * om2), 1.0 / np.sqrt(om2))

        # Joint coefficient draw.
        omega = np.outer(gamma_b, gamma_b) * XTX / sig2_eps + np.diag(b_beta) / sig2_beta
        u_eff = np.repeat(gamma_u, sizes) * u_t
        om3 = XTy_adj - ZTX.T @ u_eff
        try:
            beta_t = draw_mvn_via_eigen(omega, gamma_b * om3, sig2_eps, rng)
        except NumericalError as exc:
            raise NumericalError(str(exc), where=f"sweep {g}") from exc

        # Coefficient auxiliary scales.
        b_beta = sample_inverse_gaussian(_clamped_ig_mean(np.sqrt(sig2_beta), np.abs(beta_t)), 1.0, rng)
        sig2_beta = sample_inverse_gamma(
            0.5 * (d + 1), 1.0 / a_beta + 0.5 * float(beta_t @ (b_beta * beta_t)), rng
        )
        a_beta = sample_inverse_gamma(1.0, 1.0 / sig2_beta + 1.0 / s_beta_sq, rng)

        # Coefficient inclusion indicators.  The staging buffer uses the
        # previous sweep's indicators throughout this pass, which makes the
        # coordinate draws independent and vectorizable.
        beta_curr = gamma_b * beta_t
        s_spline = ZTX.T @ u_eff
        om4 = XTy_adj - (XTX @ beta_curr - xtx_diag * beta_curr) - s_spline
        om5 = logit_rho_b - 0.5 * (beta_t * beta_t * xtx_diag - 2.0 * beta_t * om4) / sig2_eps
        gamma_b = (rng.random(d) < sp_expit(om5)).astype(float)

        # Spline blocks: sequential draws against a maintained residual.
        beta_curr = gamma_b * beta_t
        if d_non:
            u_eff = np.repeat(gamma_u, sizes) * u_t
            R = ZTy_adj - ZTX @ beta_curr - ZTZ @ u_eff
            z_u = rng.standard_normal(k_tot)
            kern.gibbs_u_tilde_sweep(u_t, R, gamma_u, b_u, sig2_u, wz, ZTZ, starts, sig2_eps, z_u)

            norms = np.sqrt(np.add.reduceat(u_t * u_t, starts[:-1]))
            b_u = sample_inverse_gaussian(_clamped_ig_mean(np.sqrt(sig2_u), norms), 1.0, rng)
            sig2_u = sample_inverse_gamma(0.5 * (sizes + 1), 1.0 / a_u + 0.5 * norms * norms * b_u, rng)
            a_u = sample_inverse_gamma(1.0, 1.0 / sig2_u + 1.0 / s_u_sq, rng)

            # The residual left by the block sweep is exactly the one the
            # indicator sweep needs (the staging indicators start at the
            # previous sweep's values).
            gamma_u = gamma_u.copy()
            unif_u = rng.random(d_non)
            kern.gibbs_gamma_u_sweep(gamma_u, R, u_t, wz, ZTZ, starts, sig2_eps, logit_rho_u, unif_u)

        t1 = time.perf_counter()
        # Response step (the only Theta(n) work in a sweep).
        om10 = beta0 + X @ beta_curr
        if d_non:
            om10 += Z @ (np.repeat(gamma_u, sizes) * u_t)
        if gaussian:
            resid = y - om10
            sig2_eps = sample_inverse_gamma(0.5 * (n + 1), 1.0 / a_eps + 0.5 * float(resid @ resid), rng)
            a_eps = sample_inverse_gamma(1.0, 1.0 / sig2_eps + 1.0 / s_eps_sq, rng)
        else:
            sig2_eps = 1.0
            c = two_y_minus_1 * sample_truncated_normal_plus(two_y_minus_1 * om10, rng)
            yT1_adj = float(c.sum())
            XTy_adj = X.T @ c
            ZTy_adj = Z.T @ c
        t2 = time.perf_counter()
        t_core += t1 - t0
        t_resp += t2 - t1

        if not (np.isfinite(beta0) and np.isfinite(sig2_beta) and np.isfinite(sig2_eps)):
            raise NumericalError("non-finite state", where=f"sweep {g}", quantity="beta0/sigma2")

        k = g - n_warm
        if k >= 0:
            out.beta0[k] = beta0
            out.gamma_beta[k] = gamma_b
            out.beta_tilde[k] = beta_t
            out.b_beta[k] = b_beta
            out.sigma2_beta[k] = sig2_beta
            out.a_beta[k] = a_beta
            out.gamma_u[k] = gamma_u
            out.u_tilde[k] = u_t
            out.b_u[k] = b_u
            out.sigma2_u[k] = sig2_u
            out.a_u[k] = a_u
            if gaussian:
                out.sigma2_eps[k] = sig2_eps
                out.a_eps[k] = a_eps
            elif out.c is not None:
                out.c[k] = c

    out.timings = {"core_seconds": t_core, "response_seconds": t_resp}
    return out


def posterior_inclusion_means(samples: GibbsSamples):
    """Per-coordinate averages of the retained indicator chains."""
    if samples.n_kept < 1:
        raise InvalidParameterError("no retained samples")
    return samples.gamma_beta.mean(axis=0), samples.gamma_u.mean(axis=0)
