"""Mean-field variational fit: coordinate ascent with closed-form updates.

The posterior is approximated by a fully factorized q-density (with a full
covariance retained for the coefficient block).  Every update is the exact
coordinate-ascent solution given the current state of the other factors, so
the evidence lower bound is non-decreasing cycle over cycle; that bound is
evaluated at the end of every cycle and drives both the convergence test
and an internal-consistency check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, gammaln, log_ndtr, xlogy

from ._backend import get_kernels
from .distributions import logit, zeta_prime
from .errors import InternalConsistencyError, InvalidParameterError, NumericalError
from .hyper import Hyperparameters
from .prepare import GAUSSIAN, PreparedData

__all__ = ["QParams", "ElboTrace", "run_mfvb", "compute_elbo", "variational_inclusion_means"]

_LOG_2PI = np.log(2.0 * np.pi)

#: tolerated relative ELBO decrease before declaring an update-formula bug
ELBO_DECREASE_SLACK = 1e-10


@dataclass
class QParams:
    """All variational parameters.

    Shape parameters of the inverse-gamma factors are fixed at
    initialization; the reciprocal means ``mu_inv_*`` are kept consistent
    with (kappa, lambda) after every update.  Binary responses carry the
    latent truncated-normal locations and means instead of the noise
    factors.
    """

    response_type: str
    n: int
    block_index: np.ndarray
    mu_beta0: float = 0.0
    sig2_beta0: float = 1.0
    mu_gamma_beta: np.ndarray = None
    mu_beta_tilde: np.ndarray = None
    Sigma_beta_tilde: np.ndarray = None
    mu_b_beta: np.ndarray = None
    kappa_sig2_beta: float = 1.0
    lam_sig2_beta: float | None = None
    mu_inv_sig2_beta: float = 1.0
    kappa_a_beta: float = 1.0
    lam_a_beta: float | None = None
    mu_inv_a_beta: float = 1.0
    mu_gamma_u: np.ndarray = None
    mu_u_tilde: np.ndarray = None
    sig2_u_tilde: np.ndarray = None
    mu_b_u: np.ndarray = None
    kappa_sig2_u: np.ndarray = None
    lam_sig2_u: np.ndarray | None = None
    mu_inv_sig2_u: np.ndarray = None
    kappa_a_u: np.ndarray = None
    lam_a_u: np.ndarray | None = None
    mu_inv_a_u: np.ndarray = None
    kappa_sig2_eps: float | None = None  # Gaussian only: (n+1)/2, never mutated
    lam_sig2_eps: float | None = None
    mu_inv_sig2_eps: float = 1.0
    kappa_a_eps: float | None = None
    lam_a_eps: float | None = None
    mu_inv_a_eps: float | None = None
    mu_c: np.ndarray | None = None  # binary only: latent means
    c_loc: np.ndarray | None = None  # binary only: truncated-normal locations

    @property
    def d(self) -> int:
        return self.mu_gamma_beta.shape[0]

    @property
    def d_non(self) -> int:
        return self.block_index.shape[0] - 1

    @property
    def block_sizes(self) -> np.ndarray:
        if self._sizes is None:
            self._sizes = np.diff(self.block_index)
        return self._sizes

    _sizes: np.ndarray | None = field(default=None, repr=False)

    def u_means(self) -> np.ndarray:
        """Means of the actual spline coefficients gamma_u * u_tilde."""
        return np.repeat(self.mu_gamma_u, self.block_sizes) * self.mu_u_tilde

    def coef_means(self) -> np.ndarray:
        """Means of the actual linear coefficients gamma_beta * beta_tilde."""
        return self.mu_gamma_beta * self.mu_beta_tilde


@dataclass
class ElboTrace:
    """Per-cycle objective values and the convergence outcome."""

    values: np.ndarray
    rel_changes: np.ndarray
    converged: bool
    n_cycles: int

    @property
    def final(self) -> float:
        return float(self.values[-1])


def _init_qparams(prepared: PreparedData) -> QParams:
    d, d_non, n = prepared.d, prepared.d_non, prepared.n
    k_tot = prepared.Z.shape[1]
    gaussian = prepared.response_type == GAUSSIAN
    return QParams(
        response_type=prepared.response_type,
        n=n,
        block_index=prepared.block_index.copy(),
        mu_gamma_beta=np.full(d, 0.5),
        mu_beta_tilde=np.zeros(d),
        Sigma_beta_tilde=np.eye(d),
        mu_b_beta=np.ones(d),
        kappa_sig2_beta=0.5 * (d + 1),
        mu_gamma_u=np.full(d_non, 0.5),
        mu_u_tilde=np.zeros(k_tot),
        sig2_u_tilde=np.ones(k_tot),
        mu_b_u=np.ones(d_non),
        kappa_sig2_u=0.5 * (prepared.block_sizes + 1.0),
        mu_inv_sig2_u=np.ones(d_non),
        kappa_a_u=np.ones(d_non),
        mu_inv_a_u=np.ones(d_non),
        kappa_sig2_eps=0.5 * (n + 1) if gaussian else None,
        kappa_a_eps=1.0 if gaussian else None,
        mu_inv_a_eps=1.0 if gaussian else None,
        mu_inv_sig2_eps=1.0,
    )


def _sum_var_eta(q: QParams, prepared: PreparedData):
    """Sum over samples of the q-variance of the linear predictor."""
    mu_g, mu_bt, Sigma = q.mu_gamma_beta, q.mu_beta_tilde, q.Sigma_beta_tilde
    omega_g = np.diag(mu_g * (1.0 - mu_g)) + np.outer(mu_g, mu_g)
    b = mu_g * mu_bt
    second = float(np.sum(prepared.XTX * omega_g * (Sigma + np.outer(mu_bt, mu_bt))))
    total = q.n * q.sig2_beta0 + second - float(b @ prepared.XTX @ b)
    if q.d_non:
        # diagonal of Cov(gamma_u * u_tilde): g*sig2 + g(1-g)*mu^2
        g_rep = np.repeat(q.mu_gamma_u, q.block_sizes)
        var_u = g_rep * q.sig2_u_tilde + g_rep * (1.0 - g_rep) * q.mu_u_tilde**2
        total += float(prepared.wZ @ var_u)
    return total


def _invgamma_entropy(kappa, lam, psi=None, lgam=None):
    if psi is None:
        psi = digamma(kappa)
    if lgam is None:
        lgam = gammaln(kappa)
    return kappa + np.log(lam) + lgam - (1.0 + kappa) * psi


def _invgamma_mean_log(kappa, lam, psi=None):
    return np.log(lam) - (digamma(kappa) if psi is None else psi)


def _bernoulli_terms(mu, rho):
    """E[log prior] plus entropy for independent Bernoulli factors."""
    prior = float(np.sum(xlogy(mu, rho) + xlogy(1.0 - mu, 1.0 - rho)))
    entropy = -float(np.sum(xlogy(mu, mu) + xlogy(1.0 - mu, 1.0 - mu)))
    return prior + entropy


@dataclass
class _ElboCache:
    """Shape- and hyperparameter-dependent special-function values.

    These never change across cycles, so the per-cycle evaluation only has
    to take logs of the lambda parameters.
    """

    log_pi: float
    log_2: float
    log_s_beta: float
    log_s_eps: float
    log_sigma_beta0_sq: float
    log_s_u: float
    psi_sig2_beta: float
    lgam_sig2_beta: float
    psi_a_beta: float
    lgam_a_beta: float
    psi_sig2_u: np.ndarray
    lgam_sig2_u: np.ndarray
    psi_a_u: np.ndarray
    lgam_a_u: np.ndarray
    lgam_prior_b_u: np.ndarray
    psi_sig2_eps: float | None
    lgam_sig2_eps: float | None
    psi_a_eps: float | None
    lgam_a_eps: float | None


def _make_elbo_cache(q: QParams, hyper: Hyperparameters) -> _ElboCache:
    sizes = q.block_sizes
    gaussian = q.response_type == GAUSSIAN
    return _ElboCache(
        log_pi=np.log(np.pi),
        log_2=np.log(2.0),
        log_s_beta=np.log(hyper.s_beta),
        log_s_eps=np.log(hyper.s_eps),
        log_sigma_beta0_sq=np.log(hyper.sigma_beta0**2),
        log_s_u=np.log(hyper.s_u),
        psi_sig2_beta=digamma(q.kappa_sig2_beta),
        lgam_sig2_beta=gammaln(q.kappa_sig2_beta),
        psi_a_beta=digamma(q.kappa_a_beta),
        lgam_a_beta=gammaln(q.kappa_a_beta),
        psi_sig2_u=digamma(q.kappa_sig2_u),
        lgam_sig2_u=gammaln(q.kappa_sig2_u),
        psi_a_u=digamma(q.kappa_a_u),
        lgam_a_u=gammaln(q.kappa_a_u),
        lgam_prior_b_u=gammaln(0.5 * (sizes + 1.0)),
        psi_sig2_eps=digamma(q.kappa_sig2_eps) if gaussian else None,
        lgam_sig2_eps=gammaln(q.kappa_sig2_eps) if gaussian else None,
        psi_a_eps=digamma(q.kappa_a_eps) if gaussian else None,
        lgam_a_eps=gammaln(q.kappa_a_eps) if gaussian else None,
    )


def compute_elbo(
    q: QParams,
    prepared: PreparedData,
    hyper: Hyperparameters,
    eta: np.ndarray | None = None,
    sum_var: float | None = None,
    cache: _ElboCache | None = None,
) -> float:
    """Evidence lower bound at the given variational state.

    Assembled group by group from the defining decomposition (prior
    cross-entropies plus factor entropies), with all constants included so
    traces are comparable across runs.  ``eta`` and ``sum_var`` optionally
    supply the precomputed linear-predictor mean and its summed q-variance.
    """
    if q.lam_sig2_beta is None:
        raise InvalidParameterError("QParams incomplete: run at least one cycle first")
    if cache is None:
        cache = _make_elbo_cache(q, hyper)
    d, d_non = q.d, q.d_non
    sizes = q.block_sizes

    # Intercept.
    elbo = (
        -0.5 * (q.mu_beta0**2 + q.sig2_beta0) / hyper.sigma_beta0**2
        + 0.5 * np.log(q.sig2_beta0)
        + 0.5
        - 0.5 * cache.log_sigma_beta0_sq
    )
    # Inclusion indicators.
    elbo += _bernoulli_terms(q.mu_gamma_beta, hyper.rho_beta)
    if d_non:
        elbo += _bernoulli_terms(q.mu_gamma_u, hyper.rho_u)

    # Coefficients and their auxiliary scales.  The E[log b] contributions
    # of the prior, likelihood, and entropy cancel exactly and are omitted.
    om14 = q.mu_beta_tilde**2 + np.diag(q.Sigma_beta_tilde)
    e_log_s2b = _invgamma_mean_log(q.kappa_sig2_beta, q.lam_sig2_beta, cache.psi_sig2_beta)
    sign, logdet = np.linalg.slogdet(q.Sigma_beta_tilde)
    if sign <= 0:
        raise NumericalError("coefficient covariance not positive definite", quantity="Sigma_beta_tilde")
    elbo += (
        -0.5 * d * e_log_s2b
        - 0.5 * q.mu_inv_sig2_beta * float(q.mu_b_beta @ om14)
        - 0.5 * float(np.sum(1.0 / q.mu_b_beta))
        + 0.5 * logdet
        + 0.5 * d * _LOG_2PI
        + 0.5 * d
        - d * cache.log_2
    )
    # sigma_beta^2 | a_beta and a_beta.
    e_log_ab = _invgamma_mean_log(q.kappa_a_beta, q.lam_a_beta, cache.psi_a_beta)
    elbo += (
        -0.5 * e_log_ab
        - 0.5 * cache.log_pi
        - 1.5 * e_log_s2b
        - q.mu_inv_a_beta * q.mu_inv_sig2_beta
        + _invgamma_entropy(q.kappa_sig2_beta, q.lam_sig2_beta, cache.psi_sig2_beta, cache.lgam_sig2_beta)
    )
    elbo += (
        -cache.log_s_beta
        - 0.5 * cache.log_pi
        - 1.5 * e_log_ab
        - q.mu_inv_a_beta / hyper.s_beta**2
        + _invgamma_entropy(q.kappa_a_beta, q.lam_a_beta, cache.psi_a_beta, cache.lgam_a_beta)
    )

    # Spline blocks and their auxiliary scales.
    if d_non:
        e_log_s2u = _invgamma_mean_log(q.kappa_sig2_u, q.lam_sig2_u, cache.psi_sig2_u)
        e_log_au = _invgamma_mean_log(q.kappa_a_u, q.lam_a_u, cache.psi_a_u)
        om17 = np.add.reduceat(q.mu_u_tilde**2 + q.sig2_u_tilde, q.block_index[:-1])
        sum_log_s2ut = np.add.reduceat(np.log(q.sig2_u_tilde), q.block_index[:-1])
        elbo += float(
            np.sum(
                -0.5 * sizes * e_log_s2u
                - 0.5 * q.mu_inv_sig2_u * q.mu_b_u * om17
                + 0.5 * sum_log_s2ut
                - 0.5 / q.mu_b_u
                + 0.5 * sizes
                + 0.5 * _LOG_2PI
                - 0.5 * (sizes + 1.0) * cache.log_2
                - cache.lgam_prior_b_u
            )
        )
        elbo += float(
            np.sum(
                -0.5 * e_log_au
                - 0.5 * cache.log_pi
                - 1.5 * e_log_s2u
                - q.mu_inv_a_u * q.mu_inv_sig2_u
                + _invgamma_entropy(q.kappa_sig2_u, q.lam_sig2_u, cache.psi_sig2_u, cache.lgam_sig2_u)
            )
        )
        elbo += float(
            np.sum(
                -cache.log_s_u
                - 0.5 * cache.log_pi
                - 1.5 * e_log_au
                - q.mu_inv_a_u / hyper.s_u**2
                + _invgamma_entropy(q.kappa_a_u, q.lam_a_u, cache.psi_a_u, cache.lgam_a_u)
            )
        )

    # Response completion.
    if eta is None:
        eta = q.mu_beta0 + prepared.X @ q.coef_means()
        if d_non:
            eta = eta + prepared.Z @ q.u_means()
    if sum_var is None:
        sum_var = _sum_var_eta(q, prepared)
    if q.response_type == GAUSSIAN:
        resid = prepared.y - eta
        e_ss = float(resid @ resid) + sum_var
        e_log_s2e = _invgamma_mean_log(q.kappa_sig2_eps, q.lam_sig2_eps, cache.psi_sig2_eps)
        e_log_ae = _invgamma_mean_log(q.kappa_a_eps, q.lam_a_eps, cache.psi_a_eps)
        elbo += -0.5 * q.n * _LOG_2PI - 0.5 * q.n * e_log_s2e - 0.5 * q.mu_inv_sig2_eps * e_ss
        elbo += (
            -0.5 * e_log_ae
            - 0.5 * cache.log_pi
            - 1.5 * e_log_s2e
            - q.mu_inv_a_eps * q.mu_inv_sig2_eps
            + _invgamma_entropy(q.kappa_sig2_eps, q.lam_sig2_eps, cache.psi_sig2_eps, cache.lgam_sig2_eps)
        )
        elbo += (
            -cache.log_s_eps
            - 0.5 * cache.log_pi
            - 1.5 * e_log_ae
            - q.mu_inv_a_eps / hyper.s_eps**2
            + _invgamma_entropy(q.kappa_a_eps, q.lam_a_eps, cache.psi_a_eps, cache.lgam_a_eps)
        )
    else:
        s = 2.0 * prepared.y - 1.0
        m = q.c_loc
        gap = m - eta
        # E[(c - eta)^2] decomposed around the stored truncation location m;
        # the cross terms vanish at in-algorithm states where m equals eta.
        elbo += float(np.sum(log_ndtr(s * m)))
        elbo += -0.5 * (float(np.sum(2.0 * (q.mu_c - m) * gap + gap * gap)) + sum_var)
    return float(elbo)


def run_mfvb(
    prepared: PreparedData,
    hyper: Hyperparameters,
    tol: float = 1e-8,
    max_cycles: int = 500,
    backend: str | None = None,
) -> tuple[QParams, ElboTrace]:
    """Coordinate ascent until the relative objective change drops below
    ``tol`` (or ``max_cycles``, reported via the trace).

    Entirely deterministic: identical inputs give bit-identical outputs.
    """
    if tol <= 0.0:
        raise InvalidParameterError("tol must be > 0")
    if max_cycles < 1:
        raise InvalidParameterError("max_cycles must be >= 1")
    kern = get_kernels(backend)

    X, Z, y = prepared.X, prepared.Z, prepared.y
    XTX, ZTX, ZTZ = prepared.XTX, prepared.ZTX, prepared.ZTZ
    wz = prepared.wZ
    starts = prepared.block_index.astype(np.int64)
    n, d = X.shape
    d_non = prepared.d_non
    gaussian = prepared.response_type == GAUSSIAN

    s_beta_sq, s_eps_sq, s_u_sq = hyper.s_beta**2, hyper.s_eps**2, hyper.s_u**2
    inv_sigma_beta0_sq = 1.0 / hyper.sigma_beta0**2
    logit_rho_b = logit(hyper.rho_beta)
    logit_rho_u = logit(hyper.rho_u)

    q = _init_qparams(prepared)
    elbo_cache = _make_elbo_cache(q, hyper)
    yT1_adj = 0.0
    XTy_adj = prepared.XTy.copy()
    ZTy_adj = prepared.ZTy.copy()
    two_y_minus_1 = 2.0 * y - 1.0 if not gaussian else None

    elbos: list[float] = []
    rel_changes: list[float] = []
    converged = False
    cycle = 0
    for cycle in range(1, max_cycles + 1):
        # Intercept.
        q.sig2_beta0 = 1.0 / (n * q.mu_inv_sig2_eps + inv_sigma_beta0_sq)
        q.mu_beta0 = q.sig2_beta0 * q.mu_inv_sig2_eps * yT1_adj

        # Coefficient block.
        mu_g = q.mu_gamma_beta
        omega_g = np.diag(mu_g * (1.0 - mu_g)) + np.outer(mu_g, mu_g)
        prec = q.mu_inv_sig2_eps * omega_g * XTX + q.mu_inv_sig2_beta * np.diag(q.mu_b_beta)
        try:
            Sigma = np.linalg.inv(prec)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("coefficient precision inversion failed", where=f"cycle {cycle}") from exc
        Sigma = 0.5 * (Sigma + Sigma.T)
        mu_u_all = q.u_means()
        om13 = XTy_adj - ZTX.T @ mu_u_all
        q.Sigma_beta_tilde = Sigma
        q.mu_beta_tilde = q.mu_inv_sig2_eps * (Sigma @ (mu_g * om13))

        # Coefficient auxiliary scales.
        om14 = q.mu_beta_tilde**2 + np.diag(Sigma)
        q.mu_b_beta = 1.0 / np.sqrt(q.mu_inv_sig2_beta * om14)
        q.lam_sig2_beta = q.mu_inv_a_beta + 0.5 * float(q.mu_b_beta @ om14)
        q.mu_inv_sig2_beta = q.kappa_sig2_beta / q.lam_sig2_beta
        q.lam_a_beta = q.mu_inv_sig2_beta + 1.0 / s_beta_sq
        q.mu_inv_a_beta = q.kappa_a_beta / q.lam_a_beta

        # Coefficient inclusion probabilities (sequential coordinate ascent).
        base = XTy_adj - ZTX.T @ mu_u_all
        kern.mfvb_gamma_beta_sweep(
            q.mu_gamma_beta, XTX, Sigma, q.mu_beta_tilde, base, q.mu_inv_sig2_eps, logit_rho_b
        )

        coef_mean = q.coef_means()
        if d_non:
            # Spline-coefficient blocks against a maintained residual.
            mu_u_all = q.u_means()
            R = ZTy_adj - ZTX @ coef_mean - ZTZ @ mu_u_all
            prior_prec = q.mu_inv_sig2_u * q.mu_b_u
            kern.mfvb_u_block_sweep(
                q.mu_u_tilde, q.sig2_u_tilde, mu_u_all, R, q.mu_gamma_u, wz, ZTZ, starts,
                q.mu_inv_sig2_eps, prior_prec,
            )

            om17 = np.add.reduceat(q.mu_u_tilde**2 + q.sig2_u_tilde, starts[:-1])
            q.mu_b_u = 1.0 / np.sqrt(q.mu_inv_sig2_u * om17)
            q.lam_sig2_u = q.mu_inv_a_u + 0.5 * q.mu_b_u * om17
            q.mu_inv_sig2_u = q.kappa_sig2_u / q.lam_sig2_u
            q.lam_a_u = q.mu_inv_sig2_u + 1.0 / s_u_sq
            q.mu_inv_a_u = q.kappa_a_u / q.lam_a_u

            # Block inclusion probabilities; the block sweep left the
            # residual consistent with the current means, so reuse it.
            kern.mfvb_gamma_u_sweep(
                q.mu_gamma_u, q.mu_u_tilde, q.sig2_u_tilde, mu_u_all, R, wz, ZTZ, starts,
                q.mu_inv_sig2_eps, logit_rho_u,
            )

        # Response step.
        eta = q.mu_beta0 + X @ coef_mean
        if d_non:
            eta = eta + Z @ mu_u_all
        sum_var = _sum_var_eta(q, prepared)
        if gaussian:
            resid = y - eta
            q.lam_sig2_eps = q.mu_inv_a_eps + 0.5 * (float(resid @ resid) + sum_var)
            q.mu_inv_sig2_eps = q.kappa_sig2_eps / q.lam_sig2_eps
            q.lam_a_eps = q.mu_inv_sig2_eps + 1.0 / s_eps_sq
            q.mu_inv_a_eps = q.kappa_a_eps / q.lam_a_eps
        else:
            q.mu_inv_sig2_eps = 1.0
            q.c_loc = eta.copy()
            q.mu_c = eta + two_y_minus_1 * zeta_prime(two_y_minus_1 * eta)
            yT1_adj = float(q.mu_c.sum())
            XTy_adj = X.T @ q.mu_c
            ZTy_adj = Z.T @ q.mu_c

        elbo = compute_elbo(q, prepared, hyper, eta=eta, sum_var=sum_var, cache=elbo_cache)
        if not np.isfinite(elbo):
            raise NumericalError("non-finite objective", where=f"cycle {cycle}", quantity="elbo")
        if elbos:
            prev = elbos[-1]
            rel = abs(elbo - prev) / (1.0 + abs(elbo))
            rel_changes.append(rel)
            if elbo < prev - ELBO_DECREASE_SLACK * (1.0 + abs(elbo)):
                raise InternalConsistencyError(
                    f"objective decreased from {prev:.12g} to {elbo:.12g}",
                    where=f"cycle {cycle}",
                )
            if rel < tol:
                elbos.append(elbo)
                converged = True
                break
        elbos.append(elbo)

    trace = ElboTrace(
        values=np.asarray(elbos),
        rel_changes=np.asarray(rel_changes),
        converged=converged,
        n_cycles=cycle,
    )
    return q, trace


def variational_inclusion_means(q: QParams):
    """The stored inclusion probabilities (surrogates for posterior means)."""
    return q.mu_gamma_beta.copy(), q.mu_gamma_u.copy()
