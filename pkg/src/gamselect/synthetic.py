"""Synthetic-data generation and evaluation metrics for the study harness.

Predictors are independent standard normals; linear effects get standard
normal coefficients and non-linear effects are random quintic polynomials.
The quintics are built on normalized probabilists' Hermite polynomials and
rescaled to unit signal standard deviation, so the Gaussian noise level is
directly interpretable as a noise-to-signal ratio.  Every replication draws
fresh coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import hermite_e
from scipy.special import ndtr

from .errors import InvalidParameterError
from .prepare import BERNOULLI, GAUSSIAN, RawDataset
from .selection import EffectType, SelectionResult, predict_mean

__all__ = [
    "SyntheticSpec",
    "TrueModel",
    "gen_synthetic",
    "misclassification_rate",
    "relative_test_error",
]

_QUINTIC_DEGREE = 5
_HERMITE_NORM = np.sqrt([math.factorial(k) for k in range(1, _QUINTIC_DEGREE + 1)])


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape of one synthetic dataset: effect-type counts and noise level."""

    n: int
    d_zero: int
    d_lin: int
    d_nonlin: int
    sigma_eps: float = 1.0
    response_type: str = GAUSSIAN
    lin_coef_scale: float = 1.0

    def __post_init__(self):
        if min(self.n, self.d_zero, self.d_lin, self.d_nonlin) < 0 or self.n < 1:
            raise InvalidParameterError("counts must be nonnegative and n >= 1")
        if self.d_zero + self.d_lin + self.d_nonlin < 1:
            raise InvalidParameterError("at least one candidate predictor required")
        if self.response_type == GAUSSIAN and not self.sigma_eps > 0:
            raise InvalidParameterError("sigma_eps must be > 0 for Gaussian responses")

    @property
    def d(self) -> int:
        return self.d_zero + self.d_lin + self.d_nonlin


@dataclass
class TrueModel:
    """Evaluable ground truth: per-column coefficients of the generating
    additive function (on the raw predictor scale)."""

    labels: list[EffectType]
    lin_coefs: np.ndarray  # (d,), zero where no linear part
    quintic_coefs: np.ndarray  # (d, 5) normalized-Hermite coefficients
    sigma_eps: float
    response_type: str

    def eval(self, X: np.ndarray) -> np.ndarray:
        """Additive mean function (linear-predictor scale)."""
        X = np.asarray(X, dtype=float)
        eta = X @ self.lin_coefs
        for j in range(X.shape[1]):
            cj = self.quintic_coefs[j]
            if np.any(cj):
                eta += hermite_e.hermeval(X[:, j], np.concatenate([[0.0], cj / _HERMITE_NORM]))
        return eta


def gen_synthetic(spec: SyntheticSpec, rng: np.random.Generator):
    """Draw one dataset; returns (raw, labels, truth).

    Coefficients are drawn before the design so replications with a shared
    stream but different n keep the same generating function.
    """
    d = spec.d
    labels = (
        [EffectType.ZERO] * spec.d_zero + [EffectType.LINEAR] * spec.d_lin + [EffectType.NONLINEAR] * spec.d_nonlin
    )
    lin_coefs = np.zeros(d)
    quintic = np.zeros((d, _QUINTIC_DEGREE))
    for j, lab in enumerate(labels):
        if lab == EffectType.LINEAR:
            lin_coefs[j] = spec.lin_coef_scale * rng.standard_normal()
        elif lab == EffectType.NONLINEAR:
            a = rng.standard_normal(_QUINTIC_DEGREE)
            # Normalized Hermite coordinates make the signal sd equal ||a||;
            # rescale so each non-linear effect has unit signal sd.
            quintic[j] = a / np.linalg.norm(a)
    truth = TrueModel(
        labels=labels, lin_coefs=lin_coefs, quintic_coefs=quintic,
        sigma_eps=spec.sigma_eps, response_type=spec.response_type,
    )
    X = rng.standard_normal((spec.n, d))
    eta = truth.eval(X)
    if spec.response_type == GAUSSIAN:
        y = eta + spec.sigma_eps * rng.standard_normal(spec.n)
    elif spec.response_type == BERNOULLI:
        y = (rng.random(spec.n) < ndtr(eta)).astype(float)
    else:
        raise InvalidParameterError(f"unknown response type {spec.response_type!r}")
    raw = RawDataset(y=y, x_lin=np.empty((spec.n, 0)), x_non=X)
    return raw, labels, truth


def misclassification_rate(truth_labels, estimated) -> float:
    """Fraction of candidate predictors assigned the wrong effect type."""
    est = estimated.effects if isinstance(estimated, SelectionResult) else list(estimated)
    if len(est) != len(truth_labels):
        raise InvalidParameterError(f"length mismatch: {len(truth_labels)} true vs {len(est)} estimated")
    wrong = sum(1 for t, e in zip(truth_labels, est) if t != e)
    return wrong / len(truth_labels)


def relative_test_error(
    fit,
    prepared,
    selection: SelectionResult,
    truth: TrueModel,
    sigma_eps: float,
    n_draws: int = 100_000,
    rng: np.random.Generator | None = None,
) -> float:
    """Expected squared prediction error over fresh predictor draws, divided
    by the irreducible noise variance (so 1 means a perfect fit).

    Gaussian responses only.  Spline terms are evaluated with the training-
    range clipping used by the predictor.
    """
    if prepared.response_type != GAUSSIAN:
        raise InvalidParameterError("relative test error is defined for Gaussian responses")
    if n_draws < 10_000:
        raise InvalidParameterError("n_draws must be at least 10_000")
    if rng is None:
        rng = np.random.default_rng(0)
    d = len(truth.labels)
    X = rng.standard_normal((n_draws, d))
    f_true = truth.eval(X)
    f_hat = predict_mean(fit, prepared, selection, x_non_new=X)
    mse = float(np.mean((f_true - f_hat) ** 2))
    return (mse + sigma_eps**2) / sigma_eps**2
