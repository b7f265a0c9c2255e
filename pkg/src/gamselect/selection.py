"""Turn inclusion probabilities into effect-type decisions and summaries.

The sparsity threshold tau compares inclusion probabilities against 1 - tau:
smaller tau gives sparser selected models.  Summaries (coefficient tables,
curve slices, predictions) are reported on the original data scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import ndtr

from . import splines
from .errors import InvalidParameterError, OutOfRangeError
from .gibbs import GibbsSamples, posterior_inclusion_means
from .mfvb import QParams, variational_inclusion_means
from .prepare import GAUSSIAN, PredictorInfo, PreparedData

__all__ = [
    "EffectType",
    "PredictorDecision",
    "SelectionResult",
    "classify",
    "select",
    "summarize_linear",
    "curve_slice",
    "predict_mean",
]

Z975 = 1.959963984540054  # 97.5% standard-normal quantile


class EffectType(str, Enum):
    ZERO = "zero"
    LINEAR = "linear"
    NONLINEAR = "nonlinear"


@dataclass
class PredictorDecision:
    name: str
    kind: str  # "linear_only" or "continuous"
    p_beta: float
    p_u: float | None
    effect: EffectType


@dataclass
class SelectionResult:
    decisions: list[PredictorDecision]
    tau: float

    def effect_of(self, name: str) -> EffectType:
        for dec in self.decisions:
            if dec.name == name:
                return dec.effect
        raise KeyError(name)

    def by_effect(self, effect: EffectType) -> list[PredictorDecision]:
        return [d for d in self.decisions if d.effect == effect]

    @property
    def effects(self) -> list[EffectType]:
        return [d.effect for d in self.decisions]


def classify(p_beta: float, p_u: float | None, tau: float) -> EffectType:
    """Three-category rule: zero if both inclusion probabilities are at most
    1 - tau; linear if only the coefficient one exceeds it; else non-linear.
    Predictors without a spline part use the two-category rule."""
    if not 0.0 < tau < 1.0:
        raise InvalidParameterError(f"tau must lie in (0, 1), got {tau!r}")
    if not 0.0 <= p_beta <= 1.0 or (p_u is not None and not 0.0 <= p_u <= 1.0):
        raise InvalidParameterError("inclusion probabilities must lie in [0, 1]")
    thresh = 1.0 - tau
    if p_u is None:
        return EffectType.LINEAR if p_beta > thresh else EffectType.ZERO
    if max(p_beta, p_u) <= thresh:
        return EffectType.ZERO
    if p_beta > thresh and p_u <= thresh:
        return EffectType.LINEAR
    return EffectType.NONLINEAR


def _inclusion_probs(fit):
    if isinstance(fit, GibbsSamples):
        return posterior_inclusion_means(fit)
    if isinstance(fit, QParams):
        return variational_inclusion_means(fit)
    raise InvalidParameterError(f"unsupported fit object {type(fit).__name__}")


def select(fit, prepared: PreparedData, tau: float) -> SelectionResult:
    """Classify every candidate predictor from a fit's inclusion probabilities."""
    pb, pu = _inclusion_probs(fit)
    decisions = []
    for info in prepared.predictors:
        p_beta = float(pb[info.col])
        p_u = float(pu[info.block]) if info.kind == "continuous" else None
        decisions.append(
            PredictorDecision(
                name=info.name, kind=info.kind, p_beta=p_beta, p_u=p_u,
                effect=classify(p_beta, p_u, tau),
            )
        )
    return SelectionResult(decisions=decisions, tau=tau)


def _coef_scale(info: PredictorInfo, prepared: PreparedData) -> float:
    """Standardized-to-original multiplier for a linear coefficient."""
    scale = 1.0 / info.sd
    if prepared.response_type == GAUSSIAN:
        scale *= prepared.y_sd
    return scale


@dataclass
class CoefficientSummary:
    name: str
    mean: float
    lower: float
    upper: float


def summarize_linear(fit, prepared: PreparedData, selection: SelectionResult) -> list[CoefficientSummary]:
    """Original-scale posterior means and equal-tailed 95% intervals for the
    predictors selected as linear.

    For sampler fits the interval endpoints can be exactly zero because the
    coefficient chains carry the point mass.  Variational intervals use a
    normal approximation with the factorized product variance; these tend to
    be too narrow for binary responses.
    """
    out = []
    by_name = {info.name: info for info in prepared.predictors}
    for dec in selection.by_effect(EffectType.LINEAR):
        info = by_name[dec.name]
        scale = _coef_scale(info, prepared)
        if isinstance(fit, GibbsSamples):
            if fit.n_kept < 1:
                raise InvalidParameterError("empty chain")
            ch = fit.beta[:, info.col] * scale
            lo, hi = np.percentile(ch, [2.5, 97.5])
            out.append(CoefficientSummary(dec.name, float(ch.mean()), float(lo), float(hi)))
        else:
            g = fit.mu_gamma_beta[info.col]
            m = fit.mu_beta_tilde[info.col]
            s2 = fit.Sigma_beta_tilde[info.col, info.col]
            point = g * m * scale
            sd = np.sqrt(g * (s2 + (1.0 - g) * m * m)) * abs(scale)
            out.append(CoefficientSummary(dec.name, float(point), float(point - Z975 * sd), float(point + Z975 * sd)))
    return out


@dataclass
class CurveSlice:
    name: str
    grid: np.ndarray  # original predictor units
    estimate: np.ndarray  # original response scale (probability for binary)
    lower: np.ndarray
    upper: np.ndarray


def _median_design(prepared: PreparedData, skip_col: int):
    """Standardized medians for every predictor, and the spline-basis rows at
    those medians, with the sliced predictor's entries zeroed."""
    med = np.median(prepared.X, axis=0)
    med_x = med.copy()
    med_x[skip_col] = 0.0
    zmed = np.zeros(prepared.Z.shape[1])
    for info in prepared.continuous_predictors():
        if info.col == skip_col:
            continue
        sl = prepared.block_slice(info.block)
        zmed[sl] = splines.evaluate_on_grid(np.array([med[info.col]]), info.basis.knots, info.basis)[0]
    return med_x, zmed


def _product_variances(q: QParams):
    """Diagonal variances of gamma*coefficient under the factorized q."""
    g = q.mu_gamma_beta
    var_b = g * (np.diag(q.Sigma_beta_tilde) + (1.0 - g) * q.mu_beta_tilde**2)
    g_rep = np.repeat(q.mu_gamma_u, q.block_sizes) if q.d_non else np.empty(0)
    var_u = g_rep * (q.sig2_u_tilde + (1.0 - g_rep) * q.mu_u_tilde**2)
    return var_b, var_u


def curve_slice(
    fit,
    prepared: PreparedData,
    name: str,
    grid: np.ndarray | None = None,
    grid_size: int = 101,
) -> CurveSlice:
    """Fitted-effect slice for one continuous predictor.

    All other predictors are held at their sample medians.  The grid is in
    original predictor units and must stay inside the training range; the
    output is on the original response scale (probability scale for binary
    responses, de-standardized units for Gaussian ones).
    """
    info = next((p for p in prepared.predictors if p.name == name), None)
    if info is None:
        raise InvalidParameterError(f"unknown predictor {name!r}")
    if info.kind != "continuous":
        raise InvalidParameterError(f"predictor {name!r} has no spline part to slice")
    a, b = info.basis.knots.boundary
    if grid is None:
        grid = info.mean + info.sd * np.linspace(a, b, grid_size)
    grid = np.asarray(grid, dtype=float)
    std_grid = (grid - info.mean) / info.sd
    if np.any(std_grid < a) or np.any(std_grid > b):
        raise OutOfRangeError(f"grid outside the training range of {name!r}")

    Zg = splines.evaluate_on_grid(std_grid, info.basis.knots, info.basis)
    med_x, zmed = _median_design(prepared, info.col)
    sl = prepared.block_slice(info.block)
    zmed_own = zmed.copy()

    binary = prepared.response_type != GAUSSIAN
    if isinstance(fit, GibbsSamples):
        beta_ch = fit.beta
        u_ch = fit.u
        const = fit.beta0 + beta_ch @ med_x + u_ch @ zmed_own
        curves = const[:, None] + np.outer(beta_ch[:, info.col], std_grid) + u_ch[:, sl] @ Zg.T
        if binary:
            curves = ndtr(curves)
        else:
            curves = prepared.y_mean + prepared.y_sd * curves
        est = curves.mean(axis=0)
        lo, hi = np.percentile(curves, [2.5, 97.5], axis=0)
    else:
        coef = fit.coef_means()
        u_mean = fit.u_means()
        eta = (
            fit.mu_beta0
            + float(coef @ med_x)
            + float(u_mean @ zmed_own)
            + coef[info.col] * std_grid
            + Zg @ u_mean[sl]
        )
        var_b, var_u = _product_variances(fit)
        x_row2 = med_x**2
        z_row2 = zmed_own**2
        var = np.full(std_grid.size, fit.sig2_beta0 + float(x_row2 @ var_b) + float(z_row2 @ var_u))
        var += std_grid**2 * var_b[info.col] + Zg**2 @ var_u[sl]
        sd = np.sqrt(var)
        lo_eta, hi_eta = eta - Z975 * sd, eta + Z975 * sd
        if binary:
            est, lo, hi = ndtr(eta), ndtr(lo_eta), ndtr(hi_eta)
        else:
            est = prepared.y_mean + prepared.y_sd * eta
            lo = prepared.y_mean + prepared.y_sd * lo_eta
            hi = prepared.y_mean + prepared.y_sd * hi_eta
    return CurveSlice(name=name, grid=grid, estimate=est, lower=lo, upper=hi)


def _point_estimates(fit):
    """Intercept / coefficient / spline-coefficient means from either fit."""
    if isinstance(fit, GibbsSamples):
        return float(fit.beta0.mean()), fit.beta.mean(axis=0), fit.u.mean(axis=0)
    return float(fit.mu_beta0), fit.coef_means(), fit.u_means()


def predict_mean(
    fit,
    prepared: PreparedData,
    selection: SelectionResult,
    x_lin_new: np.ndarray | None = None,
    x_non_new: np.ndarray | None = None,
) -> np.ndarray:
    """Selected-model point predictions on new raw columns.

    Terms classified zero are omitted; linear effects contribute only their
    coefficient; non-linear effects contribute coefficient plus smooth.
    Spline inputs are clipped to the training range (constant extension).
    Returns original-scale means (probabilities for binary responses).
    """
    layouts = {"lin": x_lin_new, "non": x_non_new}
    sizes = [0 if v is None else np.asarray(v).shape[0] for v in layouts.values() if v is not None]
    if not sizes:
        raise InvalidParameterError("no new data supplied")
    m = sizes[0]
    beta0, coef, u_mean = _point_estimates(fit)
    eta = np.full(m, beta0)
    for info in prepared.predictors:
        effect = selection.effect_of(info.name)
        if effect == EffectType.ZERO:
            continue
        src = layouts[info.src]
        if src is None:
            raise InvalidParameterError(f"missing raw block {info.src!r} for predictor {info.name!r}")
        col = (np.asarray(src, dtype=float)[:, info.src_col] - info.mean) / info.sd
        eta += coef[info.col] * col
        if effect == EffectType.NONLINEAR and info.basis is not None:
            a, b = info.basis.knots.boundary
            zg = splines.evaluate_on_grid(np.clip(col, a, b), info.basis.knots, info.basis)
            eta += zg @ u_mean[prepared.block_slice(info.block)]
    if prepared.response_type == GAUSSIAN:
        return prepared.y_mean + prepared.y_sd * eta
    return ndtr(eta)
