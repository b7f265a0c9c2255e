"""Canonical Demmler-Reinsch spline basis for one continuous predictor.

The basis matrix Z built here satisfies Z'1 = Z'x = 0 with Z'Z diagonal,
and is scaled so the smoothing penalty on its coefficients is spherical.
Construction starts from a cubic B-spline (O'Sullivan) design whitened by
the curvature penalty, then runs a pair of singular value decompositions to
reach the canonical form.  The transform L mapping O'Sullivan columns to
canonical columns is kept so fitted smooths can be evaluated on plotting
grids consistently with the training design.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .errors import (
    DegenerateDataError,
    InvalidParameterError,
    NumericalError,
    OutOfRangeError,
)

__all__ = [
    "KnotSpec",
    "BasisFactorization",
    "place_knots",
    "osullivan_design",
    "canonical_dr_basis",
    "evaluate_on_grid",
]

_SPLINE_DEGREE = 3  # cubic


@dataclass(frozen=True)
class KnotSpec:
    """Interior knots and boundary for one predictor's spline basis.

    ``K`` is the basis size; there are K-2 strictly increasing interior
    knots inside (a, b).  Boundary knots are repeated (coincident) in the
    underlying B-spline sequence.
    """

    K: int
    interior: np.ndarray
    boundary: tuple[float, float]

    def __post_init__(self):
        a, b = self.boundary
        kn = np.asarray(self.interior, dtype=float)
        if self.K < 3:
            raise InvalidParameterError(f"K must be >= 3, got {self.K}")
        if kn.shape != (self.K - 2,):
            raise InvalidParameterError(f"expected {self.K - 2} interior knots, got {kn.shape}")
        if not (np.all(np.diff(kn) > 0) and a < kn[0] and kn[-1] < b):
            raise InvalidParameterError("interior knots must satisfy a < k_1 < ... < k_{K-2} < b")
        object.__setattr__(self, "interior", kn)

    @property
    def full_knots(self) -> np.ndarray:
        a, b = self.boundary
        return np.concatenate([[a] * 4, self.interior, [b] * 4])


@dataclass(frozen=True)
class BasisFactorization:
    """Output of the canonical construction, with intermediates for testing."""

    Z: np.ndarray  # n x K canonical columns
    L: np.ndarray  # (K+2) x (K+2): C_OS @ L reproduces the canonical matrix
    knots: KnotSpec
    os_transform: np.ndarray  # (K+2) x K: B-spline columns -> whitened columns
    U_C: np.ndarray = field(repr=False, default=None)
    d_C: np.ndarray = field(repr=False, default=None)
    V_C: np.ndarray = field(repr=False, default=None)
    U_D: np.ndarray = field(repr=False, default=None)
    d_D: np.ndarray = field(repr=False, default=None)
    s_D: np.ndarray = field(repr=False, default=None)

    @property
    def K(self) -> int:
        return self.knots.K


def place_knots(x, K: int) -> KnotSpec:
    """Interior knots at the k/(K-1) sample quantiles of the distinct x values.

    K is reduced (with a warning) when there are too few distinct values for
    the requested basis size; the construction needs at least K+2 distinct
    values for a full-rank design.
    """
    if K < 3:
        raise InvalidParameterError(f"K must be >= 3, got {K}")
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 3:
        raise InvalidParameterError("x must be a 1-d vector with at least 3 entries")
    uniq = np.unique(x)
    m = uniq.size
    k_eff = min(K, m - 2)
    if k_eff < 3:
        raise DegenerateDataError(f"only {m} distinct values; need at least 5 for a spline basis")
    if k_eff < K:
        warnings.warn(
            f"basis size reduced from K={K} to K={k_eff}: only {m} distinct predictor values",
            UserWarning,
            stacklevel=2,
        )
    fracs = np.arange(1, k_eff - 1) / (k_eff - 1)
    interior = np.quantile(uniq, fracs)
    return KnotSpec(K=k_eff, interior=interior, boundary=(float(uniq[0]), float(uniq[-1])))


def _bspline_design(vals, knots: KnotSpec) -> np.ndarray:
    """Dense n x (K+2) cubic B-spline design at ``vals`` (within boundary)."""
    t = knots.full_knots
    return BSpline.design_matrix(vals, t, _SPLINE_DEGREE).toarray()


def _penalty_matrix(knots: KnotSpec) -> np.ndarray:
    """Exact integral of second-derivative cross-products of the B-splines.

    Second derivatives of cubics are piecewise linear, so their products are
    piecewise quadratic and two-point Gauss-Legendre per inter-knot interval
    integrates them exactly.
    """
    t = knots.full_knots
    p = knots.K + 2
    spl = BSpline(t, np.eye(p), _SPLINE_DEGREE)
    d2 = spl.derivative(2)
    breaks = np.unique(t)
    left, right = breaks[:-1], breaks[1:]
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    offset = half / np.sqrt(3.0)
    nodes = np.concatenate([mid - offset, mid + offset])
    wts = np.concatenate([half, half])
    B2 = d2(nodes)  # (2*(nintervals), p)
    return (B2 * wts[:, None]).T @ B2


def _osullivan_transform(knots: KnotSpec) -> np.ndarray:
    """(K+2) x K map from B-spline columns to penalty-whitened columns.

    Eigen-decomposes the curvature penalty (rank K; the null space holds the
    constant and linear functions) and keeps the positive eigenpairs scaled
    so the penalty quadratic form becomes the identity.
    """
    omega = _penalty_matrix(knots)
    omega = 0.5 * (omega + omega.T)
    evals, evecs = np.linalg.eigh(omega)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    K = knots.K
    pos = evals[:K]
    if pos[-1] <= 0.0 or pos[-1] < 1e-10 * pos[0]:
        raise NumericalError("penalty matrix rank below K", where="osullivan transform", quantity="eigenvalues")
    return evecs[:, :K] / np.sqrt(pos)


def _osullivan_design(x, knots: KnotSpec, T: np.ndarray):
    x = np.asarray(x, dtype=float)
    a, b = knots.boundary
    if np.any(x < a) or np.any(x > b):
        raise OutOfRangeError("x values outside the knot boundary interval")
    if np.ptp(x) == 0.0:
        raise DegenerateDataError("constant predictor: design is rank deficient")
    Z_os = _bspline_design(x, knots) @ T
    return np.column_stack([np.ones_like(x), x, Z_os])


def osullivan_design(x, knots: KnotSpec):
    """Design matrix C_OS = [1 x Z_OS] and penalty indicator D = diag(0,0,1_K).

    Z_OS columns are cubic-spline functions of x whitened so the smoothing
    penalty on their coefficients is the identity.
    """
    C_os = _osullivan_design(x, knots, _osullivan_transform(knots))
    D = np.diag(np.concatenate([[0.0, 0.0], np.ones(knots.K)]))
    return C_os, D


def canonical_dr_basis(x, knots: KnotSpec) -> BasisFactorization:
    """Run the canonical construction: SVD of C_OS, SVD of the penalty-whitened
    core, scaling to equalize the spectrum, column reversal, and extraction of
    the K canonical columns.
    """
    T = _osullivan_transform(knots)
    C_os = _osullivan_design(x, knots, T)
    K = knots.K
    D = np.diag(np.concatenate([[0.0, 0.0], np.ones(K)]))
    try:
        U_C, d_C, VT_C = np.linalg.svd(C_os, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("SVD of the O'Sullivan design failed", where="canonical basis") from exc
    V_C = VT_C.T
    if d_C[-1] <= 0.0 or d_C[-1] < np.finfo(float).eps * max(C_os.shape) * d_C[0]:
        raise NumericalError(
            "rank-deficient design",
            where="canonical basis",
            quantity=f"condition {d_C[0] / max(d_C[-1], np.finfo(float).tiny):.3e}",
        )
    inv_dC = 1.0 / d_C
    # The whitened penalty is M = A'A with A = D V_C diag(1/d_C); taking the
    # SVD of the factor instead of M itself halves the exponent of the
    # condition number, which keeps the null directions (and hence the
    # Z'1 = Z'x = 0 identities) accurate for large, ill-scaled bases.
    A = D @ (V_C * inv_dC[None, :])
    try:
        _, sv, VT_A = np.linalg.svd(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("SVD of the whitened penalty failed", where="canonical basis") from exc
    U_D = VT_A.T
    d_D = sv * sv
    # numpy returns singular values in non-increasing order, which the
    # scaling step below assumes.
    omega21 = np.sqrt(d_D[K - 1])
    with np.errstate(divide="ignore"):
        s_D = omega21 / np.sqrt(d_D)
    s_D[K:] = 1.0
    C_cdr = (U_C @ U_D) * s_D[None, :]
    L = (V_C * inv_dC[None, :]) @ U_D * s_D[None, :]
    # Reverse columns so the penalty-null (constant/linear) directions come
    # first; the canonical columns are then columns 3..K+2.
    C_cdr = C_cdr[:, ::-1]
    L = np.ascontiguousarray(L[:, ::-1])
    Z = np.ascontiguousarray(C_cdr[:, 2:])
    return BasisFactorization(
        Z=Z, L=L, knots=knots, os_transform=T, U_C=U_C, d_C=d_C, V_C=V_C, U_D=U_D, d_D=d_D, s_D=s_D
    )


def evaluate_on_grid(grid, knots: KnotSpec, basis: BasisFactorization) -> np.ndarray:
    """Canonical basis values on a grid, consistent with the training Z.

    Builds the O'Sullivan columns on the grid with the stored whitening
    transform and applies L; grid points must lie inside the boundary
    interval.
    """
    grid = np.asarray(grid, dtype=float)
    a, b = knots.boundary
    if np.any(grid < a) or np.any(grid > b):
        raise OutOfRangeError(f"grid points outside the training range [{a}, {b}]")
    Z_os = _bspline_design(grid, knots) @ basis.os_transform
    C_os = np.column_stack([np.ones_like(grid), grid, Z_os])
    return (C_os @ basis.L)[:, 2:]
