"""Standardize inputs, build design matrices and sufficient statistics.

This module is the single producer of the matrices the fitting algorithms
consume: the standardized linear design X, the per-predictor canonical
spline blocks Z_j, and the cross-product matrices X'y, X'X, Z'y, Z'X, Z'Z.
Downstream fitters touch raw rows only for the Gaussian residual step and
the binary latent-variable step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import splines
from .errors import (
    CapacityError,
    DegenerateDataError,
    InvalidIndexError,
    InvalidParameterError,
)

__all__ = [
    "RawDataset",
    "PredictorInfo",
    "PreparedData",
    "standardize",
    "prepare",
    "build_block_index",
]

GAUSSIAN = "gaussian"
BERNOULLI = "bernoulli"

#: continuous predictors with fewer distinct values than this are demoted to
#: linear-only treatment (penalized splines have borderline viability there)
DEFAULT_LINEAR_ONLY_THRESHOLD = 15

DEFAULT_K = 30


@dataclass
class RawDataset:
    """Raw input columns before standardization.

    ``x_lin`` holds predictors that may only enter linearly (e.g. binary
    indicators); ``x_non`` holds continuous candidates that may enter
    linearly or non-linearly.  Either block may be empty.
    """

    y: np.ndarray
    x_lin: np.ndarray  # (n, d_lin)
    x_non: np.ndarray  # (n, d_non)
    lin_names: list[str] = field(default_factory=list)
    non_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        n = self.y.size
        self.x_lin = np.asarray(self.x_lin, dtype=float).reshape(n, -1) if np.size(self.x_lin) else np.empty((n, 0))
        self.x_non = np.asarray(self.x_non, dtype=float).reshape(n, -1) if np.size(self.x_non) else np.empty((n, 0))
        if self.x_lin.shape[0] != n or self.x_non.shape[0] != n:
            raise InvalidParameterError("predictor columns must have the same length as y")
        if not self.lin_names:
            self.lin_names = [f"x_lin{j + 1}" for j in range(self.x_lin.shape[1])]
        if not self.non_names:
            self.non_names = [f"x{j + 1}" for j in range(self.x_non.shape[1])]
        if len(self.lin_names) != self.x_lin.shape[1] or len(self.non_names) != self.x_non.shape[1]:
            raise InvalidParameterError("name lists must match the number of columns")

    @property
    def n(self) -> int:
        return self.y.size


@dataclass
class PredictorInfo:
    """Bookkeeping for one candidate predictor (one column of X)."""

    name: str
    kind: str  # "linear_only" or "continuous"
    col: int  # column index in X
    mean: float
    sd: float
    n_unique: int
    block: int | None = None  # spline block index (continuous only)
    basis: splines.BasisFactorization | None = None
    demoted: bool = False  # continuous candidate demoted to linear-only
    src: str = ""  # which raw block the column came from: "lin" or "non"
    src_col: int = -1  # column index within that raw block


def standardize(v):
    """Center and scale to sample mean 0, sample sd 1 (n-1 denominator).

    Returns ``(standardized, mean, sd)`` so the affine map can be inverted.
    """
    v = np.asarray(v, dtype=float)
    mean = float(v.mean())
    sd = float(v.std(ddof=1))
    if not np.isfinite(sd) or sd == 0.0:
        raise DegenerateDataError("constant column cannot be standardized")
    return (v - mean) / sd, mean, sd


def build_block_index(block_sizes) -> np.ndarray:
    """Cumulative block index: c_1 = 0, c_{j+1} = K_1 + ... + K_j."""
    return np.concatenate([[0], np.cumsum(np.asarray(block_sizes, dtype=int))])


@dataclass
class PreparedData:
    """Output of the preprocessing pass; immutable once built."""

    response_type: str
    y: np.ndarray
    y_mean: float
    y_sd: float
    X: np.ndarray
    Z: np.ndarray
    predictors: list[PredictorInfo]
    block_sizes: np.ndarray
    block_index: np.ndarray
    XTy: np.ndarray
    XTX: np.ndarray
    ZTy: np.ndarray
    ZTX: np.ndarray
    ZTZ: np.ndarray
    _wz_cache: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def d_non(self) -> int:
        return len(self.block_sizes)

    @property
    def wZ(self) -> np.ndarray:
        """Concatenated diagonals of the own-block Gram matrices Z_j'Z_j."""
        if self._wz_cache is None:
            object.__setattr__(self, "_wz_cache", np.diag(self.ZTZ).copy())
        return self._wz_cache

    def _check_block(self, j):
        if not 0 <= j < self.d_non:
            raise InvalidIndexError(f"block index {j} out of range [0, {self.d_non})")

    def block_slice(self, j) -> slice:
        self._check_block(j)
        return slice(int(self.block_index[j]), int(self.block_index[j + 1]))

    def ZTy_block(self, j) -> np.ndarray:
        return self.ZTy[self.block_slice(j)]

    def ZTX_block(self, j) -> np.ndarray:
        return self.ZTX[self.block_slice(j), :]

    def ZTZ_block(self, j, jp) -> np.ndarray:
        return self.ZTZ[self.block_slice(j), self.block_slice(jp)]

    def Z_block(self, j) -> np.ndarray:
        return self.Z[:, self.block_slice(j)]

    def continuous_predictors(self) -> list[PredictorInfo]:
        return [p for p in self.predictors if p.kind == "continuous"]


def _validate_binary(y):
    vals = np.unique(y)
    if not np.all(np.isin(vals, (0.0, 1.0))):
        raise InvalidParameterError(f"binary response must contain only 0/1, found values {vals[:5]}")


def prepare(
    data: RawDataset,
    response_type: str = GAUSSIAN,
    K_default: int = DEFAULT_K,
    linear_only_threshold: int = DEFAULT_LINEAR_ONLY_THRESHOLD,
    max_memory_gb: float = 16.0,
) -> PreparedData:
    """Standardize columns, build spline blocks, and cache cross-products.

    Continuous candidates with fewer than ``linear_only_threshold`` distinct
    values are demoted to linear-only treatment.  The spline basis size for
    block j is ``min(K_default, n_unique_j // 2)`` with a floor of 3.
    """
    if response_type not in (GAUSSIAN, BERNOULLI):
        raise InvalidParameterError(f"unknown response type {response_type!r}")
    if data.n < 3:
        raise InvalidParameterError("need at least 3 observations")

    if response_type == BERNOULLI:
        _validate_binary(data.y)
        y, y_mean, y_sd = data.y.copy(), 0.0, 1.0
    else:
        if np.unique(data.y).size < 2:
            raise DegenerateDataError("response is constant")
        y, y_mean, y_sd = standardize(data.y)

    lin_cols: list[np.ndarray] = []
    lin_infos: list[PredictorInfo] = []
    cont_specs: list[tuple[str, np.ndarray, float, float, int, int]] = []

    for i, (name, col) in enumerate(zip(data.lin_names, data.x_lin.T)):
        try:
            std, m, s = standardize(col)
        except DegenerateDataError as exc:
            raise DegenerateDataError(f"column {name!r}: {exc}") from exc
        lin_cols.append(std)
        lin_infos.append(
            PredictorInfo(
                name=name, kind="linear_only", col=-1, mean=m, sd=s,
                n_unique=int(np.unique(col).size), src="lin", src_col=i,
            )
        )

    demoted_cols: list[np.ndarray] = []
    demoted_infos: list[PredictorInfo] = []
    for i, (name, col) in enumerate(zip(data.non_names, data.x_non.T)):
        nu = int(np.unique(col).size)
        try:
            std, m, s = standardize(col)
        except DegenerateDataError as exc:
            raise DegenerateDataError(f"column {name!r}: {exc}") from exc
        if nu < linear_only_threshold:
            demoted_cols.append(std)
            demoted_infos.append(
                PredictorInfo(
                    name=name, kind="linear_only", col=-1, mean=m, sd=s,
                    n_unique=nu, demoted=True, src="non", src_col=i,
                )
            )
        else:
            cont_specs.append((name, std, m, s, nu, i))

    n = data.n
    d_non = len(cont_specs)
    sum_K_bound = d_non * max(K_default, 3)
    est_bytes = 8.0 * (n * sum_K_bound + sum_K_bound**2 + n * (len(lin_infos) + len(demoted_infos) + d_non))
    if est_bytes > max_memory_gb * 2**30:
        raise CapacityError(
            f"estimated working set {est_bytes / 2**30:.1f} GiB exceeds the {max_memory_gb} GiB limit"
        )

    cont_cols: list[np.ndarray] = []
    cont_infos: list[PredictorInfo] = []
    Z_blocks: list[np.ndarray] = []
    for j, (name, std, m, s, nu, i) in enumerate(cont_specs):
        K_j = max(3, min(K_default, nu // 2))
        knots = splines.place_knots(std, K_j)
        basis = splines.canonical_dr_basis(std, knots)
        cont_cols.append(std)
        cont_infos.append(
            PredictorInfo(
                name=name, kind="continuous", col=-1, mean=m, sd=s,
                n_unique=nu, block=j, basis=basis, src="non", src_col=i,
            )
        )
        Z_blocks.append(basis.Z)

    infos = lin_infos + demoted_infos + cont_infos
    cols = lin_cols + demoted_cols + cont_cols
    if not infos:
        raise InvalidParameterError("no usable predictor columns")
    X = np.column_stack(cols)
    for c, info in enumerate(infos):
        info.col = c

    block_sizes = np.array([b.shape[1] for b in Z_blocks], dtype=int)
    Z = np.hstack(Z_blocks) if Z_blocks else np.empty((n, 0))

    return PreparedData(
        response_type=response_type,
        y=y,
        y_mean=y_mean,
        y_sd=y_sd,
        X=X,
        Z=Z,
        predictors=infos,
        block_sizes=block_sizes,
        block_index=build_block_index(block_sizes),
        XTy=X.T @ y,
        XTX=X.T @ X,
        ZTy=Z.T @ y,
        ZTX=Z.T @ X,
        ZTZ=Z.T @ Z,
    )
