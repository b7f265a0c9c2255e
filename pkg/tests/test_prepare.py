"""Preprocessing tests: standardization round-trips, sufficient-statistic
identities, block indexing, and demotion of low-cardinality predictors."""

import numpy as np
import pytest

from gamselect import prepare
from gamselect.errors import (
    DegenerateDataError,
    InvalidIndexError,
    InvalidParameterError,
)


def make_raw(n=100, d_lin=2, d_non=3, seed=0, binary=False):
    rng = np.random.default_rng(seed)
    x_lin = rng.standard_normal((n, d_lin))
    x_non = rng.standard_normal((n, d_non))
    eta = x_lin.sum(axis=1) * 0.5 + np.sin(x_non[:, 0])
    if binary:
        y = (eta + rng.standard_normal(n) > 0).astype(float)
    else:
        y = eta + rng.standard_normal(n)
    return prepare.RawDataset(y=y, x_lin=x_lin, x_non=x_non)


class TestStandardize:
    def test_one_two_three(self):
        std, mean, sd = prepare.standardize(np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(std, [-1.0, 0.0, 1.0])
        assert mean == 2.0 and sd == 1.0

    def test_affine_round_trip(self):
        rng = np.random.default_rng(1)
        v = rng.uniform(-40, 3, size=57)
        std, mean, sd = prepare.standardize(v)
        np.testing.assert_allclose(std * sd + mean, v, atol=1e-12)

    def test_constant_vector_degenerate(self):
        with pytest.raises(DegenerateDataError):
            prepare.standardize(np.full(10, 2.5))

    def test_binary_response_passthrough(self):
        raw = make_raw(binary=True)
        pd_ = prepare.prepare(raw, response_type="bernoulli")
        np.testing.assert_array_equal(pd_.y, raw.y)
        assert pd_.y_mean == 0.0 and pd_.y_sd == 1.0


class TestBlockIndex:
    def test_sizes_3_2(self):
        np.testing.assert_array_equal(prepare.build_block_index([3, 2]), [0, 3, 5])

    def test_nondecreasing_starts_at_zero(self):
        idx = prepare.build_block_index([4, 7, 3])
        assert idx[0] == 0
        assert np.all(np.diff(idx) >= 0)


class TestPrepare:
    def test_suffstats_match_recomputation(self):
        pd_ = prepare.prepare(make_raw(n=100, d_lin=2, d_non=3))
        X, Z, y = pd_.X, pd_.Z, pd_.y
        for got, want in [
            (pd_.XTy, X.T @ y),
            (pd_.XTX, X.T @ X),
            (pd_.ZTy, Z.T @ y),
            (pd_.ZTX, Z.T @ X),
            (pd_.ZTZ, Z.T @ Z),
        ]:
            np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)

    def test_columns_standardized(self):
        pd_ = prepare.prepare(make_raw(n=400, seed=5))
        np.testing.assert_allclose(pd_.X.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(pd_.X.std(axis=0, ddof=1), 1.0, atol=1e-10)
        np.testing.assert_allclose(pd_.y.mean(), 0.0, atol=1e-10)

    def test_demotion_below_threshold(self):
        rng = np.random.default_rng(7)
        n = 200
        coarse = rng.integers(0, 10, size=n).astype(float)  # 10 unique values
        fine = rng.standard_normal(n)
        raw = prepare.RawDataset(
            y=rng.standard_normal(n), x_lin=np.empty((n, 0)), x_non=np.column_stack([coarse, fine]),
            non_names=["coarse", "fine"],
        )
        pd_ = prepare.prepare(raw, linear_only_threshold=15)
        kinds = {p.name: p.kind for p in pd_.predictors}
        assert kinds["coarse"] == "linear_only"
        assert kinds["fine"] == "continuous"
        assert [p.demoted for p in pd_.predictors if p.name == "coarse"] == [True]
        assert pd_.d_non == 1

    def test_degenerate_column_reports_name(self):
        n = 50
        raw = prepare.RawDataset(
            y=np.random.default_rng(0).standard_normal(n),
            x_lin=np.ones((n, 1)),
            x_non=np.empty((n, 0)),
            lin_names=["flat"],
        )
        with pytest.raises(DegenerateDataError, match="flat"):
            prepare.prepare(raw)

    def test_binary_response_validation(self):
        raw = make_raw()
        with pytest.raises(InvalidParameterError):
            prepare.prepare(raw, response_type="bernoulli")

    def test_k_default_and_floor(self):
        pd_ = prepare.prepare(make_raw(n=300), K_default=30)
        for p in pd_.continuous_predictors():
            K = pd_.block_sizes[p.block]
            assert K == min(30, p.n_unique // 2)


class TestSubblocks:
    @pytest.fixture
    def pd_(self):
        return prepare.prepare(make_raw(n=120, d_lin=1, d_non=3, seed=11))

    def test_own_block_gram_is_diagonal(self, pd_):
        for j in range(pd_.d_non):
            G = pd_.ZTZ_block(j, j)
            off = np.abs(G - np.diag(np.diag(G))).max()
            assert off <= 1e-8 * np.diag(G).max()

    def test_ztx_block_matches_definition(self, pd_):
        for j in range(pd_.d_non):
            np.testing.assert_allclose(pd_.ZTX_block(j), pd_.Z_block(j).T @ pd_.X, rtol=1e-12, atol=1e-12)

    def test_views_not_copies(self, pd_):
        blk = pd_.ZTy_block(1)
        assert blk.base is pd_.ZTy

    def test_out_of_range_block(self, pd_):
        with pytest.raises(InvalidIndexError):
            pd_.ZTy_block(pd_.d_non)
        with pytest.raises(InvalidIndexError):
            pd_.ZTZ_block(0, -1)
