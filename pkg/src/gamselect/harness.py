"""Replicated simulation cells for the study harness.

Each replication is reproducible from (cell, replication index, master
seed): the data stream and the sampler stream are separate sub-streams of
the master seed, so replications can run in a worker pool in any order.
Coefficients are redrawn every replication; cells sharing a replication
index share generator streams (common random numbers across cell settings).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .api import MCMC, FitResult, fit_model
from .distributions import make_rng
from .hyper import Hyperparameters
from .prepare import GAUSSIAN, prepare
from .synthetic import SyntheticSpec, gen_synthetic, misclassification_rate, relative_test_error

__all__ = ["CellConfig", "run_replication", "run_cell"]

_DATA_STREAM_BASE = 0
_FIT_STREAM_BASE = 1_000_000
_RTE_STREAM_BASE = 2_000_000


@dataclass(frozen=True)
class CellConfig:
    """One simulation cell: a data-generating setting plus a fit method."""

    n: int = 1000
    d_zero: int = 5
    d_lin: int = 5
    d_nonlin: int = 5
    sigma_eps: float = 0.25
    response_type: str = GAUSSIAN
    method: str = MCMC
    hyper: Hyperparameters = field(default_factory=Hyperparameters)
    n_warm: int = 1000
    n_kept: int = 1000
    tol: float = 1e-8
    max_cycles: int = 500
    K: int = 30
    compute_rte: bool = False
    rte_draws: int = 100_000

    def spec(self) -> SyntheticSpec:
        return SyntheticSpec(
            n=self.n, d_zero=self.d_zero, d_lin=self.d_lin, d_nonlin=self.d_nonlin,
            sigma_eps=self.sigma_eps, response_type=self.response_type,
        )


def run_replication(cell: CellConfig, rep: int, master_seed: int) -> dict:
    """One generate-fit-evaluate pass; returns a flat record."""
    data_rng = make_rng(master_seed, _DATA_STREAM_BASE + rep)
    raw, labels, truth = gen_synthetic(cell.spec(), data_rng)
    prepared = prepare(raw, response_type=cell.response_type, K_default=cell.K)
    result: FitResult = fit_model(
        raw,
        response_type=cell.response_type,
        method=cell.method,
        hyper=cell.hyper,
        n_warm=cell.n_warm,
        n_kept=cell.n_kept,
        tol=cell.tol,
        max_cycles=cell.max_cycles,
        rng=make_rng(master_seed, _FIT_STREAM_BASE + rep),
        keep_c=False,
        prepared=prepared,
    )
    record = {
        "rep": rep,
        "n": cell.n,
        "sigma_eps": cell.sigma_eps,
        "method": cell.method,
        "response_type": cell.response_type,
        "tau": result.tau,
        "misclassification": misclassification_rate(labels, result.selection),
        "runtime_seconds": result.runtime_seconds,
        "converged": result.converged,
        "p_beta": [d.p_beta for d in result.selection.decisions],
        "p_u": [d.p_u for d in result.selection.decisions],
        "effects": [d.effect.value for d in result.selection.decisions],
        "true_effects": [lab.value for lab in labels],
    }
    if cell.compute_rte and cell.response_type == GAUSSIAN:
        record["relative_test_error"] = relative_test_error(
            result.fit, prepared, result.selection, truth, cell.sigma_eps,
            n_draws=cell.rte_draws, rng=make_rng(master_seed, _RTE_STREAM_BASE + rep),
        )
    return record


def run_cell(cell: CellConfig, reps: int, master_seed: int, workers: int = 1) -> list[dict]:
    """All replications of a cell, optionally across a process pool."""
    if workers <= 1:
        return [run_replication(cell, r, master_seed) for r in range(reps)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_replication, cell, r, master_seed) for r in range(reps)]
        return [f.result() for f in futures]


def scale_sweep_cells(base: CellConfig, scales) -> list[CellConfig]:
    """Copies of a cell with all three half-Cauchy scales swept."""
    return [replace(base, hyper=base.hyper.with_scales(s)) for s in scales]
