"""Command-line front end: CSV fitting, simulation studies, timing runs.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 the
variational fit hit its cycle cap without converging.

The deterministic outputs (effect tables, coefficient tables, curve grids,
report.json) are byte-identical across reruns with the same configuration
and seed; wall-clock measurements go to a separate timing.json that is
excluded from that contract.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .api import MCMC, MFVB, fit_model
from .distributions import make_rng
from .errors import GamSelectError, NumericalError
from .harness import CellConfig, run_cell
from .hyper import Hyperparameters
from .prepare import BERNOULLI, GAUSSIAN, RawDataset
from .selection import EffectType, classify, curve_slice, summarize_linear
from .synthetic import misclassification_rate

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_NONCONVERGED = 4


def _read_csv(path: str, response: str, linear_only: list[str], family: str) -> RawDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = list(reader)
    if response not in header:
        raise ValueError(f"response column {response!r} not found in {header}")
    unknown = [c for c in linear_only if c not in header]
    if unknown:
        raise ValueError(f"--linear-only columns not in header: {unknown}")
    if not rows:
        raise ValueError(f"{path}: no data rows")
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric cell ({exc})") from exc
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    cols = {name: data[:, j] for j, name in enumerate(header)}
    y = cols.pop(response)
    if family == BERNOULLI and not np.all(np.isin(np.unique(y), (0.0, 1.0))):
        raise ValueError("binary mode requires a 0/1 response column")
    lin_names = [c for c in header if c in linear_only and c != response]
    non_names = [c for c in header if c != response and c not in linear_only]
    x_lin = np.column_stack([cols[c] for c in lin_names]) if lin_names else np.empty((y.size, 0))
    x_non = np.column_stack([cols[c] for c in non_names]) if non_names else np.empty((y.size, 0))
    return RawDataset(y=y, x_lin=x_lin, x_non=x_non, lin_names=lin_names, non_names=non_names)


def _hyper_from_args(args) -> Hyperparameters:
    return Hyperparameters(
        sigma_beta0=args.sigma_beta0,
        s_beta=args.s_beta,
        s_eps=args.s_eps,
        s_u=args.s_u,
        rho_beta=args.rho_beta,
        rho_u=args.rho_u,
        tau=args.tau,
    )


def _config_echo(args, method, tau) -> dict:
    return {
        "version": __version__,
        "family": args.family,
        "method": method,
        "tau": tau,
        "n_warm": args.nwarm,
        "n_kept": args.nkept,
        "tol": args.tol,
        "max_cycles": args.max_cycles,
        "seed": args.seed,
        "K": args.K,
        "sigma_beta0": args.sigma_beta0,
        "s_beta": args.s_beta,
        "s_eps": args.s_eps,
        "s_u": args.s_u,
        "rho_beta": args.rho_beta,
        "rho_u": args.rho_u,
    }


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    return repr(float(x))


def cmd_fit(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    raw = _read_csv(args.csv, args.response, args.linear_only, args.family)
    hyper = _hyper_from_args(args)
    methods = [MCMC, MFVB] if args.method == "both" else [args.method]

    results = {}
    for method in methods:
        results[method] = fit_model(
            raw,
            response_type=args.family,
            method=method,
            hyper=hyper,
            n_warm=args.nwarm,
            n_kept=args.nkept,
            tol=args.tol,
            max_cycles=args.max_cycles,
            K=args.K,
            rng=make_rng(args.seed),
        )

    effect_rows, coef_rows, curve_rows = [], [], []
    report: dict = {"config": _config_echo(args, args.method, {m: r.tau for m, r in results.items()}), "methods": {}}
    for method, res in results.items():
        for dec in res.selection.decisions:
            effect_rows.append(
                [method, dec.name, dec.kind, _fmt(dec.p_beta), "" if dec.p_u is None else _fmt(dec.p_u), dec.effect.value]
            )
        for s in summarize_linear(res.fit, res.prepared, res.selection):
            coef_rows.append([method, s.name, _fmt(s.mean), _fmt(s.lower), _fmt(s.upper)])
        for dec in res.selection.by_effect(EffectType.NONLINEAR):
            cs = curve_slice(res.fit, res.prepared, dec.name)
            for g, e, lo, hi in zip(cs.grid, cs.estimate, cs.lower, cs.upper):
                curve_rows.append([method, dec.name, _fmt(g), _fmt(e), _fmt(lo), _fmt(hi)])
        mrep: dict = {
            "tau": res.tau,
            "selected": {d.name: d.effect.value for d in res.selection.decisions},
            "n_selected": sum(d.effect != EffectType.ZERO for d in res.selection.decisions),
        }
        if method == MFVB:
            mrep["converged"] = res.converged
            mrep["n_cycles"] = res.trace.n_cycles
            mrep["elbo_trace"] = [float(v) for v in res.trace.values]
        else:
            mrep["posterior_inclusion_beta"] = [d.p_beta for d in res.selection.decisions]
        report["methods"][method] = mrep

    if len(results) == 2:
        sel = {m: results[m].selection for m in results}
        names = [d.name for d in sel[MCMC].decisions]
        both_selected = sum(
            1
            for nm in names
            if sel[MCMC].effect_of(nm) != EffectType.ZERO and sel[MFVB].effect_of(nm) != EffectType.ZERO
        )
        agree = sum(1 for nm in names if sel[MCMC].effect_of(nm) == sel[MFVB].effect_of(nm))
        report["method_overlap"] = {
            "selected_by_mcmc": sum(d.effect != EffectType.ZERO for d in sel[MCMC].decisions),
            "selected_by_mfvb": sum(d.effect != EffectType.ZERO for d in sel[MFVB].decisions),
            "selected_in_common": both_selected,
            "same_effect_type": agree,
        }

    _write_csv(out / "effect_types.csv", ["method", "predictor", "kind", "p_beta", "p_u", "effect"], effect_rows)
    _write_csv(out / "coefficients.csv", ["method", "predictor", "mean", "lower", "upper"], coef_rows)
    _write_csv(out / "curves.csv", ["method", "predictor", "grid", "estimate", "lower", "upper"], curve_rows)
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "timing.json", "w") as fh:
        json.dump({m: {"fit_seconds": r.runtime_seconds} for m, r in results.items()}, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if any(not r.converged for r in results.values()):
        print("warning: variational fit hit max_cycles without converging", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _parse_grid(text: str, cast=float):
    return [cast(tok) for tok in text.split(",") if tok]


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hyper = _hyper_from_args(args)
    methods = [MCMC, MFVB] if args.method == "both" else [args.method]
    n_grid = _parse_grid(args.n_grid, int)
    sigma_grid = _parse_grid(args.sigma_eps_grid) if args.family == GAUSSIAN else [1.0]
    tau_grid = _parse_grid(args.tau_grid) if args.tau_grid else None
    scale_grid = _parse_grid(args.scale_grid) if args.scale_grid else [None]

    rows = []
    for n in n_grid:
        for sig in sigma_grid:
            for method in methods:
                for scale in scale_grid:
                    h = hyper if scale is None else hyper.with_scales(scale)
                    cell = CellConfig(
                        n=n,
                        d_zero=args.d_zero,
                        d_lin=args.d_lin,
                        d_nonlin=args.d_nonlin,
                        sigma_eps=sig,
                        response_type=args.family,
                        method=method,
                        hyper=h,
                        n_warm=args.nwarm,
                        n_kept=args.nkept,
                        tol=args.tol,
                        max_cycles=args.max_cycles,
                        K=args.K,
                        compute_rte=args.rte and args.family == GAUSSIAN,
                    )
                    for rec in run_cell(cell, reps=args.reps, master_seed=args.seed, workers=args.workers):
                        taus = tau_grid or [rec["tau"]]
                        for tau in taus:
                            mis = _misclassification_at_tau(rec, tau)
                            rows.append(
                                [
                                    n, sig, method, "" if scale is None else scale, tau, rec["rep"],
                                    _fmt(mis), _fmt(rec.get("relative_test_error", np.nan)),
                                    _fmt(rec["runtime_seconds"]), int(rec["converged"]),
                                ]
                            )
    _write_csv(
        out / "simulation.csv",
        ["n", "sigma_eps", "method", "scale", "tau", "rep", "misclassification", "relative_test_error",
         "runtime_seconds", "converged"],
        rows,
    )
    meta = {
        "design": {
            "d_zero": args.d_zero, "d_lin": args.d_lin, "d_nonlin": args.d_nonlin,
            "family": args.family, "reps": args.reps, "seed": args.seed, "K": args.K,
        },
        "grids": {"n": n_grid, "sigma_eps": sigma_grid, "tau": tau_grid, "scale": scale_grid},
    }
    with open(out / "simulation_meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def _misclassification_at_tau(rec: dict, tau: float) -> float:
    effects = [
        classify(pb, pu, tau).value for pb, pu in zip(rec["p_beta"], rec["p_u"])
    ]
    return misclassification_rate(rec["true_effects"], [EffectType(e) for e in effects])


def cmd_benchmark(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    methods = [MCMC, MFVB] if args.method == "both" else [args.method]
    n_grid = _parse_grid(args.n_grid, int)
    rows = []
    slopes = {}
    for method in methods:
        times = {}
        for n in n_grid:
            cell = CellConfig(
                n=n, d_zero=0, d_lin=0, d_nonlin=args.d_non, sigma_eps=args.sigma_eps,
                response_type=args.family, method=method, n_warm=args.nwarm, n_kept=args.nkept,
                tol=args.tol, max_cycles=args.max_cycles, K=args.K,
            )
            recs = run_cell(cell, reps=args.reps, master_seed=args.seed, workers=args.workers)
            times[n] = [r["runtime_seconds"] for r in recs]
            for r in recs:
                rows.append([method, n, r["rep"], _fmt(r["runtime_seconds"]), int(r["converged"])])
        xs = np.log(np.repeat(n_grid, args.reps).astype(float))
        ys = np.log(np.concatenate([times[n] for n in n_grid]))
        slope = float(np.polyfit(xs, ys, 1)[0])
        slopes[method] = slope
    _write_csv(out / "benchmark.csv", ["method", "n", "rep", "runtime_seconds", "converged"], rows)
    with open(out / "benchmark_meta.json", "w") as fh:
        json.dump({"loglog_slope": slopes, "n_grid": n_grid, "d_non": args.d_non, "reps": args.reps},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(slopes))
    return EXIT_OK


def _add_common_fit_flags(p):
    p.add_argument("--method", choices=["mcmc", "mfvb", "both"], default="mcmc")
    p.add_argument("--family", choices=[GAUSSIAN, BERNOULLI], default=GAUSSIAN)
    p.add_argument("--tau", type=float, default=None, help="sparsity threshold (default 0.5 mcmc / 0.1 mfvb)")
    p.add_argument("--nwarm", type=int, default=1000)
    p.add_argument("--nkept", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-cycles", type=int, default=500)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--K", type=int, default=30)
    p.add_argument("--sigma-beta0", type=float, default=1e5)
    p.add_argument("--s-beta", type=float, default=1000.0)
    p.add_argument("--s-eps", type=float, default=1000.0)
    p.add_argument("--s-u", type=float, default=1000.0)
    p.add_argument("--rho-beta", type=float, default=0.5)
    p.add_argument("--rho-u", type=float, default=0.5)
    p.add_argument("--out", default="gamselect_out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gamselect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a CSV dataset and select effect types")
    p_fit.add_argument("csv")
    p_fit.add_argument("--response", required=True, help="name of the response column")
    p_fit.add_argument(
        "--linear-only", type=lambda s: [t for t in s.split(",") if t], default=[],
        help="comma-separated predictors restricted to zero-vs-linear",
    )
    _add_common_fit_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="replicated synthetic study over a settings grid")
    p_sim.add_argument("--n-grid", default="1000")
    p_sim.add_argument("--sigma-eps-grid", default="0.25")
    p_sim.add_argument("--tau-grid", default="", help="evaluate selection at several thresholds per fit")
    p_sim.add_argument("--scale-grid", default="", help="sweep the three half-Cauchy scales jointly")
    p_sim.add_argument("--d-zero", type=int, default=5)
    p_sim.add_argument("--d-lin", type=int, default=5)
    p_sim.add_argument("--d-nonlin", type=int, default=5)
    p_sim.add_argument("--reps", type=int, default=20)
    p_sim.add_argument("--workers", type=int, default=1)
    p_sim.add_argument("--rte", action="store_true", help="also compute relative test error (Gaussian)")
    _add_common_fit_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_bench = sub.add_parser("benchmark", help="timing study over sample sizes")
    p_bench.add_argument("--n-grid", default="1000,10000,100000")
    p_bench.add_argument("--d-non", type=int, default=10)
    p_bench.add_argument("--sigma-eps", type=float, default=1.0)
    p_bench.add_argument("--reps", type=int, default=5)
    p_bench.add_argument("--workers", type=int, default=1)
    _add_common_fit_flags(p_bench)
    p_bench.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (GamSelectError, ValueError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
