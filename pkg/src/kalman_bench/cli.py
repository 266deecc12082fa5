"""Command-line entry point: ``simulate``, ``filter`` and ``report``.

A run lives in one directory::

    config.json            the RunConfig, updated by ``filter``
    truth.csv              t + state components
    measurements.csv       t + measured components
    estimates.csv          t + posterior mean
    residuals.csv          t + post-update residuals + innovations
    covariance_diag.csv    t + diagonal of the posterior covariance
    report.txt             fit summary and config echo
    plotdata/*.csv         residual-vs-time and error-vs-time series

The default output root is ``$KALMAN_BENCH_OUT`` (else ``./runs``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from kalman_bench import csvio
from kalman_bench.config import FILTERS, SCENARIOS, RunConfig
from kalman_bench.errors import KalmanBenchError
from kalman_bench.metrics import fit_report, lag1_autocorrelation
from kalman_bench.sim import RngStream, TrajectoryRecord, build_scenario, run_filter, simulate

ENV_OUT = "KALMAN_BENCH_OUT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# ------------------------------------------------------------------- files


def _meta(config: RunConfig, kind: str) -> dict:
    return {
        "kalman_bench": kind,
        "scenario": config.scenario,
        "seed": config.seed,
        "config_hash": config.digest(),
        "rng": RngStream.ALGORITHM,
    }


def save_config(run_dir: Path, config: RunConfig) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")


def load_config(run_dir: Path) -> RunConfig:
    path = run_dir / "config.json"
    if not path.exists():
        raise FileNotFoundError(f"{path}: missing run configuration (run 'simulate' first)")
    return RunConfig.from_dict(json.loads(path.read_text()))


def write_simulation(run_dir: Path, config: RunConfig, record: TrajectoryRecord) -> None:
    save_config(run_dir, config)
    csvio.write_series(
        run_dir / "truth.csv",
        record.times,
        {n: record.truth[:, j] for j, n in enumerate(record.state_names)},
        _meta(config, "truth"),
    )
    csvio.write_series(
        run_dir / "measurements.csv",
        record.times,
        {n: record.measurements[:, j] for j, n in enumerate(record.meas_names)},
        _meta(config, "measurements"),
    )


def read_simulation(run_dir: Path, config: RunConfig, measurements: Path | None = None):
    scenario = build_scenario(config)
    times, cols, _ = csvio.read_series(measurements or run_dir / "measurements.csv")
    missing = [n for n in scenario.meas_names if n not in cols]
    if missing:
        raise csvio.CsvFormatError(measurements or run_dir / "measurements.csv", 1, f"missing columns {missing}")
    z = np.column_stack([cols[n] for n in scenario.meas_names])
    truth = clean = None
    truth_path = run_dir / "truth.csv"
    if truth_path.exists():
        t_truth, tcols, _ = csvio.read_series(truth_path)
        if np.array_equal(t_truth, times):
            truth = np.column_stack([tcols[n] for n in scenario.state_names])
            clean = np.asarray(scenario.measure(truth), dtype=float)
    record = TrajectoryRecord(
        times=times,
        measurements=z,
        state_names=scenario.state_names,
        meas_names=scenario.meas_names,
        truth=truth,
        clean=clean,
        meta={"seed": config.seed, "scenario": config.scenario},
    )
    return scenario, record


def write_filtered(run_dir: Path, config: RunConfig, record: TrajectoryRecord) -> None:
    meta = _meta(config, "estimates")
    meta["filter"] = config.filter_kind
    csvio.write_series(
        run_dir / "estimates.csv", record.times, {n: record.x_hat[:, j] for j, n in enumerate(record.state_names)}, meta
    )
    cols = {n: record.residuals[:, j] for j, n in enumerate(record.meas_names)}
    cols.update({f"innov_{n}": record.innovations[:, j] for j, n in enumerate(record.meas_names)})
    csvio.write_series(run_dir / "residuals.csv", record.times, cols, dict(meta, kalman_bench="residuals"))
    pd = record.p_diag
    csvio.write_series(
        run_dir / "covariance_diag.csv",
        record.times,
        {f"var_{n}": pd[:, j] for j, n in enumerate(record.state_names)},
        dict(meta, kalman_bench="covariance_diag"),
    )


def read_filtered(run_dir: Path, record: TrajectoryRecord) -> TrajectoryRecord:
    for name in ("estimates.csv", "residuals.csv", "covariance_diag.csv"):
        if not (run_dir / name).exists():
            raise FileNotFoundError(f"{run_dir / name}: missing (run 'filter' first)")
    _, est, _ = csvio.read_series(run_dir / "estimates.csv")
    _, res, _ = csvio.read_series(run_dir / "residuals.csv")
    x_hat = np.column_stack([est[n] for n in record.state_names])
    resid = np.column_stack([res[n] for n in record.meas_names])
    innov = np.column_stack([res[f"innov_{n}"] for n in record.meas_names])
    return replace(record, x_hat=x_hat, residuals=resid, innovations=innov, fitted=record.measurements - resid)


# --------------------------------------------------------------- commands


def cmd_simulate(config: RunConfig, out: Path) -> TrajectoryRecord:
    config.check_compatible()
    scenario = build_scenario(config)
    record = simulate(scenario, RngStream(config.seed))
    write_simulation(out, config, record)
    return record


def cmd_filter(run_dir: Path, overrides: dict, measurements: Path | None = None) -> TrajectoryRecord:
    config = replace(load_config(run_dir), **overrides)
    config.check_compatible()
    scenario, record = read_simulation(run_dir, config, measurements)
    filtered = run_filter(record, scenario, config.filter_kind, config)
    save_config(run_dir, config)
    write_filtered(run_dir, config, filtered)
    return filtered


def _sweep_one(args) -> tuple:
    run_dir, config_dict, alpha, kappa = args
    config = replace(RunConfig.from_dict(config_dict), alpha=alpha, kappa=kappa)
    scenario, record = read_simulation(run_dir, config)
    filtered = run_filter(record, scenario, config.filter_kind, config)
    sub = run_dir / "sweep" / f"alpha_{alpha:g}_kappa_{kappa:g}"
    sub.mkdir(parents=True, exist_ok=True)
    save_config(sub, config)
    write_filtered(sub, config, filtered)
    return alpha, kappa, fit_report(filtered, scenario.meas_sigmas).reduced_chi2


def cmd_report(run_dir: Path, sweep_alpha=(), sweep_kappa=(), jobs: int = 1) -> dict:
    config = load_config(run_dir)
    scenario, record = read_simulation(run_dir, config)
    record = read_filtered(run_dir, record)
    _, cov, _ = csvio.read_series(run_dir / "covariance_diag.csv")
    fr = fit_report(record, scenario.meas_sigmas)

    summary = {
        "scenario": config.scenario,
        "filter": config.filter_kind,
        "epochs": len(record),
        "chi2": fr.chi2,
        "dof": fr.dof,
        "reduced_chi2": fr.reduced_chi2,
    }
    for j, n in enumerate(record.meas_names):
        summary[f"residual_lag1_{n}"] = float(lag1_autocorrelation(record.residuals[:, j])[0])
    if fr.rmse_per_component is not None:
        summary.update({f"rmse_{n}": float(v) for n, v in zip(record.state_names, fr.rmse_per_component)})
    if fr.noise_reduction_ratio is not None:
        summary.update({f"noise_reduction_{n}": float(v) for n, v in zip(record.meas_names, fr.noise_reduction_ratio)})

    plot = run_dir / "plotdata"
    csvio.write_series(
        plot / "residuals_vs_time.csv",
        record.times,
        {f"{n}_norm": record.residuals[:, j] / scenario.meas_sigmas[j] for j, n in enumerate(record.meas_names)},
        {"kalman_bench": "residuals_vs_time", "config_hash": config.digest()},
    )
    if record.truth is not None:
        cols = {f"est_err_{n}": record.x_hat[:, j] - record.truth[:, j] for j, n in enumerate(record.state_names)}
        cols.update({f"raw_err_{n}": record.measurements[:, j] - record.clean[:, j] for j, n in enumerate(record.meas_names)})
        cols.update({f"sigma_{n}": np.sqrt(cov[f"var_{n}"]) for n in record.state_names})
        csvio.write_series(
            plot / "error_vs_time.csv", record.times, cols, {"kalman_bench": "error_vs_time", "config_hash": config.digest()}
        )

    sweep_rows = []
    if sweep_alpha:
        kappas = tuple(sweep_kappa) or (config.kappa,)
        tasks = [(run_dir, config.to_dict(), a, k) for a in sweep_alpha for k in kappas]
        if jobs > 1:
            with ProcessPoolExecutor(jobs) as pool:
                sweep_rows = list(pool.map(_sweep_one, tasks))
        else:
            sweep_rows = [_sweep_one(t) for t in tasks]
        chis = [r[2] for r in sweep_rows]
        summary["sweep_spread"] = max(chis) - min(chis)

    lines = [f"{k} = {v:.6g}" if isinstance(v, float) else f"{k} = {v}" for k, v in summary.items()]
    if sweep_rows:
        lines.append("")
        lines.append("alpha      kappa      reduced_chi2")
        lines += [f"{a:<10g} {k:<10g} {c:.6f}" for a, k, c in sweep_rows]
        csvio.write_series(
            run_dir / "sweep.csv",
            np.arange(1, len(sweep_rows) + 1, dtype=float),
            {"alpha": [r[0] for r in sweep_rows], "kappa": [r[1] for r in sweep_rows], "reduced_chi2": [r[2] for r in sweep_rows]},
            {"kalman_bench": "sweep", "config_hash": config.digest()},
        )
    lines.append("")
    lines += [f"config.{k} = {v}" for k, v in sorted(config.to_dict().items())]
    (run_dir / "report.txt").write_text("\n".join(lines) + "\n")
    summary["sweep"] = sweep_rows
    return summary


# ------------------------------------------------------------------ parser


def _add_noise_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, help="measurement period in s")
    p.add_argument("--duration", type=float, help="simulated span in s")
    p.add_argument("--observe", choices=("full", "height_only"), default="full")
    p.add_argument("--process-sigmas", type=_floats, help="comma-separated process-noise standard deviations")
    p.add_argument("--meas-sigmas", type=_floats, help="comma-separated measurement-noise standard deviations")
    p.add_argument("--zero-noise", action="store_true", help="inject no noise into the simulation")
    p.add_argument("--mu", type=float, default=0.1, help="drag rate for freefall_drag, 1/s")
    p.add_argument("--param-file", help="'name = value' scenario parameter file")
    p.add_argument("--inner-steps", type=int, default=10, help="RK4 substeps per measurement period")


def _add_filter_args(p: argparse.ArgumentParser, defaults: bool) -> None:
    d = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("--filter", choices=FILTERS, default=None)
    p.add_argument("--alpha", type=float, default=d(1e-3))
    p.add_argument("--beta", type=float, default=d(2.0))
    p.add_argument("--kappa", type=float, default=d(0.0))
    p.add_argument("--reuse-points", action="store_true", default=None if not defaults else False)
    p.add_argument(
        "--cross-cov",
        choices=("printed", "consistent"),
        default=d("printed"),
        help="UKF cross-covariance points: propagated prediction points (printed) or the correction set",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kalman-bench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate truth and noisy measurements")
    p.add_argument("--scenario", choices=SCENARIOS, required=True)
    _add_noise_args(p)
    _add_filter_args(p, defaults=True)
    p.add_argument("--out", type=Path, help="run directory")

    p = sub.add_parser("filter", help="filter the measurements of a run directory")
    p.add_argument("run_dir", type=Path)
    _add_filter_args(p, defaults=False)
    p.add_argument("--inner-steps", type=int, default=None)
    p.add_argument("--measurements", type=Path, help="read measurements from this CSV instead")

    p = sub.add_parser("report", help="summarize a filtered run")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--sweep-alpha", type=_floats, default=(), help="e.g. 1e-3,0.1,0.5,1")
    p.add_argument("--sweep-kappa", type=_floats, default=(), help="e.g. -2,0")
    p.add_argument("--jobs", type=int, default=1)
    return parser


def _default_out(config: RunConfig) -> Path:
    return Path(os.environ.get(ENV_OUT, "runs")) / f"{config.scenario}-seed{config.seed}"


def _join_negative_lists(argv: list) -> list:
    # argparse reads "-2,0" as an option; glue such values to their flag
    out = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and tok[:1] == "-" and tok[1:2].isdigit():
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_join_negative_lists(argv))
        if args.command == "simulate":
            config = RunConfig(
                scenario=args.scenario,
                filter=args.filter,
                seed=args.seed,
                dt=args.dt,
                duration=args.duration,
                observe=args.observe,
                alpha=args.alpha,
                beta=args.beta,
                kappa=args.kappa,
                process_sigmas=args.process_sigmas,
                meas_sigmas=args.meas_sigmas,
                zero_noise=args.zero_noise,
                inner_steps=args.inner_steps,
                reuse_points=args.reuse_points,
                cross_cov=args.cross_cov,
                mu=args.mu,
                param_file=args.param_file,
            )
            out = args.out or _default_out(config)
            record = cmd_simulate(config, out)
            print(f"simulated {len(record)} epochs -> {out}")
        elif args.command == "filter":
            overrides = {
                k: getattr(args, k)
                for k in ("filter", "alpha", "beta", "kappa", "reuse_points", "cross_cov", "inner_steps")
                if getattr(args, k) is not None
            }
            record = cmd_filter(args.run_dir, overrides, args.measurements)
            print(f"filtered {len(record)} epochs -> {args.run_dir}")
        else:
            summary = cmd_report(args.run_dir, args.sweep_alpha, args.sweep_kappa, args.jobs)
            print(f"reduced_chi2 = {summary['reduced_chi2']:.6g}")
            if summary["sweep"]:
                print(f"sweep_spread = {summary['sweep_spread']:.3g}")
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 2
    except (KalmanBenchError, ValueError, KeyError, OSError, ArithmeticError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
