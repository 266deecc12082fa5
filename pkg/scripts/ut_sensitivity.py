"""Re-entry reduced chi-squared across the unscented-transform parameters on one record."""

import argparse
from dataclasses import replace

from kalman_bench.config import RunConfig
from kalman_bench.metrics import fit_report
from kalman_bench.sim import RngStream, build_scenario, run_filter, simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--alphas", default="1e-3,0.01,0.1,0.5,1")
    ap.add_argument("--kappas", default="-2,0,1")
    args = ap.parse_args()

    config = RunConfig(scenario="reentry", seed=args.seed)
    scenario = build_scenario(config)
    rec = simulate(scenario, RngStream(config.seed))
    rows = []
    for alpha in map(float, args.alphas.split(",")):
        for kappa in map(float, args.kappas.split(",")):
            run = run_filter(rec, scenario, "ukf", replace(config, alpha=alpha, kappa=kappa))
            rows.append((alpha, kappa, fit_report(run, scenario.meas_sigmas).reduced_chi2))
            print(f"alpha {alpha:<6g} kappa {kappa:<4g} reduced_chi2 {rows[-1][2]:.6f}")
    chis = [r[2] for r in rows]
    print(f"spread {max(chis) - min(chis):.2e}")


if __name__ == "__main__":
    main()
