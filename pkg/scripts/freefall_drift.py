"""Free-fall noise reduction (K=2 and K=1) and the K=1 velocity-drift statistic over seeds."""

import argparse

import numpy as np

from kalman_bench.config import RunConfig
from kalman_bench.metrics import mean_with_stderr, noise_reduction
from kalman_bench.sim import run_pipeline


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=40)
    args = ap.parse_args()

    stats = []
    print("seed  K2_x   K2_v   K1_x   |mean dv|/stderr")
    for seed in range(args.seeds):
        _, full = run_pipeline(RunConfig(scenario="freefall", seed=seed))
        _, k1 = run_pipeline(RunConfig(scenario="freefall", seed=seed, observe="height_only"))
        r2 = noise_reduction(full)
        r1 = noise_reduction(k1)[0]
        mean, se = mean_with_stderr(k1.x_hat[:, 1] - k1.truth[:, 1])
        stats.append(abs(mean) / se)
        print(f"{seed:<5d} {r2[0]:.3f}  {r2[1]:.3f}  {r1:.3f}  {stats[-1]:.2f}")
    stats = np.array(stats)
    print(f"drift statistic > 3 on {np.mean(stats > 3):.0%} of seeds (median {np.median(stats):.2f})")


if __name__ == "__main__":
    main()
