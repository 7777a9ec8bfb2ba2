"""Fit all six constants from simulated training logs.

Builds the smallest campaign the pipeline accepts: plateau tails of a
converged suite, one long run at effectively unbounded batch, and a
scan of one model size across batch sizes. Every log carries 1%
multiplicative noise, about what per-step loss logging shows in
practice, and the recovered exponents still land within a fraction of
a percent of the truth. The scale constants come back a few percent
off; they sit behind long extrapolations, so small exponent scatter
is magnified.
"""

import numpy as np

from scalinglaws import (
    C4_CONSTANTS,
    NoiseSpec,
    critical_batch,
    extract_converged_run,
    fit_full_pipeline,
    gen_batch_scan,
    gen_converged_log,
    gen_trajectory,
    min_steps_for_loss,
)


def main():
    truth = C4_CONSTANTS
    noise = NoiseSpec(sigma=0.01, seed=7)

    # plateau tails of seven converged models, 1M to 60M params
    sizes = np.geomspace(1e6, 6e7, 7)
    converged = [
        extract_converged_run(
            gen_converged_log(truth, n, samples=240, noise=noise, stream=100 + i),
            tail_fraction=0.25,
        )
        for i, n in enumerate(sizes)
    ]

    # one 10M-param run at a batch no experiment would ever reach; the
    # batch penalty vanishes there, which isolates the step law
    big = gen_trajectory(truth, 1e7, 1e12, 3000, noise=noise, run_id="big", stream=200)

    # six-batch scan bracketing the critical batch; each run is sized to
    # cross loss 4.2 with a quarter margin to spare
    batches = list(np.geomspace(1e4, 2.15e7, 6))
    steps = [
        int(1.25 * min_steps_for_loss(truth, 1e7, 4.2)
            * (1 + critical_batch(truth, 4.2) / b))
        for b in batches
    ]
    scans = gen_batch_scan(truth, 1e7, batches, steps, noise=noise, log_every=5)

    report = fit_full_pipeline(converged, big, scans)

    print("stage fits:")
    print(f"  converged law  r^2 {report.converged_stage.r_squared:.6f}"
          f"  ({report.converged_stage.count} sizes)")
    print(f"  step law       r^2 {report.step_stage.r_squared:.6f}"
          f"  ({report.step_stage.count} samples)")
    print(f"  batch law      {len(report.contours)} contours,"
          f" post-correction pooled {report.post_correction.pair_count} pairs")
    print()
    print(f"{'constant':>8} {'true':>12} {'fitted':>12} {'rel err':>9}")
    for name in ("n_c", "alpha_n", "s_c", "alpha_s", "b_star", "alpha_b"):
        true = getattr(truth, name)
        got = getattr(report, name)
        print(f"{name:>8} {true:>12.6g} {got:>12.6g} {abs(got / true - 1):>9.1e}")


if __name__ == "__main__":
    main()
