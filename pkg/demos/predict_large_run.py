"""Predict the loss curve of a run too big to have been trained yet.

Constants fitted on models up to 60M parameters extrapolate to a
1.5B-parameter run: the whole point of fitting the laws is that the
expensive run's trajectory is known before anyone pays for it.
"""

import numpy as np

from scalinglaws import (
    C4_CONSTANTS,
    critical_batch,
    loss_at_convergence,
    loss_at_min_steps,
    min_steps_from_steps,
    predict_trajectory,
)


def main():
    c = C4_CONSTANTS
    n = 1.5e9
    batch = 2.0 ** 21  # ~2M tokens per step

    floor = loss_at_convergence(c, n)
    print(f"model: {n:.2g} params, batch {batch:.3g} tokens")
    print(f"converged floor: {floor:.4f} nats")
    print()

    pred = predict_trajectory(c, n, batch, np.geomspace(1e3, 1e6, 10))
    print(f"{'step':>9} {'tokens':>10} {'loss':>8} {'B_crit':>10} {'step discount':>14}")
    for s, loss in zip(pred.steps, pred.losses):
        b_crit = critical_batch(c, loss)
        discount = s / min_steps_from_steps(c, s, batch, loss)
        print(f"{s:>9.0f} {s * batch:>10.2e} {loss:>8.4f} {b_crit:>10.3g} {discount:>14.3f}")
    print()

    # the same steps at unbounded batch, for the price of the discount
    final_step = float(pred.steps[-1])
    unbounded = loss_at_min_steps(c, n, final_step)
    print(f"after {final_step:.0f} steps: {pred.losses[-1]:.4f} nats at this batch,")
    print(f"{unbounded:.4f} if the batch were unbounded, floor {floor:.4f}.")
    print("The discount column is actual steps per unbounded-batch step:")
    print("near one early, while this batch is still above critical, and")
    print("growing as the falling loss pushes the critical batch past it.")


if __name__ == "__main__":
    main()
