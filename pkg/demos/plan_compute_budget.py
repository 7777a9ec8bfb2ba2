"""Split a training budget between model size, batch size, and steps.

The closed form puts most of each new decade of compute into model
size, stops every run at the same fixed multiple of its converged
loss, and is checked here against a brute-force scan over model
sizes at one budget.
"""

import numpy as np

from scalinglaws import (
    C4_CONSTANTS,
    budget_exponent,
    min_budget_for_loss,
    optimal_allocation,
    verify_allocation,
)


def main():
    c = C4_CONSTANTS
    print(f"loss falls as budget^-{budget_exponent(c):.4f} along the frontier")
    print()
    print(f"{'budget':>9} {'N_opt':>10} {'B_opt':>10} {'steps':>9} {'loss':>7}")
    for budget in np.geomspace(1e18, 1e24, 7):
        plan = optimal_allocation(c, budget)
        print(f"{budget:>9.0e} {plan.n_opt:>10.3g} {plan.b_opt:>10.3g}"
              f" {plan.s_opt:>9.3g} {plan.loss_final:>7.4f}")

    plan = optimal_allocation(c, 1e21)
    print()
    print(f"every plan stops at {plan.loss_final / plan.loss_converged:.4f}x the"
          " converged loss of its model;")
    print("training any further would be cheaper at the next model size up.")

    check = verify_allocation(c, 1e21)
    print()
    print(f"grid check at 1e21 flops: closed form picks {check.plan.n_opt:.4g} params,")
    print(f"a {check.n_grid.size}-point scan over sizes picks {check.n_best:.4g};"
          f" within one grid cell: {check.within_one_cell}")

    target = 2.6
    cost, plan = min_budget_for_loss(c, target)
    print()
    print(f"cheapest way to reach {target} nats: {cost:.3g} flops,")
    print(f"a {plan.n_opt:.3g}-param model run for {plan.s_opt:.3g} steps"
          f" at batch {plan.b_opt:.3g}.")


if __name__ == "__main__":
    main()
