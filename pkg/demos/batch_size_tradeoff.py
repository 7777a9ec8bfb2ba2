"""The cost of training fast: steps versus tokens at fixed final loss.

Every batch size that reaches a given loss sits on one trade-off
curve, (S / S_min - 1)(E / E_min - 1) = 1. The critical batch is its
corner, where a run pays exactly double on both axes; which point to
pick depends only on how expensive wall-clock time is relative to
compute.
"""

from scalinglaws import (
    C4_CONSTANTS,
    critical_batch,
    min_steps_for_loss,
    min_tokens_for_loss,
    recommend_batch,
    steps_from_min_steps,
)


def main():
    c = C4_CONSTANTS
    n, target = 1e9, 2.8
    b_crit = critical_batch(c, target)
    s_min = min_steps_for_loss(c, n, target)
    e_min = min_tokens_for_loss(c, n, target)

    print(f"reaching {target} nats with {n:.0e} params:")
    print(f"  minimum steps   {s_min:.4g}  (unbounded batch)")
    print(f"  minimum tokens  {e_min:.4g}  (vanishing batch)")
    print(f"  critical batch  {b_crit:.4g} tokens")
    print()
    print(f"{'batch':>11} {'steps':>11} {'tokens':>11} {'S/S_min':>8} {'E/E_min':>8}")
    for factor in (0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0):
        b = b_crit * factor
        s = steps_from_min_steps(c, s_min, b, target)
        e = b * s
        marker = "  <- critical" if factor == 1.0 else ""
        print(f"{b:>11.4g} {s:>11.4g} {e:>11.4g}"
              f" {s / s_min:>8.3f} {e / e_min:>8.3f}{marker}")
    print()

    # pricing time against compute slides the choice along the curve
    for weight in (1.0, 4.0, 16.0):
        b = recommend_batch(c, target, time_weight=weight)
        print(f"time worth {weight:>4g}x compute: train at batch {b:.4g}")


if __name__ == "__main__":
    main()
