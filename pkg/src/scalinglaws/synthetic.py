"""Synthetic training runs drawn exactly from a set of scaling constants.

Every generator is deterministic given its noise seed, and independent
sub-streams keep runs generated one at a time identical to runs
generated in a batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .laws import ScalingConstants, loss_at_convergence, solve_loss
from .records import ConvergedRun, RunRecord, TrajectorySample, sort_samples

NOISE_KINDS = ("none", "multiplicative-lognormal")

_DEFAULT_CONTEXT = 1024


@dataclass(frozen=True)
class NoiseSpec:
    """Measurement noise applied to generated losses.

    Multiplicative log-normal noise multiplies each loss by
    exp(sigma * z) with z standard normal, so it is unbiased in log
    space. ``kind="none"`` or ``sigma=0`` disables it.
    """

    sigma: float = 0.0
    seed: int = 0
    kind: str = "multiplicative-lognormal"

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValidationError(f"unknown noise kind {self.kind!r}")
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ValidationError(f"sigma must be >= 0, got {self.sigma!r}")

    def factors(self, count: int, stream: int = 0) -> np.ndarray:
        """Noise factors for one run, drawn from an independent sub-stream."""
        if self.kind == "none" or self.sigma == 0.0:
            return np.ones(count)
        rng = np.random.default_rng([self.seed, stream])
        return np.exp(self.sigma * rng.standard_normal(count))


@dataclass(frozen=True)
class WarmupSpec:
    """Additive warm-up inflation, in nats, decaying linearly to zero.

    A sample at step s gets inflation * max(0, 1 - s / length) added
    before noise is applied. ``length=0`` disables it.
    """

    length: float = 0.0
    inflation: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.length) and self.length >= 0):
            raise ValidationError(f"length must be >= 0, got {self.length!r}")
        if not (math.isfinite(self.inflation) and self.inflation >= 0):
            raise ValidationError(f"inflation must be >= 0, got {self.inflation!r}")

    def added(self, steps: np.ndarray) -> np.ndarray:
        if self.length == 0.0 or self.inflation == 0.0:
            return np.zeros_like(steps)
        return self.inflation * np.clip(1.0 - steps / self.length, 0.0, None)


def _run_meta(c: ScalingConstants):
    tag = c.meta.get("dataset_tag", "synthetic")
    context = int(c.meta.get("context_length", _DEFAULT_CONTEXT))
    return tag, context


def _step_grid(num_steps: int, log_every: int) -> np.ndarray:
    if not isinstance(num_steps, int) or num_steps < 1:
        raise ValidationError(f"num_steps must be a positive integer, got {num_steps!r}")
    if not isinstance(log_every, int) or log_every < 1:
        raise ValidationError(f"log_every must be a positive integer, got {log_every!r}")
    steps = np.arange(log_every, num_steps + 1, log_every, dtype=float)
    if steps.size == 0 or steps[-1] != num_steps:
        steps = np.append(steps, float(num_steps))
    return steps


def _to_record(run_id, c, n, batch_tokens, steps, losses) -> RunRecord:
    tag, context = _run_meta(c)
    samples = []
    for step, loss in zip(steps, losses):
        tokens = float(step) * batch_tokens
        for split in ("train", "test"):
            samples.append(TrajectorySample(float(step), tokens, float(loss), split))
    return RunRecord(
        run_id=run_id,
        n_params=float(n),
        batch_tokens=float(batch_tokens),
        context_length=context,
        dataset_tag=tag,
        samples=sort_samples(samples),
    )


def gen_converged_suite(
    c: ScalingConstants,
    sizes,
    noise: NoiseSpec = NoiseSpec(),
    stream: int = 0,
) -> list[ConvergedRun]:
    """Converged losses for a list of model sizes.

    Args:
        c: generating constants.
        sizes: parameter counts; repeats are allowed and redrawn.
        noise: per-size measurement noise.
        stream: sub-stream index for seed independence from other
            generators sharing the same NoiseSpec.
    """
    sizes = np.atleast_1d(np.asarray(sizes, dtype=float))
    losses = np.atleast_1d(loss_at_convergence(c, sizes)) * noise.factors(sizes.size, stream)
    return [ConvergedRun(float(n), float(l)) for n, l in zip(sizes, losses)]


def gen_trajectory(
    c: ScalingConstants,
    n,
    batch_tokens,
    num_steps: int,
    noise: NoiseSpec = NoiseSpec(),
    warmup: WarmupSpec = WarmupSpec(),
    log_every: int = 1,
    run_id: str | None = None,
    stream: int = 0,
) -> RunRecord:
    """One constant-batch training run sampled from the loss surface.

    Train and test splits are emitted with identical values: the law
    lives in the data-unbounded regime where the two do not separate.

    Args:
        c: generating constants.
        n: model size in parameters.
        batch_tokens: batch size in tokens.
        num_steps: final step; the grid is every ``log_every``-th step
            plus the final one.
        noise: measurement noise, applied after warm-up inflation.
        warmup: additive warm-up transient.
        log_every: logging stride in steps.
        run_id: defaults to a descriptive synthetic id.
        stream: sub-stream index, see gen_converged_suite.
    """
    steps = _step_grid(num_steps, log_every)
    clean = np.atleast_1d(solve_loss(c, n, steps, batch_tokens))
    observed = (clean + warmup.added(steps)) * noise.factors(steps.size, stream)
    if run_id is None:
        run_id = f"sim-n{float(n):g}-b{float(batch_tokens):g}-r{stream}"
    return _to_record(run_id, c, n, batch_tokens, steps, observed)


def gen_batch_scan(
    c: ScalingConstants,
    n,
    batches,
    num_steps,
    noise: NoiseSpec = NoiseSpec(),
    warmup: WarmupSpec = WarmupSpec(),
    log_every: int = 1,
    stream_base: int = 1,
) -> list[RunRecord]:
    """A batch-size scan: one run per batch at a fixed model size.

    Args:
        batches: at least two distinct batch sizes; duplicates rejected.
        num_steps: final step for every run, or one value per batch
            (small batches need more steps to reach the same losses).
        stream_base: first sub-stream index; run i uses stream_base + i.

    Returns:
        Runs ordered by increasing batch size.
    """
    batches = [float(b) for b in batches]
    if len(batches) < 2:
        raise ValidationError("a batch scan needs at least two batch sizes")
    if len(set(batches)) != len(batches):
        raise ValidationError(f"duplicate batch sizes in {batches!r}")
    if isinstance(num_steps, int):
        per_batch = [num_steps] * len(batches)
    else:
        per_batch = [int(v) for v in num_steps]
        if len(per_batch) != len(batches):
            raise ValidationError("num_steps must be one value or one per batch")
    order = np.argsort(batches)
    return [
        gen_trajectory(
            c, n, batches[i], per_batch[i],
            noise=noise, warmup=warmup, log_every=log_every,
            stream=stream_base + int(rank),
        )
        for rank, i in enumerate(order)
    ]


def gen_converged_log(
    c: ScalingConstants,
    n,
    batch_tokens=1e12,
    samples: int = 120,
    start_step: float = 10_000.0,
    step_spacing: float = 100.0,
    noise: NoiseSpec = NoiseSpec(),
    run_id: str | None = None,
    stream: int = 0,
) -> RunRecord:
    """The logged tail of a run already trained to convergence.

    Every sample sits at the converged loss for ``n`` (plus noise); the
    steps just index the tail. This is the file-shaped counterpart of a
    ConvergedRun, for pipelines that ingest everything as run logs.
    """
    if not isinstance(samples, int) or samples < 1:
        raise ValidationError(f"samples must be a positive integer, got {samples!r}")
    steps = start_step + step_spacing * np.arange(samples, dtype=float)
    level = loss_at_convergence(c, n)
    observed = level * noise.factors(samples, stream)
    if run_id is None:
        run_id = f"sim-converged-n{float(n):g}-r{stream}"
    return _to_record(run_id, c, n, batch_tokens, steps, observed)
