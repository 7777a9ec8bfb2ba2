"""Containers for training-run data and basic reshaping of it.

A run is a sequence of logged samples at constant batch size. Train and
test splits may be logged at the same steps, so monotonicity of steps is
enforced per split, not across the whole sample list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError

SPLITS = ("train", "test")

# tokens must equal step * batch_tokens for constant-batch runs, to this
# relative slack
TOKEN_RTOL = 1e-3


@dataclass(frozen=True)
class TrajectorySample:
    """One logged point of a training run."""

    step: float
    tokens: float
    loss: float
    split: str = "train"


@dataclass(frozen=True)
class ConvergedRun:
    """Final loss of a run trained to convergence at one model size."""

    n_params: float
    final_loss: float

    def __post_init__(self):
        if not (math.isfinite(self.n_params) and self.n_params > 0):
            raise ValidationError(f"n_params must be positive, got {self.n_params!r}")
        if not (math.isfinite(self.final_loss) and self.final_loss > 0):
            raise ValidationError(f"final_loss must be positive, got {self.final_loss!r}")


@dataclass
class RunRecord:
    """A single constant-batch training run.

    Args:
        run_id: identifier carried through serialization, not interpreted.
        n_params: non-embedding parameter count of the trained model.
        batch_tokens: tokens per optimization step.
        context_length: sequence length used for training.
        dataset_tag: short name of the training corpus.
        samples: logged points; steps strictly increasing within each split.
    """

    run_id: str
    n_params: float
    batch_tokens: float
    context_length: int
    dataset_tag: str
    samples: list[TrajectorySample] = field(default_factory=list)

    def __post_init__(self):
        if not self.run_id:
            raise ValidationError("run_id must be a non-empty string")
        for name in ("n_params", "batch_tokens", "context_length"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be positive, got {v!r}")
        if not self.samples:
            raise ValidationError(f"run {self.run_id!r} has no samples")
        last_step = {}
        for i, s in enumerate(self.samples):
            if s.split not in SPLITS:
                raise ValidationError(f"sample {i}: unknown split {s.split!r}")
            if not (math.isfinite(s.step) and s.step > 0):
                raise ValidationError(f"sample {i}: step must be positive, got {s.step!r}")
            if not (math.isfinite(s.loss) and s.loss > 0):
                raise ValidationError(f"sample {i}: loss must be positive, got {s.loss!r}")
            expected = s.step * self.batch_tokens
            if not math.isfinite(s.tokens) or abs(s.tokens - expected) > TOKEN_RTOL * expected:
                raise ValidationError(
                    f"sample {i}: tokens {s.tokens!r} inconsistent with "
                    f"step {s.step!r} at batch {self.batch_tokens!r}"
                )
            prev = last_step.get(s.split)
            if prev is not None:
                if s.step == prev:
                    raise ValidationError(f"sample {i}: duplicate step {s.step!r} in split {s.split!r}")
                if s.step < prev:
                    raise ValidationError(f"sample {i}: decreasing step {s.step!r} in split {s.split!r}")
            last_step[s.split] = s.step

    def splits(self) -> tuple[str, ...]:
        """Splits present in this run, in SPLITS order."""
        present = {s.split for s in self.samples}
        return tuple(name for name in SPLITS if name in present)

    def split_arrays(self, split: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (steps, tokens, losses) arrays for one split, in step order."""
        picked = [s for s in self.samples if s.split == split]
        if not picked:
            raise ValidationError(f"run {self.run_id!r} has no {split!r} samples")
        steps = np.array([s.step for s in picked], dtype=float)
        tokens = np.array([s.tokens for s in picked], dtype=float)
        losses = np.array([s.loss for s in picked], dtype=float)
        return steps, tokens, losses

    def final_step(self) -> float:
        return max(s.step for s in self.samples)


def sort_samples(samples: list[TrajectorySample]) -> list[TrajectorySample]:
    """Canonical sample order: by step, train before test at equal steps."""
    return sorted(samples, key=lambda s: (s.step, SPLITS.index(s.split)))


# ---------------------------------------------------------------------------
# reshaping: warm-up trimming, smoothing, downsampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WarmupTrim:
    """Rule for dropping warm-up samples from the head of a run.

    Samples with step below max(min_step, final_fraction * final step)
    are dropped. The default reflects that the first ~100 steps and the
    first few percent of any run are dominated by warm-up transients.
    ``WarmupTrim(0, 0)`` is the identity.
    """

    min_step: float = 100.0
    final_fraction: float = 0.02

    def __post_init__(self):
        if self.min_step < 0 or not math.isfinite(self.min_step):
            raise ValidationError(f"min_step must be >= 0, got {self.min_step!r}")
        if not 0 <= self.final_fraction < 1:
            raise ValidationError(f"final_fraction must lie in [0, 1), got {self.final_fraction!r}")

    def threshold(self, final_step: float) -> float:
        return max(self.min_step, self.final_fraction * final_step)


def trim_warmup(run: RunRecord, trim: WarmupTrim = WarmupTrim()) -> RunRecord:
    """Drop warm-up samples from the head of a run.

    Raises:
        ValidationError: if the rule would remove every sample.
    """
    cutoff = trim.threshold(run.final_step())
    kept = [s for s in run.samples if s.step >= cutoff]
    if not kept:
        raise ValidationError(f"warm-up trim removed every sample of run {run.run_id!r}")
    if len(kept) == len(run.samples):
        return run
    return replace(run, samples=kept)


def ema_smooth(run: RunRecord, half_life: float) -> RunRecord:
    """Smooth each split's loss with an exponential moving average.

    The decay is expressed per step, so unevenly spaced samples are
    weighted by their step gaps. A constant series maps to itself.

    Args:
        half_life: steps over which a sample's weight halves; must be > 0.
    """
    if not (math.isfinite(half_life) and half_life > 0):
        raise ValidationError(f"half_life must be positive, got {half_life!r}")
    smoothed = {}
    for split in run.splits():
        steps, _, losses = run.split_arrays(split)
        out = np.empty_like(losses)
        out[0] = losses[0]
        decay = np.exp2(-np.diff(steps) / half_life)
        for i in range(1, losses.size):
            out[i] = decay[i - 1] * out[i - 1] + (1.0 - decay[i - 1]) * losses[i]
        smoothed[split] = dict(zip(steps, out))
    samples = [replace(s, loss=float(smoothed[s.split][s.step])) for s in run.samples]
    return replace(run, samples=samples)


def downsample_run(run: RunRecord, stride: int) -> RunRecord:
    """Keep every ``stride``-th sample of each split, starting at the first."""
    if not isinstance(stride, int) or stride < 1:
        raise ValidationError(f"stride must be a positive integer, got {stride!r}")
    if stride == 1:
        return run
    kept = []
    index = {split: 0 for split in SPLITS}
    for s in run.samples:
        if index[s.split] % stride == 0:
            kept.append(s)
        index[s.split] += 1
    return replace(run, samples=kept)
