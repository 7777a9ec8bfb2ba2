"""Staged estimation of scaling constants from training-run data.

The six constants are identified in the order the data exposes them:

1. converged losses across model sizes give (n_c, alpha_n);
2. one run at effectively unbounded batch gives (s_c, alpha_s) after
   the converged term is subtracted;
3. a batch-size scan at one model size gives equal-loss contours, each
   contour a straight line of steps against 1/batch whose intercept and
   slope are the minimum steps and minimum tokens for that loss;
4. the per-contour critical batches give (b_star, alpha_b), optionally
   post-corrected with analytic pairs derived from stages 1 and 2.

Every regression is ordinary least squares in log space; the optional
refinement of stage 4 is a damped Gauss-Newton on relative residuals.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DiagnosticError,
    FitFailureError,
    InconsistentConstantsError,
    InsufficientDataError,
    ScalingLawWarning,
    ValidationError,
)
from .laws import ScalingConstants, loss_at_convergence
from .records import ConvergedRun, RunRecord, WarmupTrim, ema_smooth, trim_warmup

_EXPONENT_RANGE = (0.0, 2.0)


# ---------------------------------------------------------------------------
# result containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StageFit:
    """Least-squares diagnostics of one regression stage."""

    slope: float
    intercept: float
    r_squared: float
    residual_std: float
    count: int


@dataclass(frozen=True)
class PowerLawFit:
    """A fitted scale/exponent pair plus the regression behind it."""

    scale: float
    exponent: float
    stage: StageFit


@dataclass(frozen=True)
class ContourPoints:
    """Where each run of a batch scan crosses one loss value."""

    loss_target: float
    batch_tokens: np.ndarray
    steps: np.ndarray
    tokens: np.ndarray


@dataclass(frozen=True)
class ContourFit:
    """Straight-line fit of one equal-loss contour.

    steps = s_min_hat + e_min_hat / batch, so b_crit_hat is the batch
    at which the run takes twice the minimum steps and twice the
    minimum tokens.
    """

    loss_target: float
    s_min_hat: float
    e_min_hat: float
    b_crit_hat: float
    point_count: int
    residual_rms: float


@dataclass(frozen=True)
class PostCorrection:
    """Batch-law refit on pooled measured plus analytic pairs."""

    b_star: float
    alpha_b: float
    pair_count: int
    residual_rms_before: float
    residual_rms_after: float


@dataclass(frozen=True)
class DataDiagnostic:
    """Verdict on whether training data was effectively unlimited."""

    max_gap: float
    threshold: float
    data_unbounded: bool


@dataclass(frozen=True)
class BatchDiagnostic:
    """Verdict on which batch size made loss curves stationary."""

    stationary_batch: float | None
    deviations: list[tuple[float, float, float]]
    threshold: float


@dataclass
class FitOptions:
    """Knobs of the full fitting pipeline.

    Attributes:
        trim: warm-up trimming applied to every trajectory.
        split: preferred split for loss values; falls back to whatever
            the run has.
        smooth_half_life: EMA half-life in steps applied to scan runs
            before contour extraction, None to disable.
        contour_targets: explicit contour losses; None selects
            num_targets values spanning the scan's common loss range.
        num_targets: contour count for automatic target selection.
        target_inset: fraction of the common loss range kept clear at
            both ends when selecting targets automatically.
        refine_batch_law: run the Gauss-Newton refinement of stage 4.
        post_correct: refit the batch law on pooled analytic pairs.
        meta: extra provenance merged into the fitted constants' meta.
    """

    trim: WarmupTrim = field(default_factory=WarmupTrim)
    split: str = "test"
    smooth_half_life: float | None = None
    contour_targets: tuple[float, ...] | None = None
    num_targets: int = 5
    target_inset: float = 0.05
    refine_batch_law: bool = False
    post_correct: bool = True
    meta: dict = field(default_factory=dict)


@dataclass
class FitReport:
    """Everything fit_full_pipeline learned.

    ``constants`` is None when the scan stage could not run; the
    stage-1/2 values are still present individually.
    """

    n_c: float
    alpha_n: float
    s_c: float
    alpha_s: float
    b_star: float | None
    alpha_b: float | None
    constants: ScalingConstants | None
    converged_stage: StageFit
    step_stage: StageFit
    contours: list[ContourFit]
    batch_stage: StageFit | None
    post_correction: PostCorrection | None
    complete: bool
    warnings: list[str]


# ---------------------------------------------------------------------------
# regression helpers
# ---------------------------------------------------------------------------


def _ols(x: np.ndarray, y: np.ndarray) -> StageFit:
    """Centered least squares of y on x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise InsufficientDataError(f"need at least 2 points, got {x.size}")
    xm = x - x.mean()
    sxx = float(xm @ xm)
    if sxx == 0.0:
        raise InsufficientDataError("regressor values are all identical")
    slope = float(xm @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot > 0.0:
        r_squared = 1.0 - ss_res / ss_tot
    else:
        r_squared = 1.0 if ss_res == 0.0 else 0.0
    dof = x.size - 2
    residual_std = math.sqrt(ss_res / dof) if dof > 0 else 0.0
    return StageFit(slope, intercept, r_squared, residual_std, int(x.size))


def _power_law_from_logs(stage: StageFit, what: str) -> PowerLawFit:
    """Turn ln y = intercept + slope * ln x into scale/exponent form.

    The model is y = (scale / x) ** exponent, so slope = -exponent and
    intercept = exponent * ln(scale).
    """
    exponent = -stage.slope
    if not _EXPONENT_RANGE[0] < exponent < _EXPONENT_RANGE[1]:
        raise FitFailureError(
            f"{what}: fitted exponent {exponent:.4g} outside {_EXPONENT_RANGE}"
        )
    scale = math.exp(stage.intercept / exponent)
    if not (math.isfinite(scale) and scale > 0):
        raise FitFailureError(f"{what}: fitted scale {scale!r} is not a positive number")
    return PowerLawFit(scale, exponent, stage)


def _pick_split(run: RunRecord, preferred: str) -> str:
    names = run.splits()
    return preferred if preferred in names else names[0]


# ---------------------------------------------------------------------------
# stage 1: converged losses across model sizes
# ---------------------------------------------------------------------------


def fit_converged_law(runs) -> PowerLawFit:
    """Fit the converged loss law L(N) = (n_c / N) ** alpha_n.

    Args:
        runs: ConvergedRun sequence with at least two distinct sizes.

    Returns:
        PowerLawFit with scale n_c and exponent alpha_n.

    Raises:
        InsufficientDataError: fewer than two distinct model sizes.
        FitFailureError: the fitted exponent or scale is invalid.
    """
    runs = list(runs)
    if len({r.n_params for r in runs}) < 2:
        raise InsufficientDataError("converged fit needs at least two distinct model sizes")
    ordered = sorted(runs, key=lambda r: r.n_params)
    losses = np.array([r.final_loss for r in ordered])
    if np.any(np.diff(losses) > 0):
        warnings.warn(
            "converged losses are not monotone decreasing in model size",
            ScalingLawWarning,
            stacklevel=2,
        )
    stage = _ols(np.log([r.n_params for r in ordered]), np.log(losses))
    return _power_law_from_logs(stage, "converged-loss law")


def extract_converged_run(
    run: RunRecord,
    trim: WarmupTrim = WarmupTrim(),
    split: str = "test",
    tail_fraction: float = 0.05,
) -> ConvergedRun:
    """Read a converged loss off the tail of a run's log.

    The estimate is the mean of the last ``tail_fraction`` of the
    post-warm-up samples, which suits logs of runs trained to (or past)
    convergence.
    """
    if not 0 < tail_fraction <= 1:
        raise ValidationError(f"tail_fraction must lie in (0, 1], got {tail_fraction!r}")
    trimmed = trim_warmup(run, trim)
    _, _, losses = trimmed.split_arrays(_pick_split(trimmed, split))
    k = max(1, math.ceil(tail_fraction * losses.size))
    return ConvergedRun(run.n_params, float(losses[-k:].mean()))


# ---------------------------------------------------------------------------
# stage 2: step law at unbounded batch
# ---------------------------------------------------------------------------


def fit_step_law(
    n_c: float,
    alpha_n: float,
    run: RunRecord,
    trim: WarmupTrim = WarmupTrim(),
    split: str = "test",
) -> PowerLawFit:
    """Fit the step law from one run at effectively unbounded batch.

    Subtracts the converged term implied by (n_c, alpha_n) for the
    run's model size and regresses the log excess loss on log steps.

    Raises:
        InsufficientDataError: fewer than two samples survive trimming.
        InconsistentConstantsError: some losses sit at or below the
            converged floor, i.e. stage 1 and this run disagree.
    """
    trimmed = trim_warmup(run, trim)
    steps, _, losses = trimmed.split_arrays(_pick_split(trimmed, split))
    if steps.size < 2:
        raise InsufficientDataError("step-law fit needs at least two post-warm-up samples")
    floor = math.exp(alpha_n * (math.log(n_c) - math.log(run.n_params)))
    excess = losses - floor
    if np.any(excess <= 0):
        raise InconsistentConstantsError(
            f"{int(np.sum(excess <= 0))} samples of run {run.run_id!r} are at or below "
            f"the converged floor {floor:.6g} implied by the size law"
        )
    stage = _ols(np.log(steps), np.log(excess))
    return _power_law_from_logs(stage, "step law")


# ---------------------------------------------------------------------------
# stage 3: equal-loss contours of a batch scan
# ---------------------------------------------------------------------------


def default_contour_targets(
    runs,
    num_targets: int = 5,
    split: str = "test",
    inset: float = 0.05,
) -> np.ndarray:
    """Loss values every run of a scan crosses, evenly spaced.

    Takes the loss range shared by all runs and insets both ends by
    ``inset`` of its width, so targets stay clear of the ragged edges.
    """
    runs = list(runs)
    if not runs:
        raise InsufficientDataError("no runs to select contour targets from")
    if num_targets < 1:
        raise ValidationError(f"num_targets must be >= 1, got {num_targets!r}")
    lo = -math.inf
    hi = math.inf
    for run in runs:
        _, _, losses = run.split_arrays(_pick_split(run, split))
        lo = max(lo, float(losses.min()))
        hi = min(hi, float(losses.max()))
    if not lo < hi:
        raise InsufficientDataError(
            f"scan runs share no loss range (floor {lo:.6g} >= ceiling {hi:.6g})"
        )
    span = hi - lo
    return np.linspace(lo + inset * span, hi - inset * span, num_targets)


def _first_crossing(steps: np.ndarray, losses: np.ndarray, target: float) -> tuple[int, float] | None:
    """First crossing of ``target``: sample index and log-interpolated step."""
    diff = losses - target
    hits = np.nonzero(diff == 0.0)[0]
    flips = np.nonzero(diff[:-1] * diff[1:] < 0.0)[0]
    hit = hits[0] if hits.size else None
    flip = flips[0] if flips.size else None
    if hit is not None and (flip is None or hit <= flip):
        return int(hit), float(steps[hit])
    if flip is None:
        return None
    i = int(flip)
    ln_lo, ln_hi = math.log(steps[i]), math.log(steps[i + 1])
    frac = (target - losses[i]) / (losses[i + 1] - losses[i])
    return i, math.exp(ln_lo + frac * (ln_hi - ln_lo))


def _refine_crossing(
    steps: np.ndarray, losses: np.ndarray, target: float, seed: int, window: int
) -> float | None:
    """Re-solve a crossing by a local line fit of loss against log step.

    The raw first crossing is biased early under noise (any downward
    blip before the true crossing wins), so it only seeds a window here
    and the line through all samples in the window locates the contour.
    Returns None when the window cannot support a fit, in which case the
    caller keeps the interpolated seed.
    """
    lo = max(0, seed - window)
    hi = min(len(steps), seed + window + 2)
    if hi - lo < 4:
        return None
    ln_s = np.log(steps[lo:hi])
    line = _ols(ln_s, losses[lo:hi])
    if line.slope >= 0:
        return None
    ln_star = (target - line.intercept) / line.slope
    if ln_star < ln_s[0] or ln_star > ln_s[-1]:
        return None
    return math.exp(ln_star)


def extract_contours(
    runs, targets, split: str = "test", refine_window: int = 25
) -> list[ContourPoints]:
    """Find where each run of a batch scan crosses each target loss.

    Args:
        runs: RunRecords at one model size, assumed warm-up trimmed.
        targets: loss values to trace.
        split: preferred split to read losses from.
        refine_window: half-width, in samples, of the local line fit
            around each raw crossing; 0 keeps the raw interpolation.

    Returns:
        One ContourPoints per target that at least two runs crossed;
        targets with fewer crossings are dropped with a warning, as are
        runs that never reach a target.
    """
    runs = list(runs)
    if not runs:
        raise InsufficientDataError("no scan runs given")
    n0 = runs[0].n_params
    for run in runs[1:]:
        if abs(run.n_params - n0) > 1e-9 * n0:
            raise ValidationError(
                f"scan runs mix model sizes {n0!r} and {run.n_params!r}"
            )
    contours = []
    for target in np.asarray(targets, dtype=float):
        batches, steps_at = [], []
        for run in runs:
            steps, _, losses = run.split_arrays(_pick_split(run, split))
            found = _first_crossing(steps, losses, float(target))
            if found is None:
                warnings.warn(
                    f"run {run.run_id!r} never crosses loss {target:.6g}",
                    ScalingLawWarning,
                    stacklevel=2,
                )
                continue
            seed, crossing = found
            if refine_window > 0:
                refined = _refine_crossing(steps, losses, float(target), seed, refine_window)
                if refined is not None:
                    crossing = refined
            batches.append(run.batch_tokens)
            steps_at.append(crossing)
        if len(batches) < 2:
            warnings.warn(
                f"contour at loss {target:.6g} has {len(batches)} points and was dropped",
                ScalingLawWarning,
                stacklevel=2,
            )
            continue
        b = np.array(batches)
        s = np.array(steps_at)
        contours.append(ContourPoints(float(target), b, s, b * s))
    return contours


def fit_contour(points: ContourPoints) -> ContourFit:
    """Fit steps = s_min + e_min / batch to one contour.

    Raises:
        InsufficientDataError: fewer than two points.
        FitFailureError: non-positive intercept or slope, meaning the
            points do not describe a step/token trade-off.
    """
    stage = _ols(1.0 / points.batch_tokens, points.steps)
    s_min, e_min = stage.intercept, stage.slope
    if s_min <= 0 or e_min <= 0:
        raise FitFailureError(
            f"contour at loss {points.loss_target:.6g} fit s_min={s_min:.4g}, "
            f"e_min={e_min:.4g}; both must be positive"
        )
    resid = points.steps - (s_min + e_min / points.batch_tokens)
    return ContourFit(
        loss_target=points.loss_target,
        s_min_hat=float(s_min),
        e_min_hat=float(e_min),
        b_crit_hat=float(e_min / s_min),
        point_count=int(points.steps.size),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
    )


# ---------------------------------------------------------------------------
# stage 4: critical batch law across contours
# ---------------------------------------------------------------------------


def _gauss_newton(residual_and_jacobian, theta0, max_iter=100, rel_step_tol=1e-10):
    """Damped Gauss-Newton, guaranteed not to increase the squared residual."""
    theta = np.asarray(theta0, dtype=float)
    r, jac = residual_and_jacobian(theta)
    cost = float(r @ r)
    for _ in range(max_iter):
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        scale = 1.0
        for _ in range(30):
            candidate = theta + scale * step
            r_new, jac_new = residual_and_jacobian(candidate)
            cost_new = float(r_new @ r_new)
            if cost_new <= cost:
                break
            scale *= 0.5
        else:
            return theta
        converged = np.all(np.abs(scale * step) <= rel_step_tol * (np.abs(theta) + rel_step_tol))
        theta, r, jac, cost = candidate, r_new, jac_new, cost_new
        if converged:
            break
    return theta


def _fit_batch_pairs(losses: np.ndarray, b_crits: np.ndarray, refine: bool) -> PowerLawFit:
    """Fit b_crit = b_star / loss ** (1 / alpha_b) to (loss, b_crit) pairs."""
    ln_l = np.log(losses)
    ln_b = np.log(b_crits)
    stage = _ols(ln_l, ln_b)
    if stage.slope >= 0:
        raise FitFailureError(
            f"critical batch grows with loss (slope {stage.slope:.4g}); law not identifiable"
        )
    alpha_b = -1.0 / stage.slope
    b_star = math.exp(stage.intercept)
    if refine:
        # relative residuals in linear space; seeding alpha_b inside
        # (0, 0.5) keeps the exponent iteration stable
        seeded = min(max(alpha_b, 1e-3), 0.5 - 1e-9)

        def rj(theta):
            ln_b_star, inv_alpha = theta
            pred_ratio = np.exp(ln_b_star - inv_alpha * ln_l - ln_b)
            r = pred_ratio - 1.0
            jac = np.column_stack([pred_ratio, -ln_l * pred_ratio])
            return r, jac

        ln_b_star, inv_alpha = _gauss_newton(rj, [math.log(b_star), 1.0 / seeded])
        if inv_alpha <= 0 or not math.isfinite(ln_b_star):
            raise FitFailureError("batch-law refinement left the valid parameter region")
        alpha_b = 1.0 / inv_alpha
        b_star = math.exp(ln_b_star)
    if not _EXPONENT_RANGE[0] < alpha_b < _EXPONENT_RANGE[1]:
        raise FitFailureError(f"fitted alpha_b {alpha_b:.4g} outside {_EXPONENT_RANGE}")
    if not (math.isfinite(b_star) and b_star > 0):
        raise FitFailureError(f"fitted b_star {b_star!r} is not a positive number")
    return PowerLawFit(b_star, alpha_b, stage)


def fit_critical_batch_law(contours, refine: bool = False) -> PowerLawFit:
    """Fit the critical batch law from per-contour estimates.

    Args:
        contours: ContourFit sequence, at least two.
        refine: additionally run a damped Gauss-Newton on relative
            residuals, seeded from the least-squares solution.

    Returns:
        PowerLawFit with scale b_star and exponent alpha_b.
    """
    contours = list(contours)
    if len(contours) < 2:
        raise InsufficientDataError("critical-batch fit needs at least two contours")
    losses = np.array([f.loss_target for f in contours])
    b_crits = np.array([f.b_crit_hat for f in contours])
    return _fit_batch_pairs(losses, b_crits, refine)


def _batch_law_rms(losses, b_crits, b_star, alpha_b) -> float:
    resid = np.log(b_crits) - (math.log(b_star) - np.log(losses) / alpha_b)
    return float(np.sqrt(np.mean(resid**2)))


def post_correct_batch_law(
    candidate: ScalingConstants,
    scan_runs,
    contours=(),
    split: str = "test",
    refine: bool = False,
    min_excess: float = 0.25,
    denoise_window: int = 11,
) -> PostCorrection:
    """Refit the batch law on measured plus analytically derived pairs.

    Stages 1 and 2 pin the unbounded-batch step count for any observed
    loss, so every sample of every scan run yields its own critical
    batch estimate: b_crit = batch * (steps / s_min(loss) - 1). Pooling
    these with the per-contour estimates and refitting usually sharpens
    (b_star, alpha_b).

    Args:
        candidate: complete constants from the preceding stages.
        scan_runs: warm-up trimmed scan runs.
        contours: ContourFit sequence whose pairs join the pool.
        split: preferred split to read losses from.
        refine: passed through to the pooled refit.
        min_excess: smallest steps/s_min - 1 a sample may have. Near
            convergence the excess falls toward b_crit/batch, loss noise
            enters it multiplied by steps/s_min/excess, and truncating
            at zero would keep only upward fluctuations, so samples with
            little excess bias the pool instead of informing it.
        denoise_window: width in samples of a centered mean taken per
            run before pairing; 0 disables. The same measured loss sets
            both coordinates of a pair, amplified through s_min on one
            side, so raw noise does not average out of the refit slope
            but biases it the way measurement error always dilutes a
            regression. A symmetric window suppresses the noise without
            the lag a one-sided smoother would add; it cannot grow
            without bound, since a centered mean over a convex stretch
            of curve overstates the loss by the square of the width.

    Returns:
        PostCorrection with the refit values and the pooled residual
        before and after. With no usable scan samples the candidate's
        values are returned unchanged under a warning.
    """
    pooled_l = [np.array([f.loss_target for f in contours])]
    pooled_b = [np.array([f.b_crit_hat for f in contours])]
    analytic = 0
    for run in scan_runs:
        steps, _, losses = run.split_arrays(_pick_split(run, split))
        if denoise_window > 1 and losses.size >= 2 * denoise_window:
            kernel = np.full(denoise_window, 1.0 / denoise_window)
            losses = np.convolve(losses, kernel, mode="valid")
            half = denoise_window // 2
            steps = steps[half : half + losses.size]
        floor = loss_at_convergence(candidate, run.n_params)
        excess = losses - floor
        with np.errstate(invalid="ignore", divide="ignore"):
            s_min = candidate.s_c * np.where(excess > 0, excess, np.nan) ** (-1.0 / candidate.alpha_s)
            ratio = steps / s_min - 1.0
        keep = np.isfinite(ratio) & (ratio > min_excess)
        if np.any(keep):
            analytic += int(np.sum(keep))
            pooled_l.append(losses[keep])
            pooled_b.append(run.batch_tokens * ratio[keep])
    losses = np.concatenate(pooled_l)
    b_crits = np.concatenate(pooled_b)
    before = _batch_law_rms(losses, b_crits, candidate.b_star, candidate.alpha_b) if losses.size else math.nan
    if analytic == 0:
        warnings.warn(
            "no scan samples usable for post-correction; batch law left unchanged",
            ScalingLawWarning,
            stacklevel=2,
        )
        return PostCorrection(
            candidate.b_star, candidate.alpha_b, int(losses.size), before, before
        )
    refit = _fit_batch_pairs(losses, b_crits, refine)
    after = _batch_law_rms(losses, b_crits, refit.scale, refit.exponent)
    return PostCorrection(refit.scale, refit.exponent, int(losses.size), before, after)


# ---------------------------------------------------------------------------
# regime diagnostics
# ---------------------------------------------------------------------------


def diagnose_infinite_data(
    run: RunRecord,
    threshold: float = 0.01,
    trim: WarmupTrim = WarmupTrim(),
) -> DataDiagnostic:
    """Check whether a run's train/test gap is small enough to ignore.

    Args:
        run: a run carrying both splits; test losses are interpolated
            onto the train steps when the grids differ.
        threshold: largest tolerable absolute gap in nats.

    Raises:
        DiagnosticError: a split is missing or the grids do not overlap.
    """
    trimmed = trim_warmup(run, trim)
    if set(trimmed.splits()) != {"train", "test"}:
        raise DiagnosticError(
            f"run {run.run_id!r} needs both splits, has {trimmed.splits()!r}"
        )
    tr_steps, _, tr_losses = trimmed.split_arrays("train")
    te_steps, _, te_losses = trimmed.split_arrays("test")
    if tr_steps.size == te_steps.size and np.array_equal(tr_steps, te_steps):
        gaps = np.abs(te_losses - tr_losses)
    else:
        inside = (tr_steps >= te_steps[0]) & (tr_steps <= te_steps[-1])
        if not np.any(inside):
            raise DiagnosticError(f"run {run.run_id!r}: splits share no step range")
        interp = np.interp(np.log(tr_steps[inside]), np.log(te_steps), te_losses)
        gaps = np.abs(interp - tr_losses[inside])
    max_gap = float(gaps.max())
    return DataDiagnostic(max_gap, threshold, max_gap < threshold)


def diagnose_infinite_batch(
    runs,
    threshold: float = 0.005,
    trim: WarmupTrim = WarmupTrim(),
    split: str = "test",
) -> BatchDiagnostic:
    """Find the smallest batch whose loss curve has stopped moving.

    Compares each run's curve with the next larger batch's curve on
    their shared step range; the first pair closer than ``threshold``
    everywhere names the stationary batch.

    Args:
        runs: at least two runs at one model size, batches strictly
            increasing.

    Returns:
        BatchDiagnostic; ``stationary_batch`` is None when every pair
        still differs by the threshold or more.
    """
    runs = list(runs)
    if len(runs) < 2:
        raise InsufficientDataError("batch diagnostic needs at least two runs")
    n0 = runs[0].n_params
    batches = [r.batch_tokens for r in runs]
    for run in runs[1:]:
        if abs(run.n_params - n0) > 1e-9 * n0:
            raise ValidationError(f"runs mix model sizes {n0!r} and {run.n_params!r}")
    if np.any(np.diff(batches) <= 0):
        raise ValidationError(f"batches must be strictly increasing, got {batches!r}")
    curves = []
    for run in runs:
        trimmed = trim_warmup(run, trim)
        steps, _, losses = trimmed.split_arrays(_pick_split(trimmed, split))
        curves.append((steps, losses))
    deviations = []
    stationary = None
    for i in range(len(runs) - 1):
        s_small, l_small = curves[i]
        s_large, l_large = curves[i + 1]
        lo = max(s_small[0], s_large[0])
        hi = min(s_small[-1], s_large[-1])
        inside = (s_small >= lo) & (s_small <= hi)
        if not np.any(inside):
            warnings.warn(
                f"runs at batches {batches[i]:g} and {batches[i + 1]:g} share no steps",
                ScalingLawWarning,
                stacklevel=2,
            )
            deviations.append((batches[i], batches[i + 1], math.inf))
            continue
        interp = np.interp(np.log(s_small[inside]), np.log(s_large), l_large)
        dev = float(np.abs(interp - l_small[inside]).max())
        deviations.append((batches[i], batches[i + 1], dev))
        if stationary is None and dev < threshold:
            stationary = batches[i]
    return BatchDiagnostic(stationary, deviations, threshold)


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------


def fit_full_pipeline(
    converged,
    big_batch_run: RunRecord,
    scan_runs=(),
    options: FitOptions | None = None,
) -> FitReport:
    """Run all fitting stages and assemble the constants.

    Args:
        converged: ConvergedRun sequence for stage 1.
        big_batch_run: one run at effectively unbounded batch for
            stage 2.
        scan_runs: batch scan for stages 3 and 4; with none given the
            report is marked incomplete and carries no batch law.
        options: pipeline knobs, defaults throughout when None.

    Returns:
        FitReport; ``constants`` is a full ScalingConstants exactly when
        the scan stages ran.
    """
    opts = options or FitOptions()
    notes: list[str] = []
    converged = list(converged)
    scan_runs = list(scan_runs)

    size_fit = fit_converged_law(converged)
    step_fit = fit_step_law(
        size_fit.scale, size_fit.exponent, big_batch_run, trim=opts.trim, split=opts.split
    )

    meta = {
        "dataset_tag": big_batch_run.dataset_tag,
        "context_length": big_batch_run.context_length,
        "converged_runs": len(converged),
        "scan_runs": len(scan_runs),
    }
    meta.update(opts.meta)
    if not scan_runs:
        message = "no scan runs given; batch law not fitted"
        warnings.warn(message, ScalingLawWarning, stacklevel=2)
        notes.append(message)
        return FitReport(
            n_c=size_fit.scale,
            alpha_n=size_fit.exponent,
            s_c=step_fit.scale,
            alpha_s=step_fit.exponent,
            b_star=None,
            alpha_b=None,
            constants=None,
            converged_stage=size_fit.stage,
            step_stage=step_fit.stage,
            contours=[],
            batch_stage=None,
            post_correction=None,
            complete=False,
            warnings=notes,
        )

    prepared = [trim_warmup(run, opts.trim) for run in scan_runs]
    if opts.smooth_half_life is not None:
        prepared = [ema_smooth(run, opts.smooth_half_life) for run in prepared]
    if opts.contour_targets is None:
        targets = default_contour_targets(
            prepared, opts.num_targets, split=opts.split, inset=opts.target_inset
        )
    else:
        targets = np.asarray(opts.contour_targets, dtype=float)
    points = extract_contours(prepared, targets, split=opts.split)
    if not points:
        raise InsufficientDataError("no contour has two or more crossings")
    contour_fits = [fit_contour(p) for p in points]
    batch_fit = fit_critical_batch_law(contour_fits, refine=opts.refine_batch_law)

    b_star, alpha_b = batch_fit.scale, batch_fit.exponent
    post = None
    if opts.post_correct:
        candidate = ScalingConstants(
            n_c=size_fit.scale, alpha_n=size_fit.exponent,
            s_c=step_fit.scale, alpha_s=step_fit.exponent,
            b_star=b_star, alpha_b=alpha_b, meta=meta,
        )
        post = post_correct_batch_law(
            candidate, prepared, contour_fits, split=opts.split, refine=opts.refine_batch_law
        )
        b_star, alpha_b = post.b_star, post.alpha_b

    constants = ScalingConstants(
        n_c=size_fit.scale, alpha_n=size_fit.exponent,
        s_c=step_fit.scale, alpha_s=step_fit.exponent,
        b_star=b_star, alpha_b=alpha_b, meta=meta,
    )
    return FitReport(
        n_c=size_fit.scale,
        alpha_n=size_fit.exponent,
        s_c=step_fit.scale,
        alpha_s=step_fit.exponent,
        b_star=b_star,
        alpha_b=alpha_b,
        constants=constants,
        converged_stage=size_fit.stage,
        step_stage=step_fit.stage,
        contours=contour_fits,
        batch_stage=batch_fit.stage,
        post_correction=post,
        complete=True,
        warnings=notes,
    )
