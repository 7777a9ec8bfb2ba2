"""Staged fitting: each stage in isolation, then the assembled pipeline."""

import numpy as np
import pytest

from scalinglaws import (
    C4_CONSTANTS,
    ContourPoints,
    ConvergedRun,
    DiagnosticError,
    FitFailureError,
    FitOptions,
    InconsistentConstantsError,
    InsufficientDataError,
    RunRecord,
    ScalingLawWarning,
    TrajectorySample,
    ValidationError,
    WarmupTrim,
    critical_batch,
    default_contour_targets,
    diagnose_infinite_batch,
    diagnose_infinite_data,
    extract_contours,
    extract_converged_run,
    fit_contour,
    fit_converged_law,
    fit_critical_batch_law,
    fit_full_pipeline,
    fit_step_law,
    gen_batch_scan,
    gen_converged_log,
    gen_converged_suite,
    gen_trajectory,
    loss_at_convergence,
    min_steps_for_loss,
    post_correct_batch_law,
    solve_loss,
    trim_warmup,
)
from scalinglaws.fitting import ContourFit

C4 = C4_CONSTANTS


def simple_run(steps, losses, batch=1e6, run_id="r0", n_params=1e7):
    samples = []
    for s, l in zip(steps, losses):
        for split in ("train", "test"):
            samples.append(TrajectorySample(float(s), float(s) * batch, float(l), split))
    return RunRecord(
        run_id=run_id, n_params=n_params, batch_tokens=batch,
        context_length=1024, dataset_tag="c4", samples=samples,
    )


def scan_steps(batch, lo_loss=4.2, margin=1.25):
    """Steps needed for a scan run at one batch to cross lo_loss."""
    s_min = min_steps_for_loss(C4, 1e7, lo_loss)
    return int(margin * s_min * (1.0 + critical_batch(C4, lo_loss) / batch))


class TestConvergedLaw:
    def test_exact_recovery(self):
        runs = gen_converged_suite(C4, np.geomspace(1e6, 6e7, 7))
        fit = fit_converged_law(runs)
        assert fit.exponent == pytest.approx(C4.alpha_n, rel=1e-12)
        assert fit.scale == pytest.approx(C4.n_c, rel=1e-9)
        assert fit.stage.r_squared == pytest.approx(1.0, abs=1e-12)
        assert fit.stage.count == 7

    def test_needs_two_distinct_sizes(self):
        one = [ConvergedRun(1e7, 3.5)]
        with pytest.raises(InsufficientDataError):
            fit_converged_law(one)
        with pytest.raises(InsufficientDataError):
            fit_converged_law([ConvergedRun(1e7, 3.5), ConvergedRun(1e7, 3.4)])

    def test_warns_on_non_monotone_losses(self):
        runs = [ConvergedRun(1e6, 5.0), ConvergedRun(1e7, 5.5), ConvergedRun(1e8, 3.0)]
        with pytest.warns(ScalingLawWarning, match="not monotone"):
            fit_converged_law(runs)


class TestExtractConvergedRun:
    def test_tail_mean_of_plateau(self):
        run = gen_converged_log(C4, n=1e7, samples=100)
        out = extract_converged_run(run, tail_fraction=0.25)
        assert out.n_params == 1e7
        assert out.final_loss == pytest.approx(loss_at_convergence(C4, 1e7), rel=1e-12)

    def test_tail_fraction_bounds(self):
        run = gen_converged_log(C4, n=1e7, samples=10)
        for bad in (0.0, -0.1, 1.5):
            with pytest.raises(ValidationError):
                extract_converged_run(run, tail_fraction=bad)

    def test_averages_noise_down(self):
        from scalinglaws import NoiseSpec
        noise = NoiseSpec(sigma=0.01, seed=7, kind="multiplicative-lognormal")
        run = gen_converged_log(C4, n=1e7, samples=240, noise=noise)
        out = extract_converged_run(run, tail_fraction=0.25)
        true = loss_at_convergence(C4, 1e7)
        # 60-sample mean: se about 0.0013 in log space, allow 4 se
        assert abs(np.log(out.final_loss / true)) < 0.006


class TestStepLaw:
    def test_exact_recovery_at_unbounded_batch(self):
        run = gen_trajectory(C4, n=1e7, batch_tokens=1e12, num_steps=3000, log_every=25)
        fit = fit_step_law(C4.n_c, C4.alpha_n, run)
        assert fit.exponent == pytest.approx(C4.alpha_s, rel=1e-5)
        assert fit.scale == pytest.approx(C4.s_c, rel=1e-4)

    def test_floor_violation_is_inconsistency(self):
        run = simple_run([1000, 2000], [3.0, 2.9], batch=1e12)
        with pytest.raises(InconsistentConstantsError, match="converged floor"):
            fit_step_law(C4.n_c, C4.alpha_n, run)

    def test_needs_two_samples_after_trim(self):
        run = simple_run([150], [4.5], batch=1e12)
        with pytest.raises(InsufficientDataError):
            fit_step_law(C4.n_c, C4.alpha_n, run)


class TestContourTargets:
    def test_shared_range_with_inset(self):
        a = simple_run([100, 200], [3.0, 1.0], batch=1e5, run_id="a")
        b = simple_run([100, 200], [4.0, 2.0], batch=1e6, run_id="b")
        targets = default_contour_targets([a, b], num_targets=3)
        np.testing.assert_allclose(targets, [2.05, 2.5, 2.95], rtol=1e-12)

    def test_disjoint_ranges_rejected(self):
        a = simple_run([100, 200], [3.0, 1.0], batch=1e5, run_id="a")
        b = simple_run([100, 200], [0.5, 0.4], batch=1e6, run_id="b")
        with pytest.raises(InsufficientDataError, match="no loss range"):
            default_contour_targets([a, b])

    def test_target_count_validated(self):
        a = simple_run([100, 200], [3.0, 1.0])
        with pytest.raises(ValidationError):
            default_contour_targets([a], num_targets=0)
        with pytest.raises(InsufficientDataError):
            default_contour_targets([])


class TestExtractContours:
    def test_log_interpolated_crossing(self):
        # two samples cannot support refinement, so the crossing is the
        # log-space interpolation: exp(mean(ln 100, ln 200)) = 100*sqrt(2)
        a = simple_run([100, 200], [3.0, 1.0], batch=1e5, run_id="a")
        b = simple_run([100, 200], [3.0, 1.0], batch=1e6, run_id="b")
        contours = extract_contours([a, b], [2.0])
        assert len(contours) == 1
        np.testing.assert_allclose(contours[0].steps, 141.4213562373095, rtol=1e-12)
        np.testing.assert_allclose(
            contours[0].tokens, contours[0].steps * contours[0].batch_tokens, rtol=1e-12
        )

    def test_exact_hit_wins(self):
        a = simple_run([100, 200, 400], [3.0, 2.0, 1.0], batch=1e5, run_id="a")
        b = simple_run([100, 200, 400], [3.0, 2.0, 1.0], batch=1e6, run_id="b")
        contours = extract_contours([a, b], [2.0])
        np.testing.assert_allclose(contours[0].steps, 200.0, rtol=1e-12)

    def test_refined_crossing_on_dense_run(self):
        runs = [
            gen_trajectory(C4, n=1e7, batch_tokens=b, num_steps=2000, run_id=f"b{b:g}")
            for b in (1e5, 1e6)
        ]
        target = float(solve_loss(C4, 1e7, 777.0, 1e5))
        contours = extract_contours(runs, [target])
        assert contours[0].steps[0] == pytest.approx(777.0, rel=1e-3)

    def test_uncrossed_target_dropped_with_warning(self):
        a = simple_run([100, 200], [3.0, 1.0], batch=1e5, run_id="a")
        b = simple_run([100, 200], [3.0, 2.5], batch=1e6, run_id="b")
        with pytest.warns(ScalingLawWarning):
            contours = extract_contours([a, b], [2.0])
        assert contours == []

    def test_mixed_sizes_rejected(self):
        a = simple_run([100, 200], [3.0, 1.0], batch=1e5, run_id="a", n_params=1e7)
        b = simple_run([100, 200], [3.0, 1.0], batch=1e6, run_id="b", n_params=2e7)
        with pytest.raises(ValidationError, match="mix model sizes"):
            extract_contours([a, b], [2.0])

    def test_no_runs_rejected(self):
        with pytest.raises(InsufficientDataError):
            extract_contours([], [2.0])


class TestFitContour:
    def test_exact_line_recovery(self):
        batches = np.array([1e4, 1e5, 1e6, 1e7])
        steps = 1000.0 + 2e8 / batches
        points = ContourPoints(2.5, batches, steps, batches * steps)
        fit = fit_contour(points)
        assert fit.s_min_hat == pytest.approx(1000.0, rel=1e-9)
        assert fit.e_min_hat == pytest.approx(2e8, rel=1e-9)
        assert fit.b_crit_hat == pytest.approx(2e5, rel=1e-9)
        assert fit.residual_rms == pytest.approx(0.0, abs=1e-6)
        assert fit.point_count == 4

    def test_negative_tradeoff_rejected(self):
        batches = np.array([1e4, 1e5, 1e6])
        steps = 1000.0 - 9e6 / batches
        points = ContourPoints(2.5, batches, steps, batches * steps)
        with pytest.raises(FitFailureError, match="must be positive"):
            fit_contour(points)

    def test_single_point_rejected(self):
        points = ContourPoints(2.5, np.array([1e5]), np.array([3000.0]), np.array([3e8]))
        with pytest.raises(InsufficientDataError):
            fit_contour(points)


def exact_contour(loss, b_star=C4.b_star, alpha_b=C4.alpha_b):
    b_crit = b_star * loss ** (-1.0 / alpha_b)
    return ContourFit(loss, 1000.0, 1000.0 * b_crit, b_crit, 6, 0.0)


class TestCriticalBatchLaw:
    def test_exact_recovery(self):
        contours = [exact_contour(l) for l in (2.0, 2.5, 3.0, 3.5, 4.0)]
        fit = fit_critical_batch_law(contours)
        assert fit.exponent == pytest.approx(C4.alpha_b, rel=1e-12)
        assert fit.scale == pytest.approx(C4.b_star, rel=1e-9)

    def test_refined_fit_matches_on_exact_data(self):
        contours = [exact_contour(l) for l in (2.0, 2.5, 3.0, 3.5, 4.0)]
        fit = fit_critical_batch_law(contours, refine=True)
        assert fit.exponent == pytest.approx(C4.alpha_b, rel=1e-9)
        assert fit.scale == pytest.approx(C4.b_star, rel=1e-6)

    def test_needs_two_contours(self):
        with pytest.raises(InsufficientDataError):
            fit_critical_batch_law([exact_contour(2.0)])

    def test_growing_batch_not_identifiable(self):
        rising = [
            ContourFit(2.0, 1000.0, 1e8, 1e5, 6, 0.0),
            ContourFit(4.0, 1000.0, 4e8, 4e5, 6, 0.0),
        ]
        with pytest.raises(FitFailureError, match="grows with loss"):
            fit_critical_batch_law(rising)


class TestPostCorrection:
    def test_tightens_noiseless_fit(self):
        batches = np.geomspace(1e4, 2.15e7, 4)
        runs = gen_batch_scan(
            C4, n=1e7, batches=list(batches),
            num_steps=[scan_steps(b) for b in batches],
        )
        # trim first, as the pipeline does: targets set from untrimmed
        # runs land in the warm-up region where batch has no effect
        runs = [trim_warmup(r) for r in runs]
        targets = default_contour_targets(runs, 5)
        contour_fits = [fit_contour(p) for p in extract_contours(runs, targets)]
        post = post_correct_batch_law(C4, runs, contour_fits)
        assert post.alpha_b == pytest.approx(C4.alpha_b, rel=1e-4)
        assert post.b_star == pytest.approx(C4.b_star, rel=1e-3)
        assert post.residual_rms_after <= post.residual_rms_before + 1e-12
        assert post.pair_count > len(contour_fits)

    def test_unusable_samples_leave_candidate_unchanged(self):
        # a plateau log has zero excess everywhere, so no analytic pairs
        run = gen_converged_log(C4, n=1e7, samples=60)
        with pytest.warns(ScalingLawWarning, match="left unchanged"):
            post = post_correct_batch_law(C4, [run])
        assert post.b_star == C4.b_star
        assert post.alpha_b == C4.alpha_b
        assert post.pair_count == 0


class TestDiagnostics:
    def test_identical_splits_mean_unbounded_data(self):
        run = gen_trajectory(C4, n=1e7, batch_tokens=1e6, num_steps=500, log_every=50)
        verdict = diagnose_infinite_data(run)
        assert verdict.data_unbounded
        assert verdict.max_gap == 0.0

    def test_gap_above_threshold_flags_bounded_data(self):
        samples = []
        for step in (200.0, 400.0, 800.0):
            samples.append(TrajectorySample(step, step * 1e6, 3.0, "train"))
            samples.append(TrajectorySample(step, step * 1e6, 3.05, "test"))
        run = RunRecord(
            run_id="r0", n_params=1e7, batch_tokens=1e6,
            context_length=1024, dataset_tag="c4", samples=samples,
        )
        verdict = diagnose_infinite_data(run)
        assert not verdict.data_unbounded
        assert verdict.max_gap == pytest.approx(0.05, rel=1e-9)

    def test_interpolates_offset_grids(self):
        samples = []
        for step in (200.0, 400.0, 800.0):
            samples.append(TrajectorySample(step, step * 1e6, 3.0, "train"))
        for step in (150.0, 300.0, 900.0):
            samples.append(TrajectorySample(step, step * 1e6, 3.0, "test"))
        run = RunRecord(
            run_id="r0", n_params=1e7, batch_tokens=1e6,
            context_length=1024, dataset_tag="c4", samples=samples,
        )
        verdict = diagnose_infinite_data(run)
        assert verdict.data_unbounded

    def test_missing_split_is_diagnostic_error(self):
        samples = [TrajectorySample(200.0, 2e8, 3.0, "train")]
        run = RunRecord(
            run_id="r0", n_params=1e7, batch_tokens=1e6,
            context_length=1024, dataset_tag="c4", samples=samples,
        )
        with pytest.raises(DiagnosticError, match="both splits"):
            diagnose_infinite_data(run)

    def test_stationary_batch_found(self):
        runs = gen_batch_scan(
            C4, n=1e7, batches=[1e4, 1e5, 1e11, 1e12], num_steps=500, log_every=50
        )
        verdict = diagnose_infinite_batch(runs)
        assert verdict.stationary_batch == 1e11
        # the small-batch pair still moves
        assert verdict.deviations[0][2] > verdict.threshold

    def test_all_moving_batches_give_none(self):
        runs = gen_batch_scan(C4, n=1e7, batches=[1e4, 1e5, 1e6], num_steps=500, log_every=50)
        verdict = diagnose_infinite_batch(runs)
        assert verdict.stationary_batch is None

    def test_batch_order_enforced(self):
        runs = gen_batch_scan(C4, n=1e7, batches=[1e4, 1e5], num_steps=200, log_every=20)
        with pytest.raises(ValidationError, match="strictly increasing"):
            diagnose_infinite_batch(list(reversed(runs)))

    def test_needs_two_runs(self):
        runs = gen_batch_scan(C4, n=1e7, batches=[1e4, 1e5], num_steps=200, log_every=20)
        with pytest.raises(InsufficientDataError):
            diagnose_infinite_batch(runs[:1])


class TestFullPipeline:
    def test_noiseless_recovery(self):
        converged = gen_converged_suite(C4, np.geomspace(1e6, 6e7, 5))
        big = gen_trajectory(C4, n=1e7, batch_tokens=1e12, num_steps=3000)
        batches = np.geomspace(1e4, 2.15e7, 4)
        scans = gen_batch_scan(
            C4, n=1e7, batches=list(batches),
            num_steps=[scan_steps(b) for b in batches],
        )
        report = fit_full_pipeline(converged, big, scans)
        assert report.complete
        c = report.constants
        assert c.alpha_n == pytest.approx(C4.alpha_n, rel=1e-4)
        assert c.alpha_s == pytest.approx(C4.alpha_s, rel=1e-4)
        assert c.alpha_b == pytest.approx(C4.alpha_b, rel=1e-3)
        assert c.n_c == pytest.approx(C4.n_c, rel=1e-3)
        assert c.s_c == pytest.approx(C4.s_c, rel=1e-3)
        assert c.b_star == pytest.approx(C4.b_star, rel=1e-2)
        assert c.meta["dataset_tag"] == "c4"
        assert c.meta["scan_runs"] == 4
        assert report.post_correction is not None
        assert report.batch_stage is not None
        assert len(report.contours) == 5

    def test_no_scans_is_incomplete(self):
        converged = gen_converged_suite(C4, [1e6, 1e7, 1e8])
        big = gen_trajectory(C4, n=1e7, batch_tokens=1e12, num_steps=2000, log_every=10)
        with pytest.warns(ScalingLawWarning, match="no scan runs"):
            report = fit_full_pipeline(converged, big)
        assert not report.complete
        assert report.constants is None
        assert report.b_star is None and report.alpha_b is None
        assert report.n_c == pytest.approx(C4.n_c, rel=1e-3)
        assert report.warnings and "batch law not fitted" in report.warnings[0]

    def test_explicit_targets_respected(self):
        converged = gen_converged_suite(C4, [1e6, 1e7, 1e8])
        big = gen_trajectory(C4, n=1e7, batch_tokens=1e12, num_steps=2000, log_every=10)
        batches = np.geomspace(1e5, 1e7, 3)
        scans = gen_batch_scan(
            C4, n=1e7, batches=list(batches),
            num_steps=[scan_steps(b) for b in batches],
        )
        opts = FitOptions(contour_targets=(4.4, 4.6), post_correct=False)
        report = fit_full_pipeline(converged, big, scans, opts)
        assert [f.loss_target for f in report.contours] == [4.4, 4.6]
        assert report.post_correction is None
