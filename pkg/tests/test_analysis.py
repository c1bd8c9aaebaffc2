"""Histogramming, normalization, background subtraction, and corrections."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdcascade.analysis import (
    CoincidenceHistogram,
    VisibilityReport,
    build_histogram,
    correct_visibility,
    correction_factor,
    estimate_background,
    g2_vs_window,
    g2_zero,
    hom_visibility,
    integrate_peak,
    select_noise_boundary,
    side_peak_centers,
)
from qdcascade.errors import (
    AnalysisError,
    DegenerateNormalizationError,
    ParameterError,
    PlateauSelectionError,
)
from qdcascade.streams import TimeTagStream

PERIOD = 13100.0


def make_stream(channels, timestamps):
    order = np.argsort(timestamps, kind="stable")
    return TimeTagStream(
        channels=np.asarray(channels, dtype=np.uint8)[order],
        timestamps=np.asarray(timestamps, dtype=np.int64)[order],
        header={"pulse_period_ps": repr(PERIOD)},
    )


def make_hist(counts, bin_width=10.0, pulse_period=PERIOD):
    counts = np.asarray(counts, dtype=np.int64)
    return CoincidenceHistogram(
        bin_width=bin_width,
        delay_range=bin_width * len(counts) / 2.0,
        counts=counts,
        total_pairs=int(counts.sum()),
        pulse_period=pulse_period,
    )


def comb_histogram(rng, side_level, central_level, background=0.0,
                   n_periods=11, bin_width=10.0):
    """Poisson histogram with peaks at multiples of the period.

    ``side_level`` and ``central_level`` are expected counts per peak spread
    over a 500 ps wide block; ``background`` is a flat mean per bin.
    """
    delay_range = (n_periods + 0.5) * PERIOD
    delay_range = bin_width * round(delay_range / bin_width)
    n_bins = int(round(2 * delay_range / bin_width))
    centers = -delay_range + (np.arange(n_bins) + 0.5) * bin_width
    mean = np.full(n_bins, background, dtype=float)
    block = int(500.0 / bin_width)
    for m in range(-n_periods, n_periods + 1):
        level = central_level if m == 0 else side_level
        start = np.searchsorted(centers, m * PERIOD - 250.0)
        mean[start:start + block] += level / block
    counts = rng.poisson(mean)
    return CoincidenceHistogram(
        bin_width=bin_width, delay_range=delay_range, counts=counts,
        total_pairs=int(counts.sum()), pulse_period=PERIOD,
    )


class TestBuildHistogram:
    def test_empty_stream(self):
        hist = build_histogram(make_stream([], []), 10.0, 1000.0)
        assert hist.counts.sum() == 0
        assert len(hist.counts) == 200

    def test_two_tags_single_pair(self):
        hist = build_histogram(make_stream([0, 1], [0, 100]), 10.0, 1000.0)
        assert hist.counts.sum() == 1
        idx = np.flatnonzero(hist.counts)[0]
        assert hist.bin_centers[idx] == pytest.approx(105.0)

    def test_delay_sign_convention(self):
        # delay is t(ch1) - t(ch0)
        hist = build_histogram(make_stream([1, 0], [0, 100]), 10.0, 1000.0)
        idx = np.flatnonzero(hist.counts)[0]
        assert hist.bin_centers[idx] == pytest.approx(-95.0)

    def test_uncorrelated_poisson_streams_are_flat(self):
        rng = np.random.default_rng(0)
        duration = 5_000_000
        t0 = np.sort(rng.integers(0, duration, 40_000))
        t1 = np.sort(rng.integers(0, duration, 40_000))
        stream = make_stream(
            np.concatenate([np.zeros(40_000), np.ones(40_000)]),
            np.concatenate([t0, t1]),
        )
        hist = build_histogram(stream, 100.0, 20_000.0)
        mean = hist.counts.mean()
        sigma = np.sqrt(mean)
        outside = np.abs(hist.counts - mean) > 3.0 * sigma
        assert outside.mean() < 0.01
        assert mean == pytest.approx(40_000 * 40_000 * 100.0 / duration, rel=0.05)

    def test_rejects_sub_picosecond_bins(self):
        with pytest.raises(ParameterError):
            build_histogram(make_stream([], []), 0.5, 1000.0)


class TestIntegratePeak:
    def test_all_zero(self):
        assert integrate_peak(make_hist(np.zeros(2620)), 0.0, 13100.0) == 0

    def test_delta_peak_captured(self):
        counts = np.zeros(2620, dtype=int)
        counts[1310] = 500  # first bin at +delay 0..10ps
        assert integrate_peak(make_hist(counts), 0.0, 1000.0) == 500

    def test_bin_center_rule_upper_edge_excluded(self):
        counts = np.zeros(200, dtype=int)
        hist = make_hist(counts, bin_width=10.0, pulse_period=2000.0)
        # window [-50, 50): centers at +-45 included, +55 is not, -55 is not
        idx = (np.abs(hist.bin_centers) <= 45.0 + 1e-9)
        counts[idx] = 1
        counts[np.abs(np.abs(hist.bin_centers) - 55.0) < 1e-9] = 100
        hist = make_hist(counts, bin_width=10.0, pulse_period=2000.0)
        assert integrate_peak(hist, 0.0, 100.0) == 10

    def test_window_additivity(self):
        rng = np.random.default_rng(1)
        counts = rng.integers(0, 50, 2620)
        hist = make_hist(counts)
        whole = integrate_peak(hist, 0.0, 2000.0)
        left = integrate_peak(hist, -500.0, 1000.0)
        right = integrate_peak(hist, 500.0, 1000.0)
        assert whole == left + right

    def test_double_exponential_integral(self):
        # two-sided exponential of known total mass, window-truncation error
        # below 0.1 percent
        bin_width = 10.0
        n = 2620
        centers = -13100.0 + (np.arange(n) + 0.5) * bin_width
        tau = 400.0
        total = 200_000.0
        mass = total * (np.exp(-np.abs(centers - bin_width / 2) / tau)
                        - np.exp(-np.abs(centers + bin_width / 2) / tau))
        mass[centers < 0] = total * (
            np.exp((centers[centers < 0] - bin_width / 2) / tau)
            - np.exp((centers[centers < 0] + bin_width / 2) / tau)
        )
        mass = np.abs(mass) / 2.0
        hist = make_hist(np.round(mass).astype(int))
        measured = integrate_peak(hist, 0.0, 13100.0)
        assert measured == pytest.approx(total, rel=1e-3)

    def test_rejects_window_outside_range(self):
        hist = make_hist(np.zeros(100), bin_width=10.0, pulse_period=600.0)
        with pytest.raises(ParameterError):
            integrate_peak(hist, 400.0, 500.0)


class TestG2Zero:
    def test_empty_central_peak(self):
        rng = np.random.default_rng(2)
        hist = comb_histogram(rng, side_level=500.0, central_level=0.0)
        result = g2_zero(hist, 13100.0)
        assert result.g2_zero == 0.0
        assert result.error == 0.0

    def test_poisson_light_is_unity(self):
        rng = np.random.default_rng(3)
        hist = comb_histogram(rng, side_level=4000.0, central_level=4000.0)
        result = g2_zero(hist, 13100.0)
        assert abs(result.g2_zero - 1.0) < 3.0 * result.error
        assert result.error < 0.05

    def test_degenerate_normalization_raises(self):
        hist = make_hist(np.zeros(2620 * 11))
        with pytest.raises(DegenerateNormalizationError):
            g2_zero(hist, 13100.0)

    def test_side_peak_enumeration(self):
        hist = make_hist(np.zeros(2620 * 11))
        centers = side_peak_centers(hist, 13100.0, 10)
        assert centers == [PERIOD, -PERIOD, 2 * PERIOD, -2 * PERIOD,
                           3 * PERIOD, -3 * PERIOD, 4 * PERIOD, -4 * PERIOD,
                           5 * PERIOD, -5 * PERIOD]
        with pytest.raises(ParameterError):
            side_peak_centers(hist, 13100.0, 25)


class TestG2VersusWindow:
    def test_background_free_curve_is_flat(self):
        rng = np.random.default_rng(4)
        hist = comb_histogram(rng, side_level=20_000.0, central_level=400.0)
        curve = g2_vs_window(hist, np.arange(2000.0, 13001.0, 1000.0))
        spread = curve[:, 1].max() - curve[:, 1].min()
        assert spread < 4.0 * curve[:, 2].max()

    def test_flat_background_inflates_with_window(self):
        rng = np.random.default_rng(5)
        hist = comb_histogram(rng, side_level=20_000.0, central_level=400.0,
                              background=40.0)
        curve = g2_vs_window(hist, np.arange(1000.0, 13001.0, 1000.0))
        assert np.all(np.diff(curve[:, 1]) > 0.0)

    def test_exact_subtraction_restores_flatness(self):
        rng = np.random.default_rng(6)
        hist = comb_histogram(rng, side_level=20_000.0, central_level=400.0,
                              background=40.0)
        curve = g2_vs_window(hist, np.arange(2000.0, 13001.0, 1000.0),
                             background=40.0)
        spread = curve[:, 1].max() - curve[:, 1].min()
        assert spread < 4.0 * curve[:, 2].max()


class TestBackgroundEstimation:
    def test_all_zero(self):
        assert estimate_background(make_hist(np.zeros(100, dtype=int)), 10.0) == 0.0

    def test_flat_histogram(self):
        assert estimate_background(make_hist(np.full(100, 5)), 10.0) == 5.0

    def test_poisson_level_recovery(self):
        rng = np.random.default_rng(7)
        level = 20.0
        hist = make_hist(rng.poisson(level, 30_000))
        assert estimate_background(hist, 2.0 * level) == pytest.approx(level,
                                                                       rel=0.05)

    def test_rejects_nonpositive_boundary(self):
        with pytest.raises(ParameterError):
            estimate_background(make_hist(np.zeros(10)), 0.0)


class TestNoiseBoundarySelection:
    WINDOWS = np.arange(1000.0, 13001.0, 1000.0)

    def test_noiseless_data_selects_smallest(self):
        rng = np.random.default_rng(8)
        hist = comb_histogram(rng, side_level=30_000.0, central_level=600.0)
        sel = select_noise_boundary(hist, [5.0, 10.0, 20.0, 40.0], self.WINDOWS)
        assert sel.boundary == 5.0
        assert all(c.flatness_score < 1.0 for c in sel.candidates)

    def test_recovers_injected_level(self):
        rng = np.random.default_rng(9)
        level = 25.0
        hist = comb_histogram(rng, side_level=60_000.0, central_level=1500.0,
                              background=level)
        sel = select_noise_boundary(hist, [5.0, 10.0, 50.0, 100.0, 200.0],
                                    self.WINDOWS)
        assert sel.background == pytest.approx(level, rel=0.10)

    def test_exactly_one_plateau_regime(self):
        # boundaries below the noise floor under-subtract (rising curve),
        # boundaries far above swallow signal bins (falling curve)
        rng = np.random.default_rng(10)
        hist = comb_histogram(rng, side_level=60_000.0, central_level=1500.0,
                              background=25.0)
        sel = select_noise_boundary(hist, [5.0, 50.0, 2000.0], self.WINDOWS)
        scores = [c.flatness_score for c in sel.candidates]
        assert scores[0] >= 1.0
        assert scores[1] < 1.0
        assert sel.boundary == 50.0

    def test_failure_carries_diagnostics(self):
        rng = np.random.default_rng(11)
        hist = comb_histogram(rng, side_level=60_000.0, central_level=1500.0,
                              background=25.0)
        with pytest.raises(PlateauSelectionError) as excinfo:
            select_noise_boundary(hist, [1.5, 2.0], self.WINDOWS)
        assert len(excinfo.value.diagnostics) == 2

    def test_requires_window_coverage(self):
        rng = np.random.default_rng(12)
        hist = comb_histogram(rng, side_level=100.0, central_level=10.0)
        with pytest.raises(ParameterError):
            select_noise_boundary(hist, [5.0, 10.0], [3000.0, 4000.0])


class TestHomVisibility:
    def test_perfect_interference(self):
        rng = np.random.default_rng(13)
        par = comb_histogram(rng, side_level=30_000.0, central_level=0.0)
        perp = comb_histogram(rng, side_level=30_000.0, central_level=15_000.0)
        assert hom_visibility(par).v_raw == 1.0
        assert hom_visibility(par, perp).v_raw == 1.0

    def test_fully_distinguishable(self):
        rng = np.random.default_rng(14)
        par = comb_histogram(rng, side_level=40_000.0, central_level=20_000.0)
        perp = comb_histogram(rng, side_level=40_000.0, central_level=20_000.0)
        two = hom_visibility(par, perp)
        assert abs(two.v_raw) < 3.0 * two.v_raw_error
        single = hom_visibility(par)
        assert abs(single.v_raw) < 3.0 * single.v_raw_error

    def test_methods_agree_when_n_perp_is_half(self):
        rng = np.random.default_rng(15)
        par = comb_histogram(rng, side_level=80_000.0, central_level=12_000.0)
        perp = comb_histogram(rng, side_level=80_000.0, central_level=40_000.0)
        two = hom_visibility(par, perp)
        single = hom_visibility(par)
        sigma = np.hypot(two.v_raw_error, single.v_raw_error)
        assert abs(two.v_raw - single.v_raw) < 3.0 * sigma

    def test_report_sanity_band(self):
        with pytest.raises(AnalysisError):
            VisibilityReport(v_raw=1.5, v_raw_error=0.0, method="single-config",
                             window=13100.0, n_parallel=0.0,
                             n_parallel_error=0.0)


class TestCorrection:
    def test_identity_case(self):
        assert correct_visibility(0.8, 0.0, 0.0, 0.5, 0.5) == pytest.approx(0.8)

    def test_splitter_asymmetry_factor(self):
        r = 0.525
        assert (r * r + (1 - r) ** 2) / (2 * r * (1 - r)) == pytest.approx(1.00501,
                                                                           abs=1e-5)

    def test_reference_factor(self):
        factor = correction_factor(0.015, 0.023, 0.525, 0.475)
        assert factor == pytest.approx(1.0834, rel=1e-4)

    def test_reduces_to_g2_correction(self):
        assert correct_visibility(0.5, 0.0, 0.023, 0.5, 0.5) == pytest.approx(
            0.5 * 1.046
        )

    @given(
        st.floats(0.0, 0.9),
        st.floats(0.0, 0.2),
        st.floats(0.0, 0.3),
        st.floats(0.301, 0.699),
    )
    def test_correction_never_decreases(self, v_raw, epsilon, g2, r):
        corrected = correct_visibility(v_raw, epsilon, g2, r, 1.0 - r)
        assert corrected >= v_raw - 1e-12

    def test_rejects_out_of_range(self):
        with pytest.raises(ParameterError):
            correct_visibility(0.5, 1.0, 0.0, 0.5, 0.5)
        with pytest.raises(ParameterError):
            correct_visibility(0.5, 0.0, 0.0, 0.6, 0.5)

    def test_with_correction_records_inputs(self):
        rng = np.random.default_rng(16)
        par = comb_histogram(rng, side_level=50_000.0, central_level=10_000.0)
        report = hom_visibility(par).with_correction(0.015, 0.023, 0.525, 0.475)
        assert report.v_corrected == pytest.approx(
            correct_visibility(report.v_raw, 0.015, 0.023, 0.525, 0.475)
        )
        assert report.epsilon == 0.015
        assert report.v_corrected >= report.v_raw
