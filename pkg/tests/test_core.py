"""Cascade rate model, population dynamics, and the purity oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from qdcascade.core import (
    CascadeConfig,
    EffectiveRates,
    TimeGrid,
    cascade_population_x,
    effective_rates,
    joint_amplitude,
    lorentzian_enhancement,
    purcell_factor_xx,
    reduced_purity,
    visibility_from_ratio,
)
from qdcascade.errors import AccuracyError, ConfigError, ParameterError

REF = dict(tau_xx_bare=263.0, tau_x_bare=484.0, f=11.3, kappa=25.0)


def make_rates(ratio, tau_x=1.0):
    return EffectiveRates.from_lifetimes(ratio * tau_x, tau_x)


class TestLorentzian:
    def test_on_resonance(self):
        assert lorentzian_enhancement(0.0, 25.0) == 1.0

    def test_half_width_point(self):
        assert lorentzian_enhancement(12.5, 25.0) == pytest.approx(0.5)

    def test_far_detuned_value(self):
        # direct evaluation of 1/(1 + (2*690/25)^2)
        expected = 1.0 / (1.0 + (2.0 * 690.0 / 25.0) ** 2)
        assert expected == pytest.approx(3.2808e-4, rel=1e-4)
        assert lorentzian_enhancement(690.0, 25.0) == pytest.approx(expected)

    @given(st.floats(-2000, 2000), st.floats(1.0, 500.0))
    def test_even_and_bounded(self, detuning, kappa):
        value = lorentzian_enhancement(detuning, kappa)
        assert 0.0 < value <= 1.0
        assert value == pytest.approx(lorentzian_enhancement(-detuning, kappa))

    def test_rejects_bad_kappa(self):
        with pytest.raises(ParameterError):
            lorentzian_enhancement(10.0, 0.0)


class TestEffectiveRates:
    def test_xx_on_resonance(self):
        cfg = CascadeConfig.with_cavity_at(**REF, detuning_ghz=0.0, anchor="xx")
        rates = effective_rates(cfg)
        # one enhanced channel + one free channel: tau = 2*263/(1 + f)
        assert rates.tau_xx == pytest.approx(2.0 * 263.0 / (1.0 + 11.3), rel=1e-3)
        assert rates.tau_x == pytest.approx(484.0, rel=5e-3)
        assert rates.ratio == pytest.approx(0.0886, abs=5e-4)

    def test_x_on_resonance(self):
        cfg = CascadeConfig.with_cavity_at(**REF, detuning_ghz=0.0, anchor="x")
        rates = effective_rates(cfg)
        assert rates.tau_x == pytest.approx(484.0 / 11.3, rel=1e-3)
        assert rates.tau_xx == pytest.approx(263.0, rel=5e-3)
        assert rates.ratio == pytest.approx(6.13, abs=0.01)

    def test_far_detuned_recovers_bare(self):
        # residual enhancement at 690 GHz is (f-1)*L = 0.34% on the rate,
        # below the measurement repeatability of the bare values
        cfg = CascadeConfig.from_lifetimes(**REF, detuning_xx=690.0,
                                           detuning_x=690.0)
        rates = effective_rates(cfg)
        assert rates.tau_xx == pytest.approx(263.0, rel=5e-3)
        assert rates.tau_x == pytest.approx(484.0, rel=5e-3)

    @pytest.mark.parametrize("detuning", [3.0, 40.0, 200.0])
    def test_even_in_detuning(self, detuning):
        def rates_at(d_xx, d_x):
            return effective_rates(
                CascadeConfig.from_lifetimes(**REF, detuning_xx=d_xx,
                                             detuning_x=d_x)
            )

        plus = rates_at(detuning, detuning - 690.0)
        minus = rates_at(-detuning, -(detuning - 690.0))
        assert plus.gamma_xx == pytest.approx(minus.gamma_xx)
        assert plus.gamma_x == pytest.approx(minus.gamma_x)

    def test_monotone_approach_to_bare(self):
        taus = []
        for d in (0.0, 50.0, 200.0, 800.0, 3000.0):
            cfg = CascadeConfig.from_lifetimes(**REF, detuning_xx=d,
                                               detuning_x=d + 690.0)
            taus.append(effective_rates(cfg).tau_xx)
        assert all(a < b for a, b in zip(taus, taus[1:]))
        assert taus[-1] == pytest.approx(263.0, rel=1e-3)

    def test_second_mode_adds_enhancement(self):
        base = CascadeConfig.with_cavity_at(**REF, detuning_ghz=0.0, anchor="xx")
        with_mode = CascadeConfig.with_cavity_at(
            **REF, detuning_ghz=0.0, anchor="xx", second_mode_offset=50.0
        )
        assert effective_rates(with_mode).gamma_xx > effective_rates(base).gamma_xx
        # the second mode peaks when the cavity sits +offset from the line
        at_offset = CascadeConfig.with_cavity_at(
            **REF, detuning_ghz=50.0, anchor="xx", second_mode_offset=50.0
        )
        mirrored = CascadeConfig.with_cavity_at(
            **REF, detuning_ghz=-50.0, anchor="xx", second_mode_offset=50.0
        )
        assert (effective_rates(at_offset).gamma_xx
                > effective_rates(mirrored).gamma_xx)


class TestPurcellFactor:
    def test_reference_value(self):
        assert purcell_factor_xx(11.3) == pytest.approx(6.15)

    def test_no_enhancement(self):
        assert purcell_factor_xx(1.0) == 1.0

    def test_other_value(self):
        assert purcell_factor_xx(13.8) == pytest.approx(7.4)

    def test_rejects_f_below_one(self):
        with pytest.raises(ParameterError):
            purcell_factor_xx(0.9)


class TestVisibilityFromRatio:
    def test_symmetric_cascade(self):
        assert visibility_from_ratio(1.0) == 0.5

    def test_typical_uncavitated_ratio(self):
        assert visibility_from_ratio(0.65) == pytest.approx(0.606, abs=1e-3)

    def test_inverted_ratio(self):
        assert visibility_from_ratio(6.2) == pytest.approx(0.1389, abs=1e-4)

    def test_limits(self):
        assert visibility_from_ratio(0.0) == 1.0

    @given(st.floats(0.0, 1e6), st.floats(1e-9, 1e6))
    def test_strictly_decreasing(self, ratio, step):
        assert visibility_from_ratio(ratio + step) < visibility_from_ratio(ratio)

    def test_rejects_negative(self):
        with pytest.raises(ParameterError):
            visibility_from_ratio(-0.1)


class TestCascadePopulation:
    def test_starts_empty(self):
        assert cascade_population_x(0.0, make_rates(0.5)) == 0.0

    def test_degenerate_peak_value(self):
        rates = make_rates(1.0, tau_x=100.0)
        value = cascade_population_x(100.0, rates, p_xx_initial=0.8)
        assert value == pytest.approx(0.8 * np.exp(-1.0), rel=1e-9)

    def test_peak_position(self):
        rates = EffectiveRates.from_lifetimes(263.0, 484.0)
        g1, g2 = rates.gamma_xx, rates.gamma_x
        analytic = np.log(g1 / g2) / (g1 - g2)
        numeric = minimize_scalar(
            lambda t: -cascade_population_x(t, rates),
            bounds=(1.0, 3000.0), method="bounded",
        ).x
        assert analytic == pytest.approx(351.0, abs=1.0)
        assert numeric == pytest.approx(analytic, abs=0.5)

    def test_continuous_across_degenerate_switchover(self):
        # rate pairs straddling the switchover threshold give populations
        # identical to better than 1e-9 relative
        tau = 100.0
        just_out = EffectiveRates.from_rates(1.0 / tau, (1.0 + 1.00001e-6) / tau)
        just_in = EffectiveRates.from_rates(1.0 / tau, (1.0 + 0.99999e-6) / tau)
        t = np.linspace(10.0, 1000.0, 7)
        a = cascade_population_x(t, just_out)
        b = cascade_population_x(t, just_in)
        assert np.max(np.abs(a - b) / a) < 1e-9

    def test_rejects_negative_time(self):
        with pytest.raises(ParameterError):
            cascade_population_x(-1.0, make_rates(1.0))


class TestJointAmplitude:
    def test_zero_when_x_precedes_xx(self):
        assert joint_amplitude(5.0, 2.0, make_rates(0.5)) == 0.0

    def test_normalization_by_quadrature(self):
        rates = EffectiveRates.from_lifetimes(263.0, 484.0)
        grid = TimeGrid(15.0 * 484.0, 3000)
        t = grid.times()
        w = grid.trapezoid_weights()
        density = joint_amplitude(t[:, None], t[None, :], rates) ** 2
        # triangular domain: the t1 = t2 boundary carries half weight
        density[np.diag_indices_from(density)] *= 0.5
        total = float(w @ density @ w)
        assert total == pytest.approx(1.0, abs=1e-4)

    def test_marginal_matches_population(self):
        rates = EffectiveRates.from_lifetimes(200.0, 350.0)
        grid = TimeGrid(15.0 * 350.0, 4000)
        t = grid.times()
        w = grid.trapezoid_weights()
        density = joint_amplitude(t[:, None], t[None, :], rates) ** 2
        density[np.diag_indices_from(density)] *= 0.5
        marginal = w @ density  # integrate over t1 at each t2
        expected = cascade_population_x(t, rates) * rates.gamma_x
        assert np.max(np.abs(marginal - expected)) < 5e-3 * expected.max()


class TestReducedPurity:
    @pytest.mark.parametrize("ratio,tol", [(1.0, 0.002), (0.08, 0.003),
                                           (6.2, 0.003)])
    def test_matches_formula(self, ratio, tol):
        rates = make_rates(ratio)
        expected = visibility_from_ratio(ratio)
        assert reduced_purity("x", rates) == pytest.approx(expected, abs=tol)
        assert reduced_purity("xx", rates) == pytest.approx(expected, abs=tol)

    def test_both_photons_agree(self):
        for ratio in (0.05, 0.7, 13.0):
            rates = make_rates(ratio)
            p_x = reduced_purity("x", rates)
            p_xx = reduced_purity("xx", rates)
            assert abs(p_x - p_xx) < 2e-3

    def test_grid_convergence(self):
        # halving the spacing must shrink the change by at least 3x
        rates = make_rates(0.3)
        t_max = 15.0 * max(rates.tau_xx, rates.tau_x)
        values = [
            reduced_purity("x", rates, TimeGrid(t_max, n))
            for n in (401, 801, 1601)
        ]
        first = abs(values[1] - values[0])
        second = abs(values[2] - values[1])
        assert second < first / 3.0

    def test_rejects_short_grid(self):
        rates = make_rates(1.0)
        with pytest.raises(ParameterError):
            reduced_purity("x", rates, TimeGrid(5.0, 500))

    def test_rejects_coarse_grid(self):
        rates = make_rates(1.0)
        with pytest.raises(ParameterError):
            reduced_purity("x", rates, TimeGrid(15.0, 399))

    def test_accuracy_error_on_unresolved_marginal(self):
        # at ratio 0.01 the XX arrival density decays in 0.01 while the grid
        # step is ~0.03: the quadrature trace lands near half a step count
        # instead of 1 and the drift gate must fire
        rates = make_rates(0.01)
        with pytest.raises(AccuracyError):
            reduced_purity("xx", rates, TimeGrid(15.0, 450))

    def test_returns_in_unit_interval(self):
        value = reduced_purity("xx", make_rates(3.3))
        assert 0.0 < value <= 1.0


class TestConfigValidation:
    def test_rejects_double_resonance(self):
        with pytest.raises(ConfigError):
            CascadeConfig.from_lifetimes(**REF, detuning_xx=0.0, detuning_x=0.0)

    def test_rejects_sub_unity_f(self):
        with pytest.raises(ConfigError):
            CascadeConfig.from_lifetimes(263.0, 484.0, 0.5, 25.0, 0.0, -690.0)

    def test_rejects_bad_rates(self):
        with pytest.raises(ConfigError):
            CascadeConfig(gamma_xx_bare=-1.0, gamma_x_bare=1.0, f=2.0,
                          kappa=25.0, detuning_xx=0.0, detuning_x=-690.0)

    def test_rates_reciprocal_consistency(self):
        with pytest.raises(ParameterError):
            EffectiveRates(gamma_xx=1.0, gamma_x=1.0, tau_xx=2.0, tau_x=1.0,
                           ratio=2.0)

    def test_binding_energy_links_detunings(self):
        cfg = CascadeConfig.with_cavity_at(**REF, detuning_ghz=100.0, anchor="xx")
        assert cfg.detuning_xx - cfg.detuning_x == pytest.approx(690.0)
        cfg = CascadeConfig.with_cavity_at(**REF, detuning_ghz=-30.0, anchor="x")
        assert cfg.detuning_xx - cfg.detuning_x == pytest.approx(690.0)

    def test_grid_spacing(self):
        grid = TimeGrid(100.0, 401)
        assert grid.spacing == pytest.approx(0.25)
        with pytest.raises(ParameterError):
            TimeGrid(100.0, 1)
