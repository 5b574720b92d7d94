import json
import math
import warnings

import numpy as np
import pytest
from sklearn.base import clone

from fluxshift import fitting, spectroscopy as sp
from fluxshift.config import parse_config
from fluxshift.constants import GHZ, H, MILLI, PHI0
from fluxshift.exceptions import SingularJacobian, ValidationError
from fluxshift.fitting import (
    PowerDependenceRegressor,
    QubitSpectrumRegressor,
    ResonatorSpectrumRegressor,
    RidgeTrace,
)
from fluxshift.model import energy_detuning, qubit_transition_frequency, resonator_frequency
from fluxshift.params import FluxQubitParams, ResonatorParams

DELTA_HZ = 1.30e9
IP = 640e-9


def qubit_trace(qubit, n=61, span=3.0, noise_hz=0.0, seed=0):
    x = qubit.sweet_spot() + np.linspace(-span, span, n) * MILLI * PHI0
    f = qubit_transition_frequency(energy_detuning(x, qubit), qubit)
    if noise_hz:
        f = f + noise_hz * np.random.default_rng(seed).standard_normal(n)
    return RidgeTrace(x, f, np.full(n, max(noise_hz, 1e6)))


def power_model(p, ga, gap, eps=0.0, g=0.0, c=0.5):
    return np.hypot(eps - ga * p - c * g, gap) / H


class TestRidgeExtraction:
    def test_noise_free_ridge_within_tenth_step(self, device):
        x = device.qubit.sweet_spot() + np.linspace(-1.5, 1.5, 41) * MILLI * PHI0
        y = np.linspace(0.25e9, 6.5e9, 1251)
        m = sp.simulate_qubit_sweep(device, sp.SweepGrid(x, y, "phi_fq"), include_resonator_line=False)
        trace = fitting.extract_ridge(m)
        truth = qubit_transition_frequency(energy_detuning(trace.x, device.qubit), device.qubit)
        assert len(trace) == 41
        assert np.max(np.abs(trace.peak_frequency - truth)) < 0.1 * (y[1] - y[0])

    def test_flat_map_gives_empty_trace(self):
        grid = sp.SweepGrid(np.arange(7.0), np.linspace(1e9, 2e9, 50))
        trace = fitting.extract_ridge(sp.SpectrumMap(grid, np.full((7, 50), 0.4)))
        assert len(trace) == 0
        assert [ix for ix, _ in trace.dropped] == list(range(7))
        assert all(reason.startswith("NoPeakFound") for _, reason in trace.dropped)

    def test_window_must_intersect(self):
        grid = sp.SweepGrid([0.0], np.linspace(1e9, 2e9, 5))
        with pytest.raises(ValidationError):
            fitting.extract_ridge(sp.SpectrumMap(grid, np.zeros((1, 5))), window=(3e9, 4e9))

    def test_tie_breaks_to_lower_frequency(self):
        y = np.linspace(1e9, 2e9, 101)
        col = np.zeros(101)
        col[30:33] = [0.5, 1.0, 0.5]
        col[70:73] = [0.5, 1.0, 0.5]
        trace = fitting.extract_ridge(sp.SpectrumMap(sp.SweepGrid([0.0], y), col[None, :]))
        assert trace.peak_frequency[0] == pytest.approx(y[31], abs=1e6)

    def test_threads_do_not_change_trace(self, device):
        x = device.qubit.sweet_spot() + np.linspace(-2, 2, 33) * MILLI * PHI0
        grid = sp.SweepGrid(x, np.linspace(0.25e9, 6.5e9, 626), "phi_fq")
        m = sp.simulate_qubit_sweep(device, grid, sp.NoiseSpec(0.05, seed=4))
        a = fitting.extract_ridge(m, threshold=0.3)
        b = fitting.RidgeExtractor(threshold=0.3, threads=4).fit_transform(m)
        assert np.array_equal(a.peak_frequency, b.peak_frequency)
        assert a.dropped == b.dropped

    def test_noisy_ridge_rms_below_fifth_linewidth(self, device):
        x = device.qubit.sweet_spot() + np.linspace(-1.5, 1.5, 41) * MILLI * PHI0
        grid = sp.SweepGrid(x, np.linspace(0.25e9, 6.5e9, 1251), "phi_fq")
        worst = 0.0
        for seed in range(100):
            m = sp.simulate_qubit_sweep(device, grid, sp.NoiseSpec(0.05, seed=seed), include_resonator_line=False)
            trace = fitting.extract_ridge(m, threshold=0.3)
            truth = qubit_transition_frequency(energy_detuning(trace.x, device.qubit), device.qubit)
            worst = max(worst, float(np.sqrt(np.mean((trace.peak_frequency - truth) ** 2))))
        assert worst < device.qubit_linewidth / 5

    def test_trace_validation(self):
        with pytest.raises(ValidationError):
            RidgeTrace([0, 1], [1, 2], [1, 0])
        with pytest.raises(ValidationError):
            RidgeTrace([0, 1], [1, 2, 3], [1, 1])


class TestQubitFit:
    def test_zero_noise_round_trip(self, qubit):
        guess = FluxQubitParams(1.2e9 * H, 600e-9, -3)
        res = fitting.fit_qubit_spectrum(qubit_trace(qubit), guess)
        assert res.converged
        assert res.parameters["gap_delta"] / H == pytest.approx(DELTA_HZ, rel=1e-6)
        assert res.parameters["persistent_current"] == pytest.approx(IP, rel=1e-6)

    def test_monte_carlo_5mhz(self, qubit):
        for seed in range(100):
            res = fitting.fit_qubit_spectrum(qubit_trace(qubit, noise_hz=5e6, seed=seed), qubit)
            assert abs(res.parameters["gap_delta"] / H / DELTA_HZ - 1) < 0.01
            assert abs(res.parameters["persistent_current"] / IP - 1) < 0.01

    @pytest.mark.parametrize("factor", [0.5, 2.0])
    def test_basin_of_attraction(self, qubit, factor):
        guess = FluxQubitParams(factor * DELTA_HZ * H, factor * IP, -3)
        res = fitting.fit_qubit_spectrum(qubit_trace(qubit), guess)
        assert res.converged
        assert res.parameters["gap_delta"] / H == pytest.approx(DELTA_HZ, rel=1e-6)

    def test_flux_offset_recovered(self, qubit):
        trace = qubit_trace(qubit)
        shifted = RidgeTrace(trace.x + 0.2 * MILLI * PHI0, trace.peak_frequency, trace.peak_uncertainty)
        res = fitting.fit_qubit_spectrum(shifted, qubit)
        assert res.parameters["flux_offset"] == pytest.approx(0.2 * MILLI * PHI0, rel=1e-6)

    def test_one_sided_trace_rejected(self, qubit):
        trace = qubit_trace(qubit)
        with pytest.raises(ValidationError):
            fitting.fit_qubit_spectrum(trace.select(trace.x > qubit.sweet_spot()), qubit)

    def test_degenerate_trace_singular(self, qubit):
        # a single |flux| value cannot separate the gap from the current
        x = qubit.sweet_spot() + np.array([-1.0, 1.0, 1.0, -1.0]) * MILLI * PHI0
        est = QubitSpectrumRegressor(qubit, fit_offset=False)
        with pytest.raises(SingularJacobian):
            est.fit(x, np.full(4, 2e9))

    def test_regeneration_identity(self, qubit):
        trace = qubit_trace(qubit)
        est = QubitSpectrumRegressor(FluxQubitParams(1.0e9 * H, 500e-9, -3)).fit(trace.x, trace.peak_frequency)
        np.testing.assert_allclose(est.predict(trace.x), trace.peak_frequency, rtol=1e-9)

    def test_covariance_psd(self, qubit):
        res = fitting.fit_qubit_spectrum(qubit_trace(qubit, noise_hz=5e6), qubit)
        cov = res.covariance
        assert np.allclose(cov, cov.T)
        assert np.all(np.linalg.eigvalsh(cov / np.outer(np.sqrt(np.diag(cov)), np.sqrt(np.diag(cov)))) > -1e-12)

    def test_result_json(self, qubit):
        doc = json.loads(fitting.fit_qubit_spectrum(qubit_trace(qubit), qubit).to_json())
        assert set(doc) >= {"parameters", "covariance", "residual_norm", "converged", "iterations"}
        assert doc["units"]["gap_delta"] == "J"


class TestResonatorFit:
    def synthetic(self, resonator, n=41):
        x = np.linspace(-0.42, 0.42, n) * PHI0
        f = resonator_frequency(x, resonator) / (2 * math.pi)
        return RidgeTrace(x, f, np.full(n, 1e6))

    def test_zero_noise_round_trip(self, resonator):
        guess = ResonatorParams.from_omega(resonator.omega_lc * 1.05, resonator.inductance_l, 0.8e-6)
        res = fitting.fit_resonator_spectrum(self.synthetic(resonator), guess)
        assert res.parameters["omega_lc"] == pytest.approx(resonator.omega_lc, rel=1e-6)
        assert res.parameters["squid_critical_current"] == pytest.approx(resonator.squid_critical_current, rel=1e-6)

    def test_regeneration_identity(self, resonator):
        trace = self.synthetic(resonator)
        est = ResonatorSpectrumRegressor(resonator, offset_init=0.01 * PHI0, scale_init=0.98)
        est.fit(trace.x, trace.peak_frequency, trace.peak_uncertainty)
        np.testing.assert_allclose(est.predict(trace.x), trace.peak_frequency, rtol=1e-9)

    def test_degenerate_trace_singular(self, resonator):
        x = np.full(6, 0.2 * PHI0)
        f = np.full(6, resonator_frequency(0.2 * PHI0, resonator) / (2 * math.pi))
        with pytest.raises(SingularJacobian):
            ResonatorSpectrumRegressor(resonator).fit(x, f)

    def test_slope_from_simulated_map(self):
        cfg = parse_config("resonator_sweep")
        x, y = cfg.sweep_axes("resonator-sweep")
        m = sp.simulate_resonator_sweep(cfg.device, sp.SweepGrid(x, y, "phi_sq"), cfg.noise)
        trace = fitting.extract_ridge(m, cfg.fit["window"], cfg.fit["threshold"])
        period = (trace.x > -0.5 * PHI0) & (trace.x < 0.5 * PHI0)
        res = fitting.fit_resonator_spectrum(trace.select(period), cfg.device.resonator, operating_point=cfg.device.phi_sq)
        slope = res.extras["slope_at_operating_point"] * PHI0 / (2 * math.pi)
        assert slope == pytest.approx(2.1e9, rel=0.05)
        assert res.extras["slope_uncertainty"] > 0


class TestPowerFit:
    GA = 0.9e9 * H / 1e-3  # J per W

    def trace(self, qubit, g, pmax=1.2e-3, n=49, noise_hz=0.0, seed=0):
        p = np.linspace(0, pmax, n)
        f = power_model(p, self.GA, qubit.gap_delta, g=g)
        if noise_hz:
            f = f + noise_hz * np.random.default_rng(seed).standard_normal(n)
        return RidgeTrace(p, f, np.full(n, max(noise_hz, 1e6)))

    def test_zero_noise_round_trip(self, qubit, device):
        res = fitting.fit_power_dependence(self.trace(qubit, device.g), {"gap_delta": qubit.gap_delta, "epsilon": 0.0, "g": device.g})
        assert res.parameters["g_alpha"] == pytest.approx(self.GA, rel=1e-6)

    def test_tail_slope_matches_linearization(self, qubit, device):
        trace = self.trace(qubit, device.g, pmax=20e-3, n=81)
        r = (self.GA * trace.x + 0.5 * device.g) / qubit.gap_delta
        tail = r > 5
        slope = np.polyfit(trace.x[tail], trace.peak_frequency[tail], 1)[0]
        assert slope == pytest.approx(self.GA / H, rel=0.02)

    def test_low_power_excess_bounded_by_gap(self, qubit, device):
        trace = self.trace(qubit, device.g)
        est = PowerDependenceRegressor(qubit.gap_delta, 0.0, device.g).fit(trace.x, trace.peak_frequency)
        p = np.linspace(0, 0.8e-3, 200)
        asymptote = (est.g_alpha_ * p + 0.5 * device.g) / H
        excess = est.predict(p) - asymptote
        assert np.all(excess >= 0)
        assert np.all(excess <= qubit.gap_delta / H)

    def test_convention_sensitivity(self, qubit, device):
        trace = self.trace(qubit, device.g, noise_hz=5e6, seed=1)
        fixed = {"gap_delta": qubit.gap_delta, "epsilon": 0.0, "g": device.g}
        half = fitting.fit_power_dependence(trace, fixed, convention="N+1/2", fit_offset=True)
        whole = fitting.fit_power_dependence(trace, fixed, convention="N", fit_offset=True)
        diff = abs(half.parameters["g_alpha"] - whole.parameters["g_alpha"])
        assert diff <= whole.uncertainties["g_alpha"]
        assert whole.parameters["offset"] - half.parameters["offset"] == pytest.approx(0.5 * device.g, rel=1e-3)

    def test_window_compliance(self, qubit, device):
        trace = self.trace(qubit, device.g)
        fixed = {"gap_delta": qubit.gap_delta, "g": device.g}
        base = fitting.fit_power_dependence(trace, fixed)
        spoiled = RidgeTrace(
            trace.x,
            np.where(trace.x > 0.8e-3, 1e10, trace.peak_frequency),
            trace.peak_uncertainty,
        )
        other = fitting.fit_power_dependence(spoiled, fixed)
        assert other.parameters == base.parameters
        assert other.residual_norm == base.residual_norm
        assert other.extras["n_points_used"] == int(np.sum(trace.x <= 0.8e-3))

    def test_half_convention_needs_g(self, qubit):
        with pytest.raises(ValidationError):
            PowerDependenceRegressor(qubit.gap_delta).fit([0, 1e-4, 2e-4], [1.3e9, 1.4e9, 1.5e9])

    def test_regeneration_identity(self, qubit, device):
        trace = self.trace(qubit, device.g)
        est = PowerDependenceRegressor(qubit.gap_delta, 0.0, device.g).fit(trace.x, trace.peak_frequency)
        keep = trace.x <= 0.8e-3
        np.testing.assert_allclose(est.predict(trace.x[keep]), trace.peak_frequency[keep], rtol=1e-9)


class TestEstimatorApi:
    @pytest.mark.parametrize("cls", [QubitSpectrumRegressor, ResonatorSpectrumRegressor, PowerDependenceRegressor])
    def test_clone_and_params(self, cls):
        est = cls()
        params = est.get_params()
        twin = clone(est)
        assert twin.get_params() == params
        key = next(iter(params))
        assert est.set_params(**{key: params[key]}) is est

    def test_predict_before_fit(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            QubitSpectrumRegressor().predict([0.0])

    def test_score_is_r2(self, qubit):
        trace = qubit_trace(qubit)
        est = QubitSpectrumRegressor(qubit).fit(trace.x, trace.peak_frequency)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert est.score(trace.x, trace.peak_frequency) == pytest.approx(1.0, abs=1e-12)
