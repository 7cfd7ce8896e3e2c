"""端到端驗收：無雜訊往返、實驗尺度統計、相位、同差切面、真空校正、oracle、收斂率."""

import time

import numpy as np
import pytest

from src.config import LAB_BIN_NS, LAB_SAMPLES, RunConfig
from src.oracle import cross_check, refined_resolution
from src.pipeline import run_roundtrip
from src.reconstruct import extract_phase, homodyne_profile, reconstruct
from src.simulate import autocorr_exact, run_experiment
from src.state import density_from_tmf, fidelity
from src.tmf import exponential_tmf, make_time_grid, rabi_tmf, tabulated_tmf
from src.utils import phase_distance

from .conftest import GAMMA, OMEGA_C

N_SEEDS = 10
CONVERGENCE_SEEDS = 20


def lab_tmf():
    """100 格 × 30 ns 的實數正值波形."""
    grid = make_time_grid(0.0, LAB_BIN_NS, 100)
    shape = exponential_tmf(1 / 500, grid, rise=30.0).amplitudes.real
    return tabulated_tmf(grid, shape)


class TestNoiselessRoundTrip:
    def test_rabi(self, rabi, rabi_rho, default_detunings):
        start = time.perf_counter()
        result = reconstruct(run_experiment(rabi, default_detunings))
        elapsed = time.perf_counter() - start

        assert np.max(np.abs(result.rho.elements - rabi_rho.elements)) <= 1e-10
        assert result.purity == pytest.approx(1.0, abs=1e-10)
        assert fidelity(result.rho, rabi) >= 1 - 1e-9
        assert elapsed < 1.0

    def test_pipeline(self, tmp_path):
        report, result = run_roundtrip(RunConfig(tmf_model="rabi"), tmp_path)
        assert report.passed, report.failures
        assert report.exact
        assert result is not None
        assert (tmp_path / "comparison.csv").is_file()


@pytest.mark.slow
class TestLabScaleStatistics:
    def test_purity_above_ninety_percent(self, default_detunings):
        tmf = lab_tmf()
        purities = [
            reconstruct(run_experiment(tmf, default_detunings, n_samples=LAB_SAMPLES, seed=seed)).purity
            for seed in range(N_SEEDS)
        ]
        assert sum(p >= 0.90 for p in purities) >= 9, purities

    def test_phase_flat_at_lab_noise(self, default_detunings):
        tmf = lab_tmf()
        result = reconstruct(run_experiment(tmf, default_detunings, n_samples=LAB_SAMPLES, seed=1))
        support = np.nonzero(np.abs(tmf.amplitudes) > 0)[0]
        lo, hi = np.percentile(support, [25, 75])
        central = (np.arange(tmf.grid.n_bins) >= lo) & (np.arange(tmf.grid.n_bins) <= hi) & result.phase_valid
        assert central.any()
        assert np.median(np.abs(result.phase[central])) <= 0.2


class TestPhase:
    def test_flat_for_real_positive_tmf(self, default_detunings):
        result = reconstruct(run_experiment(lab_tmf(), default_detunings))
        assert result.phase_valid.any()
        assert np.all(np.abs(result.phase[result.phase_valid]) <= 1e-8)

    def test_rabi_pi_jump(self, rabi_grid, default_detunings):
        tmf = rabi_tmf(OMEGA_C, GAMMA, GAMMA, rabi_grid)
        result = reconstruct(run_experiment(tmf, default_detunings))
        phase = result.phase[result.phase_valid]
        distance = np.minimum(phase_distance(phase, 0.0), phase_distance(phase, np.pi))
        assert np.all(distance <= 1e-8)

        flipped = np.nonzero(result.phase_valid & (phase_distance(result.phase, np.pi) <= 1e-8))[0]
        first_flip = int(flipped[flipped > result.m_row][0])
        expected = round((2 * np.pi / OMEGA_C) / rabi_grid.dt)
        assert abs(first_flip - expected) <= 1

    def test_phase_masked_is_nan(self, rabi_rho):
        phase, valid = extract_phase(rabi_rho)
        assert not valid[0]
        assert np.isnan(phase[0])


class TestHomodyneProfiles:
    def test_shapes(self, rabi_grid, rabi_rho):
        profile = homodyne_profile(autocorr_exact(rabi_rho, 0.0))
        tau = rabi_grid.centers
        envelope = np.exp(-GAMMA * tau) * np.sin(OMEGA_C * tau / 2)

        diagonal = envelope ** 2 / np.sum(envelope ** 2)
        assert np.max(np.abs(profile.amplitude_sq - diagonal)) <= 1e-12

        scale = profile.re_phi_scaled[profile.m_row] / envelope[profile.m_row]
        np.testing.assert_allclose(profile.re_phi_scaled, scale * envelope, atol=1e-14)

        first_zero = round((2 * np.pi / OMEGA_C) / rabi_grid.dt)
        row = profile.re_phi_scaled
        negative = np.nonzero(row[1:] < 0)[0] + 1
        assert abs(int(negative[0]) - first_zero) <= 1
        assert np.all(row[1:negative[0]] > 0)


class TestVacuumCalibration:
    def test_vacuum(self, rabi_rho):
        n = 100_000
        a = run_experiment(rabi_rho, [0.0], eta=0.0, n_samples=n, seed=6)[0]
        within = np.abs(a.values) < 5 * a.stderr
        assert within.mean() >= 0.99
        np.testing.assert_allclose(np.diag(a.values) + 0.5, 0.5, atol=0.01)


@pytest.mark.slow
class TestOracleEquivalence:
    def test_thousand_instances(self):
        summary = cross_check(n_trials=1000, seed=2024)
        assert summary.max_deviation <= refined_resolution(200)


class TestConvergence:
    def test_inverse_sqrt_rate(self, small_grid, random_tmf):
        rho = density_from_tmf(random_tmf(small_grid))
        exact = autocorr_exact(rho, 0.05).values

        def error(n, seed):
            estimate = run_experiment(rho, [0.05], n_samples=n, seed=seed)[0]
            return np.max(np.abs(estimate.values - exact))

        small = np.median([error(10_000, seed) for seed in range(CONVERGENCE_SEEDS)])
        large = np.median([error(40_000, seed) for seed in range(CONVERGENCE_SEEDS)])
        assert 0.33 <= large / small <= 0.75
