"""密度矩陣運算."""

import numpy as np
import pytest

from src.errors import DegenerateInputError, GridMismatchError, InvalidArgumentError
from src.state import (
    coarse_grain,
    density_from_elements,
    density_from_tmf,
    eigenvalues,
    fidelity,
    hermitize,
    maximally_mixed,
    mixture,
    project_psd,
    purity,
    trace_normalize,
)
from src.tmf import TemporalModeFunction, exponential_tmf, hermite_gauss_tmf, make_time_grid, tabulated_tmf


def one_hot(grid, k):
    samples = np.zeros(grid.n_bins)
    samples[k] = 1
    return tabulated_tmf(grid, samples)


def noisy_rank_one(tmf, rng, scale):
    n = tmf.grid.n_bins
    noise = scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    rho = density_from_elements(tmf.grid, density_from_tmf(tmf).elements + noise)
    return trace_normalize(hermitize(rho))


class TestDensityFromTmf:
    def test_one_hot(self, small_grid):
        rho = density_from_tmf(one_hot(small_grid, 3))
        expected = np.zeros((8, 8))
        expected[3, 3] = 1
        np.testing.assert_array_equal(rho.elements, expected)

    def test_equal_two_bin(self):
        grid = make_time_grid(0, 1, 2)
        rho = density_from_tmf(tabulated_tmf(grid, [1, 1]))
        np.testing.assert_allclose(rho.elements, 0.5, atol=1e-15)

    def test_index_convention(self, small_grid, random_tmf):
        tmf = random_tmf(small_grid)
        phi = tmf.amplitudes
        rho = density_from_tmf(tmf)
        assert rho.elements[2, 5] == pytest.approx(np.conj(phi[2]) * phi[5])

    def test_rabi_purity(self, rabi_rho):
        assert purity(rabi_rho) == pytest.approx(1.0, abs=1e-12)

    def test_random_purity(self, small_grid, random_tmf):
        for _ in range(20):
            assert purity(density_from_tmf(random_tmf(small_grid))) == pytest.approx(1.0, abs=1e-12)

    def test_unnormalized(self, small_grid):
        with pytest.raises(InvalidArgumentError):
            density_from_tmf(TemporalModeFunction(small_grid, np.ones(8)))


class TestPurity:
    def test_orthogonal_mixture(self, small_grid):
        rho = mixture([density_from_tmf(one_hot(small_grid, 1)), density_from_tmf(one_hot(small_grid, 4))], [0.5, 0.5])
        assert purity(rho) == pytest.approx(0.5)

    def test_maximally_mixed(self, small_grid):
        assert purity(maximally_mixed(small_grid)) == pytest.approx(1 / 8)

    def test_trace_check(self, small_grid):
        rho = density_from_elements(small_grid, 2 * maximally_mixed(small_grid).elements)
        with pytest.raises(InvalidArgumentError):
            purity(rho)

    def test_mixture_grid_mismatch(self, small_grid):
        other = make_time_grid(0, 20, 8)
        with pytest.raises(GridMismatchError):
            mixture([maximally_mixed(small_grid), maximally_mixed(other)], [0.5, 0.5])


class TestHermitize:
    def test_fixed_point(self, rabi_rho):
        np.testing.assert_array_equal(hermitize(rabi_rho).elements, rabi_rho.elements)

    def test_off_diagonal_pattern(self):
        grid = make_time_grid(0, 1, 2)
        a, b = 0.3 + 0.1j, 0.5 - 0.4j
        out = hermitize(density_from_elements(grid, [[1, a], [b, 0]])).elements
        assert out[0, 1] == pytest.approx((a + np.conj(b)) / 2)
        assert out[1, 0] == pytest.approx(np.conj((a + np.conj(b)) / 2))

    def test_random_matrix(self, small_grid, rng):
        m = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        assert hermitize(density_from_elements(small_grid, m)).is_hermitian(1e-15)


class TestTraceNormalize:
    def test_halves(self, small_grid):
        rho = density_from_elements(small_grid, 2 * maximally_mixed(small_grid).elements)
        assert trace_normalize(rho).trace == pytest.approx(1.0)

    def test_unit_unchanged(self, rabi_rho):
        np.testing.assert_allclose(trace_normalize(rabi_rho).elements, rabi_rho.elements, atol=1e-15)

    def test_small_trace_warns(self, small_grid):
        rho = density_from_elements(small_grid, 1e-9 * maximally_mixed(small_grid).elements)
        out = trace_normalize(rho)
        assert out.trace == pytest.approx(1.0, abs=1e-12)
        assert any(d.startswith("small-trace") for d in out.diagnostics)

    @pytest.mark.parametrize("scale", [0.0, -1.0])
    def test_non_positive(self, small_grid, scale):
        rho = density_from_elements(small_grid, scale * np.eye(8))
        with pytest.raises(DegenerateInputError):
            trace_normalize(rho)


class TestProjectPsd:
    def test_psd_fixed_point(self, rabi_rho):
        np.testing.assert_allclose(project_psd(rabi_rho).elements, rabi_rho.elements, atol=1e-12)

    def test_clip_two_by_two(self):
        grid = make_time_grid(0, 1, 2)
        out = project_psd(density_from_elements(grid, np.diag([1.1, -0.1])))
        np.testing.assert_allclose(out.elements, np.diag([1.0, 0.0]), atol=1e-15)

    def test_small_clip_not_flagged(self):
        grid = make_time_grid(0, 1, 2)
        out = project_psd(density_from_elements(grid, np.diag([1.02, -0.02])))
        assert not out.diagnostics

    def test_heavily_clipped_flag(self):
        grid = make_time_grid(0, 1, 2)
        out = project_psd(density_from_elements(grid, np.diag([1.5, -0.5])))
        assert any(d.startswith("heavily-clipped") for d in out.diagnostics)

    @pytest.mark.parametrize("scale", [-1.0, 0.0])
    def test_no_positive_eigenvalue(self, scale):
        grid = make_time_grid(0, 1, 2)
        out = project_psd(density_from_elements(grid, scale * np.eye(2)))
        np.testing.assert_array_equal(out.elements, 0.0)
        assert any(d.startswith("degenerate-projection") for d in out.diagnostics)

    def test_non_hermitian(self):
        grid = make_time_grid(0, 1, 2)
        with pytest.raises(InvalidArgumentError):
            project_psd(density_from_elements(grid, [[1, 0.5], [0, 0]]))

    def test_min_eigenvalue(self, rabi, rng):
        out = project_psd(noisy_rank_one(rabi, rng, 1e-3))
        assert eigenvalues(out)[0] >= -1e-12
        assert out.trace == pytest.approx(1.0, abs=1e-12)

    def test_purity_does_not_increase(self, rabi, rng):
        for _ in range(10):
            rho = noisy_rank_one(rabi, rng, 5e-4)
            projected = project_psd(rho)
            assert purity(projected) <= purity(rho) + 1e-12
            assert fidelity(projected, rabi) >= 0.9


class TestFidelity:
    def test_same_state(self, small_grid, random_tmf):
        tmf = random_tmf(small_grid)
        assert fidelity(density_from_tmf(tmf), tmf) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self, small_grid):
        assert fidelity(density_from_tmf(one_hot(small_grid, 2)), one_hot(small_grid, 5)) == pytest.approx(0.0)

    def test_maximally_mixed(self, small_grid, random_tmf):
        assert fidelity(maximally_mixed(small_grid), random_tmf(small_grid)) == pytest.approx(1 / 8)

    def test_range_for_mixtures(self, small_grid, random_tmf):
        states = [density_from_tmf(random_tmf(small_grid)) for _ in range(3)]
        rho = mixture(states, [0.2, 0.3, 0.5])
        for _ in range(10):
            f = fidelity(rho, random_tmf(small_grid))
            assert -1e-10 <= f <= 1 + 1e-10

    def test_grid_mismatch(self, small_grid, random_tmf):
        other = make_time_grid(0, 20, 8)
        with pytest.raises(InvalidArgumentError):
            fidelity(maximally_mixed(other), random_tmf(small_grid))


class TestCoarseGrain:
    def test_factor_one(self, rabi_rho):
        out = coarse_grain(rabi_rho, 1)
        np.testing.assert_array_equal(out.elements, rabi_rho.elements)
        assert out.grid.same_as(rabi_rho.grid)

    def test_coarse_grid(self, rabi_rho):
        out = coarse_grain(rabi_rho, 4)
        assert (out.n_bins, out.grid.dt) == (16, 40.0)
        assert out.grid.centers[0] == pytest.approx(15.0)
        assert out.trace == pytest.approx(1.0, abs=1e-12)

    def test_sign_flip_inside_bin_is_mixed(self):
        grid = make_time_grid(0, 1, 4)
        out = coarse_grain(density_from_tmf(tabulated_tmf(grid, [1, 1, 1, -1])), 2)
        np.testing.assert_allclose(out.elements, np.eye(2) / 2, atol=1e-15)
        assert purity(out) == pytest.approx(0.5)

    def test_flat_bins_stay_pure(self):
        grid = make_time_grid(0, 1, 4)
        out = coarse_grain(density_from_tmf(tabulated_tmf(grid, [1, 1, 1, 1])), 2)
        assert purity(out) == pytest.approx(1.0)

    def test_exponential_stays_pure(self):
        rho = density_from_tmf(exponential_tmf(0.01, make_time_grid(0, 10, 64)))
        for factor in (2, 4, 8):
            assert purity(coarse_grain(rho, factor)) == pytest.approx(1.0, abs=1e-12)

    def test_gaussian_purity_falls_with_resolution(self):
        rho = density_from_tmf(hermite_gauss_tmf(0, 240.0, 60.0, make_time_grid(0, 2, 240)))
        purities = [purity(coarse_grain(rho, factor)) for factor in (1, 3, 6, 12, 24)]
        assert purities[0] == pytest.approx(1.0, abs=1e-12)
        assert purities[1] >= 0.99
        assert purities[-1] < 0.99
        assert np.all(np.diff(purities) < 0)

    @pytest.mark.parametrize("factor", [0, 5, 64, 2.5])
    def test_invalid_factor(self, rabi_rho, factor):
        with pytest.raises(InvalidArgumentError):
            coarse_grain(rabi_rho, factor)
