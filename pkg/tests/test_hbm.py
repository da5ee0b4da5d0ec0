import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from resonance_lab.hbm import (AliasingError, HarmonicGrid, HarmonicVector, aft_nonlinear_terms,
                               alias_bound, build_dynamic_stiffness, build_grad_operator,
                               coefficient_index, dynamic_stiffness_domega,
                               harmonic_amplitude_phase, hbm_residual_forced, peak_amplitude,
                               period_shift, project_samples, resolve_n_time,
                               synthesize_samples, synthesize_time_series, synthesize_velocity,
                               time_shift, wrap_difference, wrap_phase)
from resonance_lab.model import build_duffing, build_two_dof

grids = st.builds(HarmonicGrid, n_harmonics=st.integers(3, 10), nu=st.integers(1, 3),
                  omega=st.floats(0.2, 5.0))


def random_vector(grid, n, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return HarmonicVector(scale * rng.normal(size=grid.size * n), grid, n)


class TestGrid:
    def test_frequencies(self):
        g = HarmonicGrid(6, 3, 1.5)
        np.testing.assert_allclose(g.frequencies(), np.arange(1, 7) * 0.5)
        assert g.period == pytest.approx(2 * math.pi / 1.5)
        assert g.grid_period == pytest.approx(3 * g.period)

    @pytest.mark.parametrize("kw", [dict(n_harmonics=2, nu=3), dict(n_harmonics=4, nu=0),
                                    dict(n_harmonics=4, omega=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            HarmonicGrid(**kw)

    def test_index_layout(self):
        # basis-major: sine of harmonic j at block 2j-1, cosine at 2j
        assert coefficient_index(1, "s", 0, 2) == 2
        assert coefficient_index(1, "c", 1, 2) == 5
        assert coefficient_index(3, "s", 1, 2) == 11

    def test_vector_size_checked(self):
        with pytest.raises(ValueError):
            HarmonicVector(np.zeros(5), HarmonicGrid(3), 1)


class TestOperators:
    @given(grids)
    def test_grad_antisymmetric(self, grid):
        D = build_grad_operator(grid)
        np.testing.assert_allclose(D, -D.T, atol=0)
        assert np.all(D[0] == 0) and np.all(D[:, 0] == 0)

    @given(grids, st.integers(0, 2 ** 31))
    def test_grad_matches_derivative(self, grid, seed):
        X = random_vector(grid, 1, seed)
        t = np.linspace(0, grid.grid_period, 17)
        h = 1e-6
        fd = (synthesize_time_series(X, t + h) - synthesize_time_series(X, t - h)) / (2 * h)
        np.testing.assert_allclose(synthesize_velocity(X, t), fd, atol=1e-5 * grid.n_harmonics)

    @given(grids)
    def test_dynamic_stiffness_domega(self, grid):
        m = build_two_dof()
        h = 1e-6 * grid.omega
        fd = (build_dynamic_stiffness(m, grid.with_omega(grid.omega + h))
              - build_dynamic_stiffness(m, grid.with_omega(grid.omega - h))) / (2 * h)
        np.testing.assert_allclose(dynamic_stiffness_domega(m, grid), fd, atol=1e-6 * (1 + abs(fd).max()))

    @pytest.mark.parametrize("omega", [0.3, 0.9, 1.7])
    def test_linear_response_matches_closed_form(self, omega):
        m = build_duffing(k_nl=0.0)
        grid = HarmonicGrid(3, 1, omega)
        F = np.zeros(grid.size)
        F[1] = 0.2
        X = HarmonicVector(np.linalg.solve(build_dynamic_stiffness(m, grid), F), grid, 1)
        amp, phase, _ = harmonic_amplitude_phase(X, 0, 1)
        assert amp == pytest.approx(0.2 / math.hypot(1 - omega ** 2, 0.01 * omega), rel=1e-12)
        assert phase == pytest.approx(math.atan2(0.01 * omega, 1 - omega ** 2), abs=1e-12)


class TestTransforms:
    @given(grids, st.integers(0, 2 ** 31))
    def test_round_trip(self, grid, seed):
        X = random_vector(grid, 2, seed)
        samples = synthesize_samples(2, X.coefficients, grid.n_harmonics, 4 * grid.n_harmonics + 3)
        np.testing.assert_allclose(project_samples(samples, grid.n_harmonics), X.coefficients,
                                   atol=1e-12)

    @given(grids, st.integers(0, 2 ** 31), st.floats(-10, 10))
    def test_time_shift(self, grid, seed, delta):
        X = random_vector(grid, 1, seed)
        t = np.linspace(0, grid.grid_period, 11)
        np.testing.assert_allclose(synthesize_time_series(time_shift(X, delta), t),
                                   synthesize_time_series(X, t + delta), atol=1e-10)

    @given(grids, st.integers(0, 2 ** 31))
    def test_period_shift_cycles(self, grid, seed):
        X = random_vector(grid, 1, seed)
        np.testing.assert_allclose(period_shift(X, grid.nu).coefficients, X.coefficients,
                                   atol=1e-10)

    @given(grids, st.integers(0, 2 ** 31))
    def test_peak_invariant_under_half_period(self, grid, seed):
        X = random_vector(grid, 1, seed)
        Y = time_shift(X, grid.period / 2)
        Y = Y.with_coefficients(-Y.coefficients)
        np.testing.assert_allclose(peak_amplitude(Y), peak_amplitude(X), rtol=1e-12)


class TestAFT:
    @given(grids, st.integers(0, 2 ** 31), st.floats(0.05, 2.0))
    def test_jacobian_vs_finite_differences(self, grid, seed, scale):
        m = build_two_dof()
        X = random_vector(grid, 2, seed, scale)
        _, J = aft_nonlinear_terms(m, X)
        h = 1e-6
        fd = np.empty_like(J)
        for i in range(X.coefficients.size):
            e = np.zeros_like(X.coefficients)
            e[i] = h
            fd[:, i] = (aft_nonlinear_terms(m, X.with_coefficients(X.coefficients + e))[0]
                        - aft_nonlinear_terms(m, X.with_coefficients(X.coefficients - e))[0]) / (2 * h)
        assert np.linalg.norm(J - fd) / np.linalg.norm(J) < 1e-6

    def test_cubic_of_single_harmonic(self):
        # a^3 sin^3 = (3/4) a^3 sin - (1/4) a^3 sin 3
        grid = HarmonicGrid(5)
        X = HarmonicVector.zeros(grid, 1)
        X.coefficients[1] = 0.7
        F, _ = aft_nonlinear_terms(build_duffing(), X)
        expected = np.zeros(grid.size)
        expected[1], expected[5] = 0.75 * 0.7 ** 3, -0.25 * 0.7 ** 3
        np.testing.assert_allclose(F, expected, atol=1e-14)

    def test_alias_guard(self):
        m = build_duffing()
        assert alias_bound(m, 8) == 49
        assert resolve_n_time(m, 8) == 1024
        with pytest.raises(AliasingError):
            resolve_n_time(m, 8, n_time=32)

    def test_even_terms_make_dc(self):
        from resonance_lab.model import PolynomialTerm, SystemModel
        m = SystemModel(M=[[1.0]], C=[[0.0]], K=[[1.0]],
                        nonlinear_terms=(PolynomialTerm(0, 0, 2, 1.0),))
        grid = HarmonicGrid(4)
        X = HarmonicVector.zeros(grid, 1)
        X.coefficients[1] = 1.0
        F, _ = aft_nonlinear_terms(m, X)
        # sin^2 = 1/2 - cos(2t)/2 with Q0 = 1/sqrt(2)
        assert F[0] == pytest.approx(1 / math.sqrt(2))
        assert F[4] == pytest.approx(-0.5)


class TestResidual:
    def test_jacobian_param(self, duffing):
        grid = HarmonicGrid(5, 1, 1.2)
        X = random_vector(grid, 1, 3, 0.3)
        rep = hbm_residual_forced(duffing, X, 0.1)
        h = 1e-6
        rp = hbm_residual_forced(duffing, HarmonicVector(X.coefficients, grid.with_omega(1.2 + h), 1), 0.1)
        rm = hbm_residual_forced(duffing, HarmonicVector(X.coefficients, grid.with_omega(1.2 - h), 1), 0.1)
        np.testing.assert_allclose(rep.jacobian_param, (rp.residual - rm.residual) / (2 * h), atol=1e-8)

    def test_forcing_slot(self, duffing):
        grid = HarmonicGrid(6, 3, 2.0)
        rep = hbm_residual_forced(duffing, HarmonicVector.zeros(grid, 1), 0.5)
        expected = np.zeros(grid.size)
        expected[2 * 3 - 1] = -0.5
        np.testing.assert_array_equal(rep.residual, expected)


class TestPhase:
    @given(st.floats(0.01, 10), st.floats(0, 2 * math.pi, exclude_max=True))
    def test_amplitude_phase_round_trip(self, amp, phi):
        grid = HarmonicGrid(3)
        X = HarmonicVector.zeros(grid, 1)
        # A sin(t - phi) = A cos(phi) sin t - A sin(phi) cos t
        X.coefficients[1], X.coefficients[2] = amp * math.cos(phi), -amp * math.sin(phi)
        hp = harmonic_amplitude_phase(X, 0, 1)
        assert hp.amplitude == pytest.approx(amp)
        assert abs(wrap_difference(hp.phase - phi)) < 1e-9

    def test_degenerate(self):
        hp = harmonic_amplitude_phase(HarmonicVector.zeros(HarmonicGrid(2), 1), 0, 2)
        assert hp.degenerate and hp.phase == 0.0

    @given(arrays(float, 8, elements=st.floats(-100, 100)))
    def test_wrap_ranges(self, phi):
        w = wrap_phase(phi)
        assert np.all((w >= 0) & (w < 2 * math.pi))
        d = wrap_difference(phi)
        assert np.all((d > -math.pi - 1e-12) & (d <= math.pi + 1e-12))
        np.testing.assert_allclose(np.cos(d), np.cos(phi), atol=1e-9)

    def test_tiny_negative_wraps_to_zero(self):
        assert wrap_phase(-1e-18) == 0.0
