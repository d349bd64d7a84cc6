import math

import numpy as np
import pytest

from atomphase.estimation import (DataError, DegenerateFitError, FitResult, NoDipError,
                                  NormalizedSpectrum, estimate_initial, fit_transmission,
                                  normalize_spectrum, predict_phase_curve, transmission_curve,
                                  transmission_jacobian)
from atomphase.interferometer import BACKGROUND_MS, MZIConfig, SpectrumRecord, simulate_sequence
from atomphase.lineshape import LineshapeParams, convolve_probe_linewidth, transmission_model

TRUTH = LineshapeParams(8.20, 35.1, 0.064)
GRID = np.linspace(5.1, 65.1, 61)
# per-point transmission noise that reproduces quoted-scale uncertainties
TUNED_SIGMA = 0.0069


def synthetic(params=TRUTH, sigma=TUNED_SIGMA, seed=0, grid=GRID, probe_fwhm=0.0):
    rng = np.random.default_rng(seed)
    t = transmission_curve(params.gamma, params.delta0, params.r_sc, grid, probe_fwhm)
    y = t + rng.normal(0.0, sigma, grid.size) if sigma else t
    return NormalizedSpectrum(grid, y, np.full(grid.size, sigma or 1e-4))


def truth_vec(p):
    return np.array([p.gamma, p.delta0, p.r_sc])


def fitted_vec(res: FitResult):
    return truth_vec(res.params)


class TestNormalize:
    cfg = MZIConfig(probe_rate_scale=1e6)

    def test_identical_rates(self):
        recs = [SpectrumRecord(35.0, 1000, 1000, 100.0, True),
                SpectrumRecord(35.0, 20000, 20000, 2000.0, False)]
        spec = normalize_spectrum(recs, MZIConfig(dark_rate_c=0, dark_rate_d=0))
        assert spec.transmission[0] == pytest.approx(1.0)
        assert spec.sigma[0] > 0

    def test_synthetic_resonance(self):
        recs = simulate_sequence(TRUTH, self.cfg, [35.1], cycles_per_point=200, seed=3)
        spec = normalize_spectrum(recs, self.cfg)
        assert abs(spec.transmission[0] - 0.93702) < 3 * spec.sigma[0]

    def test_blocked_reference(self):
        recs = simulate_sequence(TRUTH, self.cfg, [35.1], cycles_per_point=200, seed=4,
                                 reference_blocked=True)
        spec = normalize_spectrum(recs, self.cfg, reference_blocked=True)
        assert abs(spec.transmission[0] - 0.93702) < 3 * spec.sigma[0]

    def test_dark_only(self):
        cfg = MZIConfig(dark_rate_c=200, dark_rate_d=200)
        recs = [SpectrumRecord(35.0, 27, 27, 135.0, True),
                SpectrumRecord(35.0, 400, 400, BACKGROUND_MS, False)]
        with pytest.raises(DataError, match="no probe light"):
            normalize_spectrum(recs, cfg)

    def test_missing_background(self):
        with pytest.raises(DataError, match="background"):
            normalize_spectrum([SpectrumRecord(35.0, 10, 10, 135.0, True)], MZIConfig())

    def test_zero_background(self):
        recs = [SpectrumRecord(35.0, 10, 10, 135.0, True),
                SpectrumRecord(35.0, 0, 0, BACKGROUND_MS, False)]
        with pytest.raises(DataError, match="zero counts"):
            normalize_spectrum(recs, MZIConfig())


class TestInitial:
    def test_dense_exact_curve(self):
        grid = np.linspace(5.1, 65.1, 601)
        p = estimate_initial(synthetic(sigma=0, grid=grid))
        for got, want in zip(truth_vec(p), truth_vec(TRUTH)):
            assert got == pytest.approx(want, rel=0.10)

    def test_full_depth_boundary(self):
        d = 2.0 * (1 - 2.0 / 4)
        assert d == 1.0
        assert 2 * (1 - math.sqrt(1 - d)) == 2.0
        grid = np.linspace(-30, 30, 61)
        y = 1.0 - 36.0 / (4 * grid**2 + 36.0)
        p = estimate_initial(NormalizedSpectrum(grid, y, np.full(61, 1e-3)))
        assert p.r_sc == pytest.approx(2.0, abs=1e-3)

    def test_flat(self):
        spec = NormalizedSpectrum(GRID, np.ones(61), np.full(61, 0.01))
        with pytest.raises(NoDipError):
            estimate_initial(spec)

    def test_too_few(self):
        with pytest.raises(DataError):
            estimate_initial(NormalizedSpectrum(GRID[:4], np.ones(4), np.ones(4)))


class TestFit:
    def test_noiseless_recovery(self):
        res = fit_transmission(synthetic(sigma=0))
        assert res.converged
        np.testing.assert_allclose(fitted_vec(res), truth_vec(TRUTH), rtol=1e-8)

    def test_noisy_within_three_sigma(self):
        res = fit_transmission(synthetic(seed=1))
        assert res.converged
        assert np.all(np.abs(fitted_vec(res) - truth_vec(TRUTH)) < 3 * res.std_errors)

    def test_tuned_noise_error_scale(self):
        res = fit_transmission(synthetic(seed=2))
        quoted = np.array([0.47, 0.2, 0.004])
        ratio = res.std_errors / quoted
        assert np.all((ratio > 0.5) & (ratio < 2.0)), ratio

    def test_two_points(self):
        spec = NormalizedSpectrum(GRID[:2], np.ones(2), np.ones(2))
        with pytest.raises(DataError):
            fit_transmission(spec, init=TRUTH)

    def test_bad_sigma(self):
        spec = synthetic()
        bad = NormalizedSpectrum(spec.detuning, spec.transmission, np.zeros(61))
        with pytest.raises(DataError):
            fit_transmission(bad)

    def test_degenerate(self):
        # every point at one detuning: width and centre cannot be separated
        x = np.full(8, 35.1)
        spec = NormalizedSpectrum(x, np.full(8, 0.95), np.full(8, 0.01))
        with pytest.raises(DegenerateFitError):
            fit_transmission(spec, init=TRUTH)

    def test_covariance_properties(self):
        res = fit_transmission(synthetic(seed=3))
        cov = res.covariance
        assert np.allclose(cov, cov.T)
        assert np.all(np.linalg.eigvalsh(cov) >= 0)
        np.testing.assert_allclose(res.std_errors, np.sqrt(np.diag(cov)))

    def test_weight_rescaling(self):
        spec = synthetic(seed=4)
        a = fit_transmission(spec, init=TRUTH)
        b = fit_transmission(NormalizedSpectrum(spec.detuning, spec.transmission, 7.0 * spec.sigma),
                             init=TRUTH)
        np.testing.assert_allclose(fitted_vec(a), fitted_vec(b), rtol=1e-7)

    def test_stationary(self):
        res = fit_transmission(synthetic(seed=5))
        assert res.converged
        assert res.gradient_norm < 1e-6

    def test_iteration_budget(self):
        res = fit_transmission(synthetic(seed=6), init=LineshapeParams(20.0, 20.0, 0.5),
                               max_iter=1)
        assert not res.converged

    def test_convolved_model(self):
        fwhm = 0.75
        fine = np.arange(-40.0, 110.0, 0.05)
        conv = convolve_probe_linewidth(fine, transmission_model(TRUTH, fine), fwhm)
        y = np.interp(GRID, fine, conv)
        spec = NormalizedSpectrum(GRID, y, np.full(61, 1e-4))
        res = fit_transmission(spec, probe_fwhm=fwhm)
        assert res.converged
        np.testing.assert_allclose(fitted_vec(res), truth_vec(TRUTH), rtol=2e-3)
        bare = fit_transmission(spec)
        # without the probe line the fitted width absorbs it
        assert bare.params.gamma == pytest.approx(TRUTH.gamma + fwhm, rel=0.01)


def test_jacobian_against_finite_differences():
    rng = np.random.default_rng(12)
    for _ in range(20):
        g, d0, r = rng.uniform(2, 20), rng.uniform(-50, 50), rng.uniform(0.01, 1.9)
        w = rng.choice([0.0, 0.75])
        x = np.linspace(d0 - 3 * g, d0 + 3 * g, 31)
        jac = transmission_jacobian(g, d0, r, x, w)
        p = np.array([g, d0, r])
        for k in range(3):
            h = 1e-6 * max(abs(p[k]), 1.0)
            pp, pm = p.copy(), p.copy()
            pp[k] += h
            pm[k] -= h
            fd = (transmission_curve(*pp, x, w) - transmission_curve(*pm, x, w)) / (2 * h)
            scale = np.max(np.abs(jac[:, k]))
            assert np.max(np.abs(fd - jac[:, k])) <= 1e-6 * scale


class TestPredict:
    def _fit(self, params):
        return FitResult(params, np.zeros(3), np.zeros((3, 3)), 0.0, 61, True)

    def test_extremum(self):
        curve = predict_phase_curve(self._fit(TRUTH), GRID)
        assert curve.phi_star == pytest.approx(0.932, abs=5e-4)
        assert curve.delta_star == pytest.approx(35.1 + 4.1 * math.sqrt(1 - 0.032), rel=1e-12)

    def test_zero_r(self):
        curve = predict_phase_curve(self._fit(LineshapeParams(8.2, 35.1, 0.0)), GRID)
        assert np.all(curve.phase_deg == 0)
        assert curve.phi_star == 0.0

    def test_antisymmetric(self):
        grid = 35.1 + np.linspace(-20, 20, 41)
        ph = predict_phase_curve(self._fit(TRUTH), grid).phase_deg
        np.testing.assert_allclose(ph, -ph[::-1], atol=1e-12)

    def test_requires_convergence(self):
        res = FitResult(TRUTH, np.zeros(3), np.zeros((3, 3)), 0.0, 61, False)
        with pytest.raises(ValueError):
            predict_phase_curve(res, GRID)
