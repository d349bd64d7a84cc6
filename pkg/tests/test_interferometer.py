import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from atomphase.interferometer import (BACKGROUND_MS, InconsistentExtractionWarning, MZIConfig,
                                      PhaseDomainError, PowerPair, SpectrumRecord,
                                      atom_phase_deg, counts_from_powers, extract_phase,
                                      extract_transmission, lock_setpoints, output_powers,
                                      output_powers_with_atom, simulate_sequence)
from atomphase.lineshape import LineshapeParams, amplitude_ratio, phase_shift, transmission_model

IDEAL = MZIConfig(visibility=1.0)
FIT = LineshapeParams(8.20, 35.1, 0.064)


def test_config_validation():
    with pytest.raises(ValueError):
        MZIConfig(visibility=1.1)
    with pytest.raises(ValueError):
        MZIConfig(amp_atom_arm=-1.0)
    with pytest.raises(ValueError):
        MZIConfig(dark_rate_c=-1.0)
    assert MZIConfig().balanced
    assert not MZIConfig(amp_atom_arm=0.5).balanced


def test_power_and_record_invariants():
    with pytest.raises(ValueError):
        PowerPair(-1.0, 0.0)
    with pytest.raises(ValueError):
        SpectrumRecord(0.0, -1, 0, 10.0, True)
    with pytest.raises(ValueError):
        SpectrumRecord(0.0, 1, 0, 0.0, True)


class TestOutputPowers:
    def test_bright_port(self):
        p = output_powers(IDEAL, 0.0)
        assert (p.p_c, p.p_d) == (2.0, 0.0)

    def test_quadrature(self):
        p = output_powers(IDEAL, 90.0)
        assert p.p_c == pytest.approx(1.0, abs=1e-15)
        assert p.p_d == pytest.approx(1.0, abs=1e-15)

    def test_visibility(self):
        p = output_powers(MZIConfig(visibility=0.98), 180.0)
        assert p.p_c == pytest.approx(0.02, abs=1e-14)
        assert p.p_d == pytest.approx(1.98, abs=1e-14)

    @given(st.floats(-720, 720), st.floats(0, 3), st.floats(0, 3))
    def test_energy_bookkeeping(self, phi, a, b):
        cfg = MZIConfig(amp_atom_arm=a, amp_ref_arm=b, visibility=1.0)
        assert output_powers(cfg, phi).total == pytest.approx(a * a + b * b, rel=1e-12, abs=1e-12)

    def test_sensitivity_maximal_at_quadrature(self):
        phis = np.linspace(0, 180, 1801)
        h = 1e-4
        slope = [abs(output_powers(IDEAL, p + h).p_c - output_powers(IDEAL, p - h).p_c) / (2 * h)
                 for p in phis]
        assert phis[int(np.argmax(slope))] == pytest.approx(90.0, abs=0.1)


class TestWithAtom:
    def test_unit_ratio(self):
        assert output_powers_with_atom(IDEAL, 1.0) == output_powers(IDEAL, 90.0)

    def test_extinguished(self):
        p = output_powers_with_atom(IDEAL, 0.0)
        assert (p.p_c, p.p_d) == (0.5, 0.5)

    def test_resonant(self):
        ratio = amplitude_ratio(FIT, 35.1)
        t = 0.93702
        p = output_powers_with_atom(IDEAL, ratio)
        assert p.p_c == pytest.approx((1 + t) / 2, abs=1e-5)
        assert p.p_d == pytest.approx((1 + t) / 2, abs=1e-5)

    def test_requires_balance(self):
        with pytest.raises(ValueError):
            output_powers_with_atom(MZIConfig(amp_atom_arm=0.9), 1.0)

    def test_phase_sign(self):
        assert atom_phase_deg(amplitude_ratio(FIT, 40.0)) == pytest.approx(phase_shift(FIT, 40.0))


class TestLockSetpoints:
    def test_arithmetic(self):
        assert lock_setpoints(100, 0, 100, 0, 10, 10) == (60, 60)

    def test_no_background(self):
        assert lock_setpoints(80, 0, 60, 0, 0, 0) == (40, 30)

    def test_dead_interferometer(self):
        assert lock_setpoints(50, 50, 70, 70, 3, 4) == (3, 4)

    def test_rejects_inverted(self):
        with pytest.raises(ValueError):
            lock_setpoints(0, 1, 1, 0, 0, 0)


class TestExtraction:
    def test_identity(self):
        p = output_powers(IDEAL, 90.0)
        assert extract_transmission(p, p) == 1.0
        assert extract_phase(p, p, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_known_transmission(self):
        ratio = amplitude_ratio(FIT, 35.1)
        p = output_powers_with_atom(IDEAL, ratio)
        t = extract_transmission(p, output_powers(IDEAL, 90.0))
        assert t == pytest.approx(transmission_model(FIT, 35.1), rel=1e-14)
        assert t == pytest.approx(0.93702, abs=1e-5)

    def test_known_phase(self):
        det = 35.1 + 4.1
        ratio = amplitude_ratio(FIT, det)
        p = output_powers_with_atom(IDEAL, ratio)
        empty = output_powers(IDEAL, 90.0)
        t = extract_transmission(p, empty)
        assert extract_phase(p, empty, t) == pytest.approx(0.932, abs=5e-4)
        assert extract_phase(p, empty, t) == pytest.approx(phase_shift(FIT, det), rel=1e-12)

    def test_inconsistent_flagged(self):
        # outputs with the atom summing to a quarter of the empty-interferometer total
        with pytest.warns(InconsistentExtractionWarning):
            assert extract_transmission(PowerPair(0.125, 0.125), PowerPair(0.5, 0.5)) == -0.5

    def test_consistent_not_flagged(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            extract_transmission(PowerPair(0.9, 0.9), PowerPair(1.0, 1.0))

    def test_out_of_domain(self):
        with pytest.raises(PhaseDomainError) as info:
            extract_phase(PowerPair(2.04, 0.0), PowerPair(1.0, 1.0), 1.0)
        assert info.value.argument == pytest.approx(1.02)

    def test_noiseless_round_trip_grid(self):
        empty = output_powers(IDEAL, 90.0)
        for r in np.linspace(0.0, 1.9, 20):
            p = LineshapeParams(6.0, 0.0, float(r))
            for det in np.linspace(-30, 30, 25):
                ratio = amplitude_ratio(p, det)
                w = output_powers_with_atom(IDEAL, ratio)
                t = extract_transmission(w, empty)
                assert t == pytest.approx(transmission_model(p, det), rel=1e-12)
                assert extract_phase(w, empty, t) == pytest.approx(phase_shift(p, det),
                                                                   rel=1e-12, abs=1e-12)


class TestCounting:
    def test_dark_zero(self):
        cfg = MZIConfig(dark_rate_c=0, dark_rate_d=0)
        for s in range(20):
            assert counts_from_powers(PowerPair(0, 0), cfg, 135.0, seed=s) == (0, 0)

    def test_statistical_mean(self):
        cfg = MZIConfig(coupling_eff_c=1.0, coupling_eff_d=1.0, dark_rate_c=0, dark_rate_d=0,
                        probe_rate_scale=1e4)
        rng = np.random.Generator(np.random.Philox(key=5))
        draws = np.array([counts_from_powers(PowerPair(1.0, 1.0), cfg, 1000.0, rng)
                          for _ in range(1000)])
        # mean 1e4 per draw; standard error sqrt(1e4 / 1e3)
        assert abs(draws[:, 0].mean() - 1e4) < 3 * math.sqrt(10.0)

    def test_duration_scaling(self):
        cfg = MZIConfig()
        a = counts_from_powers(PowerPair(1, 1), cfg, 100.0, noiseless=True)
        b = counts_from_powers(PowerPair(1, 1), cfg, 200.0, noiseless=True)
        assert b[0] == pytest.approx(2 * a[0], abs=1)

    def test_deterministic(self):
        cfg = MZIConfig()
        assert counts_from_powers(PowerPair(1, 1), cfg, 135.0, seed=9) == \
            counts_from_powers(PowerPair(1, 1), cfg, 135.0, seed=9)


class TestSequence:
    def test_all_survive(self):
        recs = simulate_sequence(FIT, MZIConfig(), [30.0, 35.0], cycles_per_point=50, p_survive=1.0)
        assert len(recs) == 100 and all(r.atom_present for r in recs)
        assert all(130.0 <= r.duration <= 140.0 for r in recs)

    def test_none_survive(self):
        recs = simulate_sequence(FIT, MZIConfig(), [35.0], cycles_per_point=30, p_survive=0.0)
        assert len(recs) == 30
        assert all(not r.atom_present and r.duration == BACKGROUND_MS for r in recs)

    def test_record_bookkeeping(self):
        recs = simulate_sequence(FIT, MZIConfig(), np.arange(30, 40), cycles_per_point=40,
                                 p_survive=0.7, seed=2)
        n_bg = sum(not r.atom_present for r in recs)
        # every attempt leaves one record; each loss swaps a probe for a background
        assert len(recs) == 400
        assert 0 < n_bg < 400
        assert 400 - (len(recs) - n_bg) == n_bg

    def test_deterministic(self):
        a = simulate_sequence(FIT, MZIConfig(), [35.0, 36.0], cycles_per_point=20, seed=7)
        b = simulate_sequence(FIT, MZIConfig(), [35.0, 36.0], cycles_per_point=20, seed=7)
        assert a == b

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            simulate_sequence(FIT, MZIConfig(), [])
        with pytest.raises(ValueError):
            simulate_sequence(FIT, MZIConfig(), [35.0], p_survive=1.5)

    def test_end_to_end_phase(self):
        cfg = MZIConfig(visibility=1.0, dark_rate_c=0, dark_rate_d=0, probe_rate_scale=1e7)
        det = FIT.delta0 + FIT.gamma / 2
        recs = simulate_sequence(FIT, cfg, [det], cycles_per_point=400, p_survive=1.0, seed=1)
        ref = simulate_sequence(LineshapeParams(8.2, 35.1, 0.0), cfg, [det],
                                cycles_per_point=400, p_survive=1.0, seed=2)
        empty_rate = sum(r.counts_c + r.counts_d for r in ref) / sum(r.duration for r in ref)
        phases = []
        for r in recs:
            eta = cfg.coupling_eff_c * cfg.probe_rate_scale * r.duration * 1e-3
            w = PowerPair(r.counts_c / eta, r.counts_d / eta)
            empty = PowerPair(empty_rate / 2 * r.duration / eta, empty_rate / 2 * r.duration / eta)
            t = extract_transmission(w, empty)
            phases.append(extract_phase(w, empty, t))
        phases = np.array(phases)
        se = phases.std(ddof=1) / math.sqrt(phases.size)
        assert abs(phases.mean() - 0.932) < max(3 * se, 1e-3)
