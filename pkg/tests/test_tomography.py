import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import remsim as rs
from remsim.echo import PolarizationChannel
from remsim.tomography import (
    INPUT_STATES,
    MEASUREMENT_BASES,
    ProcessMatrix,
    born_probabilities,
    channel_chi,
)

DIATTEN = PolarizationChannel(0.070, 0.076)
# closed-form conditional fidelity of the (0.070, 0.076) diattenuation channel
DIATTEN_FID = (np.sqrt(0.070) + np.sqrt(0.076)) ** 2 / (2 * (0.070 + 0.076))


class TestSimulateCounts:
    def test_identity_channel_h_counts_all_transmitted(self):
        ident = PolarizationChannel(1.0, 1.0)
        counts = rs.simulate_counts(ident, mu=0.32, trials=10**5, seed=0)
        h_z = counts.counts[0, 0]  # input H, basis Z
        assert h_z[1] == 0 and h_z[0] > 0

    def test_diagonal_basis_asymmetry(self):
        # D input through the diattenuation channel keeps a D/A imbalance
        # of order (eta_v - eta_h) / (eta_v + eta_h)
        p = born_probabilities(DIATTEN)
        d_idx = list(INPUT_STATES).index("D")
        x_idx = list(MEASUREMENT_BASES).index("X")
        p_d, p_a = p[d_idx, x_idx]
        imbalance = (p_d - p_a) / (p_d + p_a)
        assert imbalance == pytest.approx(
            2 * np.sqrt(0.070 * 0.076) / (0.070 + 0.076), rel=1e-9)

    def test_seed_determinism(self):
        c1 = rs.simulate_counts(DIATTEN, 0.32, 10**5, noise_rate=1e-5, seed=5)
        c2 = rs.simulate_counts(DIATTEN, 0.32, 10**5, noise_rate=1e-5, seed=5)
        assert np.array_equal(c1.counts, c2.counts)

    def test_counts_json_roundtrip(self):
        c = rs.simulate_counts(DIATTEN, 0.32, 10**4, seed=1)
        back = rs.TomographyCounts.from_json(c.to_json())
        assert np.array_equal(back.counts, c.counts)
        assert back.trials == c.trials and back.mu == c.mu


class TestMleReconstruct:
    def test_identity_channel_high_fidelity(self):
        counts = rs.simulate_counts(PolarizationChannel(1.0, 1.0), 0.32, 10**5, seed=2)
        chi = rs.mle_reconstruct(counts)
        assert rs.process_fidelity(chi) >= 0.999

    def test_diattenuation_channel_fidelity(self):
        counts = rs.simulate_counts(DIATTEN, 0.32, 10**6, seed=3)
        chi = rs.mle_reconstruct(counts)
        assert rs.process_fidelity(chi) == pytest.approx(DIATTEN_FID, abs=5e-4)

    def test_reconstruction_always_physical(self):
        rng = np.random.default_rng(8)
        for trial in range(3):
            noisy = rs.simulate_counts(DIATTEN, 0.32, 2000,
                                       noise_rate=1e-4, seed=100 + trial)
            chi = rs.mle_reconstruct(noisy)
            chi.validate()  # hermitian, PSD, unit trace

    def test_noisy_counts_fidelity_band(self):
        noise = 0.32 * 0.073 / 1000.0  # background sized for SNR ~ 1e3
        counts = rs.simulate_counts(DIATTEN, 0.32, 10**5, noise_rate=noise, seed=4)
        chi = rs.mle_reconstruct(counts)
        assert 0.985 <= rs.process_fidelity(chi) <= 1.0

    def test_estimator_consistency_scaling(self):
        # RMS fidelity error shrinks as 1/sqrt(counts); the probe channel
        # carries a relative phase so its fidelity sits away from the
        # F = 1 boundary where the truncation bias spoils the power law
        ch = PolarizationChannel(0.070, 0.076, phase_rad=0.5)
        true_fid = rs.process_fidelity(channel_chi(ch))
        trials = [10000, 30000, 100000, 300000, 1000000]
        rms = []
        for n in trials:
            sq = [(rs.process_fidelity(rs.mle_reconstruct(
                rs.simulate_counts(ch, 0.32, n, seed=2000 + s))) - true_fid) ** 2
                  for s in range(8)]
            rms.append(np.sqrt(np.mean(sq)))
        slope = np.polyfit(np.log(trials), np.log(rms), 1)[0]
        assert -0.6 <= slope <= -0.4


class TestProcessFidelity:
    def test_self_fidelity_one(self):
        chi = channel_chi(DIATTEN)
        assert rs.process_fidelity(chi, chi) == pytest.approx(
            float(np.trace(chi.chi @ chi.chi).real))
        ident = ProcessMatrix(np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex))
        assert rs.process_fidelity(ident) == pytest.approx(1.0)

    def test_x_flip_vs_identity_zero(self):
        flip = ProcessMatrix(np.diag([0.0, 1.0, 0.0, 0.0]).astype(complex))
        assert rs.process_fidelity(flip) == 0.0

    def test_diattenuation_closed_form(self):
        chi = channel_chi(DIATTEN)
        assert rs.process_fidelity(chi) == pytest.approx(DIATTEN_FID, abs=1e-12)

    def test_unphysical_rejected(self):
        bad = ProcessMatrix(np.diag([1.5, -0.5, 0.0, 0.0]).astype(complex))
        with pytest.raises(ValueError):
            rs.process_fidelity(bad)


class TestMonteCarloError:
    def test_shrinks_with_counts(self):
        c_small = rs.simulate_counts(DIATTEN, 0.32, 2000, seed=10)
        c_large = rs.simulate_counts(DIATTEN, 0.32, 500000, seed=10)
        sd_small = rs.monte_carlo_error(c_small, resamples=100, seed=1)
        sd_large = rs.monte_carlo_error(c_large, resamples=100, seed=1)
        assert sd_large < sd_small

    def test_large_counts_small_sigma(self):
        c = rs.simulate_counts(DIATTEN, 0.32, 10**6, seed=11)
        assert rs.monte_carlo_error(c, resamples=100, seed=2) < 1e-3

    def test_seed_determinism(self):
        c = rs.simulate_counts(DIATTEN, 0.32, 10**4, seed=12)
        s1 = rs.monte_carlo_error(c, resamples=100, seed=3)
        s2 = rs.monte_carlo_error(c, resamples=100, seed=3)
        assert s1 == s2

    def test_paper_scale_statistics(self):
        # count levels sized to the experiment reproduce a ~0.6% error bar
        counts = rs.simulate_counts(DIATTEN, 0.32, 1500,
                                    noise_rate=0.32 * 0.073 / 1000, seed=13)
        sd = rs.monte_carlo_error(counts, resamples=150, seed=4)
        assert 0.002 <= sd <= 0.02

    def test_minimum_resamples(self):
        c = rs.simulate_counts(DIATTEN, 0.32, 1000, seed=14)
        with pytest.raises(ValueError):
            rs.monte_carlo_error(c, resamples=50)


class TestClassicalBound:
    def test_paper_operating_point(self):
        b = rs.classical_bound(0.32, 0.070)
        assert 0.755 <= b <= 0.767

    def test_single_photon_limit(self):
        assert rs.classical_bound(1e-8, 0.07) == pytest.approx(2 / 3, abs=1e-4)

    def test_monotone_in_eta(self):
        etas = np.linspace(0.01, 1.0, 25)
        bounds = [rs.classical_bound(0.32, e) for e in etas]
        assert all(a >= b - 1e-12 for a, b in zip(bounds, bounds[1:]))

    def test_monotone_in_mu(self):
        mus = np.linspace(0.05, 2.0, 25)
        bounds = [rs.classical_bound(m, 0.07) for m in mus]
        assert all(b >= a - 1e-12 for a, b in zip(bounds, bounds[1:]))

    def test_rate_saturation_uses_all_pulses(self):
        # click rate above the non-vacuum probability: every pulse answered
        import math
        b = rs.classical_bound(0.1, 1.0)
        ns = np.arange(1, 60)
        pn = np.exp(-0.1) * 0.1**ns / np.array([math.factorial(n) for n in ns])
        expected = float(np.sum(pn * (ns + 1) / (ns + 2)) / pn.sum())
        assert b == pytest.approx(expected, abs=1e-9)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            rs.classical_bound(0.0, 0.07)
        with pytest.raises(ValueError):
            rs.classical_bound(0.32, 0.0)


class TestSigmaMargin:
    def test_paper_values(self):
        assert rs.sigma_margin(0.994, 0.006, 0.762) == pytest.approx(38.7, abs=0.1)

    def test_zero_at_bound(self):
        assert rs.sigma_margin(0.762, 0.01, 0.762) == 0.0

    def test_sigma_doubling_halves(self):
        m1 = rs.sigma_margin(0.994, 0.006, 0.762)
        m2 = rs.sigma_margin(0.994, 0.012, 0.762)
        assert m2 == pytest.approx(m1 / 2)

    @settings(max_examples=30, deadline=None)
    @given(scale=st.floats(0.1, 10.0))
    def test_common_rescaling_invariance(self, scale):
        base = rs.sigma_margin(0.994, 0.006, 0.762)
        scaled = rs.sigma_margin(0.762 + scale * (0.994 - 0.762), scale * 0.006, 0.762)
        assert scaled == pytest.approx(base, rel=1e-12)
