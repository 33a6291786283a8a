import numpy as np
import pytest

import remsim as rs
from remsim.stark import (
    accumulated_phase,
    echo_suppression_factor,
    voltage_for_phase,
)

FIXTURE = "tests/data/stark_fig2b.csv"


class TestFieldFromVoltage:
    def test_parallel_plate_values(self):
        cfg = rs.StarkConfig()
        assert rs.field_from_voltage(cfg, 5.0) == pytest.approx(500.0)
        assert rs.field_from_voltage(cfg, 0.0) == 0.0
        assert rs.field_from_voltage(cfg, 1.75) == pytest.approx(175.0)

    def test_geometry_factor_scales(self):
        cfg = rs.StarkConfig(geometry_factor=0.8)
        assert rs.field_from_voltage(cfg, 5.0) == pytest.approx(400.0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            rs.StarkConfig(electrode_gap_um=0.0)
        with pytest.raises(ValueError):
            rs.StarkConfig(geometry_factor=2.0)


def narrow_antihole_spectrum():
    nu = np.arange(-20.0, 20.0, 0.005)
    depth = 0.05 + 0.8 * np.exp(-0.5 * (nu / 0.15) ** 2)
    return rs.AbsorptionSpectrum(nu, depth, "H")


class TestSplitSpectrum:
    def test_zero_field_unchanged(self):
        sp = narrow_antihole_spectrum()
        out = rs.split_spectrum(sp, rs.StarkConfig(), 0.0)
        assert np.allclose(out.depth, sp.depth)

    def test_antihole_splitting_value(self):
        # 175 V/cm at +/-5.69 kHz/(V cm) -> two antiholes ~1.99 MHz apart
        sp = narrow_antihole_spectrum()
        out = rs.split_spectrum(sp, rs.StarkConfig(), 175.0)
        pos = out.detunings[out.detunings > 0.3][np.argmax(out.depth[out.detunings > 0.3])]
        neg = out.detunings[out.detunings < -0.3][np.argmax(out.depth[out.detunings < -0.3])]
        assert pos - neg == pytest.approx(2 * 5.69 * 175.0 * 1e-3, abs=0.02)

    def test_splitting_linear_in_field(self):
        sp = narrow_antihole_spectrum()
        seps = []
        for field in (100.0, 200.0):
            out = rs.split_spectrum(sp, rs.StarkConfig(), field)
            pos = out.detunings[out.detunings > 0.2][np.argmax(out.depth[out.detunings > 0.2])]
            neg = out.detunings[out.detunings < -0.2][np.argmax(out.depth[out.detunings < -0.2])]
            seps.append(pos - neg)
        assert seps[1] == pytest.approx(2 * seps[0], rel=0.02)

    def test_area_conserved(self):
        sp = narrow_antihole_spectrum()
        out = rs.split_spectrum(sp, rs.StarkConfig(), 175.0)
        assert out.area() == pytest.approx(sp.area(), rel=1e-6)

    def test_clipping_warns(self):
        nu = np.arange(-1.0, 1.0, 0.01)
        sp = rs.AbsorptionSpectrum(nu, np.ones_like(nu), "H")
        with pytest.warns(UserWarning):
            rs.split_spectrum(sp, rs.StarkConfig(), 200.0)


class TestFitStarkCoefficient:
    def test_noiseless_roundtrip_exact(self):
        fields = np.linspace(0, 175, 8)
        pts = np.concatenate([
            np.column_stack([fields, 5.69 * fields]),
            np.column_stack([fields, -5.69 * fields]),
        ])
        (s1, e1), (s2, e2) = rs.fit_stark_coefficient(pts)
        assert s1 == pytest.approx(5.69, abs=1e-6)
        assert s2 == pytest.approx(-5.69, abs=1e-6)
        assert e1 < 1e-9 and e2 < 1e-9

    def test_residual_of_noiseless_fit(self):
        fields = np.linspace(0, 175, 8)
        pts = np.column_stack([fields, 5.69 * fields])
        (s1, _e1), = rs.fit_stark_coefficient(pts, groups=np.ones(8))
        resid = 5.69 * fields - s1 * fields
        assert np.abs(resid).max() < 1e-9

    def test_fixture_reproduces_quoted_fits(self):
        data = np.loadtxt(FIXTURE, delimiter=",", skiprows=1)
        fits = rs.fit_stark_coefficient(data[:, :2], data[:, 2])
        (s_pos, e_pos), (s_neg, e_neg) = fits
        assert s_pos == pytest.approx(5.66, abs=0.03)
        assert s_neg == pytest.approx(-5.71, abs=0.04)
        avg = (abs(s_pos) + abs(s_neg)) / 2
        assert avg == pytest.approx(5.69, abs=0.04)

    def test_degenerate_abscissa_rejected(self):
        pts = np.column_stack([np.full(5, 10.0), np.arange(5.0)])
        with pytest.raises(ValueError, match="degenerate"):
            rs.fit_stark_coefficient(pts, groups=np.ones(5))

    def test_too_few_points_rejected(self):
        with pytest.raises(ValueError):
            rs.fit_stark_coefficient(np.array([[0.0, 0.0], [1.0, 5.7]]),
                                     groups=np.ones(2))


class TestPulsePhase:
    def test_zero_voltage(self):
        phi1, phi2 = rs.pulse_phase(rs.StarkConfig(), rs.ElectricPulse(0, 85.0, 0.0))
        assert phi1 == 0.0 and phi2 == 0.0
        assert echo_suppression_factor(phi1) == 1.0

    def test_paper_gate_numbers(self):
        # 5 V / 85 ns at k = 5.69 kHz/(V cm): phi ~ 1.519 rad, cos^2 ~ 2.7e-3
        phi1, phi2 = rs.pulse_phase(rs.StarkConfig(), rs.ElectricPulse(0, 85.0, 5.0))
        assert phi1 == pytest.approx(1.519, abs=0.002)
        assert phi2 == pytest.approx(-1.519, abs=0.002)
        assert echo_suppression_factor(phi1) == pytest.approx(2.7e-3, abs=3e-4)
        assert 10 * np.log10(1 / echo_suppression_factor(phi1)) >= 25.0

    def test_half_pi_voltage(self):
        # solving 2 pi k E tau = pi/2 at 85 ns gives E ~ 517 V/cm
        v = voltage_for_phase(rs.StarkConfig(), np.pi / 2, 85.0)
        field = rs.field_from_voltage(rs.StarkConfig(), v)
        assert field == pytest.approx(517.0, abs=1.0)
        phi1, _ = rs.pulse_phase(rs.StarkConfig(), rs.ElectricPulse(0, 85.0, v))
        assert phi1 == pytest.approx(np.pi / 2, abs=1e-12)

    def test_phase_additivity_and_compensation(self):
        cfg = rs.StarkConfig()
        p1 = rs.ElectricPulse(100.0, 85.0, 5.0)
        p2 = rs.ElectricPulse(400.0, 85.0, 5.0)
        p2_neg = rs.ElectricPulse(400.0, 85.0, -5.0)
        phi_single, _ = rs.pulse_phase(cfg, p1)
        assert accumulated_phase(cfg, [p1, p2], 600.0) == pytest.approx(2 * phi_single)
        assert accumulated_phase(cfg, [p1, p2_neg], 600.0) == pytest.approx(0.0, abs=1e-15)

    def test_pulse_validation(self):
        with pytest.raises(ValueError):
            rs.ElectricPulse(0.0, 0.0, 5.0)
