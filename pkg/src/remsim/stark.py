"""Linear Stark physics for the electrode-driven waveguide memory.

An electric field along the crystal b axis splits the ions into two equal
groups with opposite linear frequency shifts +/- k * E.  A rectangular
voltage pulse of duration tau therefore winds a phase 2*pi*k*E*tau of
opposite sign onto the two groups; the echo amplitude is multiplied by
cos(phase), giving cos^2 suppression in intensity until a compensating
pulse of reversed polarity unwinds it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .ions import AbsorptionSpectrum


@dataclass
class StarkConfig:
    """Stark coefficients (kHz per V/cm) and electrode geometry (um)."""

    coefficient_khz_per_v_cm: tuple = (5.69, -5.69)
    electrode_gap_um: float = 100.0
    electrode_width_um: float = 200.0
    waveguide_depth_um: float = 20.0
    geometry_factor: float = 1.0

    def __post_init__(self):
        if self.electrode_gap_um <= 0:
            raise ValueError("electrode gap must be positive")
        if not 0.0 < self.geometry_factor <= 1.5:
            raise ValueError("geometry_factor must be in (0, 1.5]")


@dataclass
class ElectricPulse:
    start_ns: float
    duration_ns: float
    voltage_v: float  # sign encodes polarity

    def __post_init__(self):
        if self.duration_ns <= 0:
            raise ValueError("pulse duration must be positive")

    @property
    def end_ns(self) -> float:
        return self.start_ns + self.duration_ns


def field_from_voltage(config: StarkConfig, voltage_v: float) -> float:
    """Field in V/cm between the electrodes for a drive voltage.

    Parallel-plate estimate scaled by the geometry factor; the gap is
    converted from um to cm.
    """
    gap_cm = config.electrode_gap_um * 1e-4
    return config.geometry_factor * voltage_v / gap_cm


def split_spectrum(spectrum: AbsorptionSpectrum, config: StarkConfig,
                   field_v_cm: float) -> AbsorptionSpectrum:
    """Spectrum under a bias field: half the ions shift by each coefficient.

    Total spectral area is conserved up to window clipping, which raises a
    warning when shifted features leave the grid.
    """
    k1, k2 = config.coefficient_khz_per_v_cm
    shifts_mhz = (k1 * field_v_cm * 1e-3, k2 * field_v_cm * 1e-3)
    nu = spectrum.detunings
    # constant extension beyond the window, matching the unpumped reservoir
    out = np.zeros_like(spectrum.depth)
    for shift in shifts_mhz:
        out += 0.5 * np.interp(nu, nu + shift, spectrum.depth)
    edge = max(spectrum.depth[0], spectrum.depth[-1])
    if any(s != 0.0 for s in shifts_mhz) and edge > 0.1 * spectrum.depth.max():
        warnings.warn("Stark shift moves structure at the grid boundary; "
                      "window-clipped features are extended flat")
    return AbsorptionSpectrum(nu, out, spectrum.polarization)


def fit_stark_coefficient(points, groups=None):
    """OLS slope +/- standard error of detuning (kHz) vs field (V/cm), per group.

    ``points`` is an (N, 2) array of (field, detuning).  Groups may be given
    explicitly; otherwise points are split by the sign of their detuning at
    the largest fields (positive-slope group first).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (N, 2): field_v_per_cm, detuning_khz")
    if groups is None:
        # classify by detuning sign, zero-field points join both fits
        pos = pts[pts[:, 1] >= 0.0]
        neg = pts[pts[:, 1] <= 0.0]
        subsets = [pos, neg]
    else:
        groups = np.asarray(groups)
        subsets = [pts[groups == gl] for gl in np.unique(groups)]

    results = []
    for sub in subsets:
        if sub.shape[0] < 3:
            raise ValueError("need at least 3 points per group")
        x, y = sub[:, 0], sub[:, 1]
        if np.ptp(x) == 0.0:
            raise ValueError("degenerate abscissa: all fields equal")
        n = x.size
        xm, ym = x.mean(), y.mean()
        sxx = np.sum((x - xm) ** 2)
        slope = np.sum((x - xm) * (y - ym)) / sxx
        intercept = ym - slope * xm
        resid = y - (slope * x + intercept)
        dof = max(n - 2, 1)
        stderr = np.sqrt(np.sum(resid**2) / dof / sxx)
        results.append((float(slope), float(stderr)))
    results.sort(key=lambda r: -r[0])  # positive-slope group first
    return results


def pulse_phase(config: StarkConfig, pulse: ElectricPulse):
    """Stark phase wound by one pulse, per ion group (opposite signs).

    phi = 2*pi * k * E * tau.  Returns (phi_group1, phi_group2) in rad.
    """
    field = field_from_voltage(config, pulse.voltage_v)
    tau_s = pulse.duration_ns * 1e-9
    k1, k2 = config.coefficient_khz_per_v_cm
    return (2.0 * np.pi * k1 * 1e3 * field * tau_s,
            2.0 * np.pi * k2 * 1e3 * field * tau_s)


def echo_suppression_factor(phi: float) -> float:
    """Echo intensity factor for two equal groups at phase +/- phi."""
    return float(np.cos(phi) ** 2)


def voltage_for_phase(config: StarkConfig, target_phi: float,
                      duration_ns: float) -> float:
    """Drive voltage for which one pulse winds ``target_phi`` on group 1."""
    k1 = config.coefficient_khz_per_v_cm[0]
    tau_s = duration_ns * 1e-9
    field = target_phi / (2.0 * np.pi * k1 * 1e3 * tau_s)
    return field * config.electrode_gap_um * 1e-4 / config.geometry_factor


def accumulated_phase(config: StarkConfig, pulses, t_ns: float) -> float:
    """Net group-1 Stark phase at time t from a list of pulses."""
    phi = 0.0
    k1 = config.coefficient_khz_per_v_cm[0]
    for p in pulses:
        overlap = min(t_ns, p.end_ns) - p.start_ns
        if overlap > 0:
            field = field_from_voltage(config, p.voltage_v)
            phi += 2.0 * np.pi * k1 * 1e3 * field * min(overlap, p.duration_ns) * 1e-9
    return phi
