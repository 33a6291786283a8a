"""Analytic atomic-frequency-comb models and finesse fitting.

Closed-form first-pass echo efficiencies for combs with Gaussian or square
teeth.  For Gaussian line shapes the order-m efficiency is

    eta = pi/(4 ln2) (d/F)^2 exp(-sqrt(pi/(4 ln2)) d/F)
          * exp(-pi^2/(2 ln2) m^2/F^2)

with absorption depth d, finesse F (tooth spacing / tooth FWHM) and echo
order m.  The square-comb counterpart replaces the tooth-shape factors:

    eta = (d/F)^2 sinc^2(m pi / F) exp(-d/F) exp(-d0)

The m-order sinc factor generalizes the usual first-echo expression and
reduces to it at m = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .ions import AbsorptionSpectrum

_LN2 = np.log(2.0)
_GAUSS_PREF = np.pi / (4.0 * _LN2)


@dataclass
class CombSpec:
    """Analytic AFC description."""

    spacing: float          # tooth period Delta, MHz
    finesse: float          # Delta / tooth FWHM
    peak_depth: float       # d
    background: float = 0.0  # d0
    bandwidth: float = 10.0  # MHz
    tooth_shape: str = "square"

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if self.finesse < 1:
            raise ValueError("finesse must be >= 1")
        if self.peak_depth < 0 or self.background < 0:
            raise ValueError("depths must be non-negative")
        if self.bandwidth < self.spacing:
            raise ValueError("bandwidth must cover at least one tooth period")
        if self.tooth_shape not in ("gaussian", "square"):
            raise ValueError("tooth_shape must be 'gaussian' or 'square'")


def _check_eff_args(d, F, m):
    if d < 0:
        raise ValueError("absorption depth must be non-negative")
    if F < 1:
        raise ValueError("finesse must be >= 1")
    if m < 1 or int(m) != m:
        raise ValueError("echo order must be a positive integer")


def gaussian_efficiency(d: float, F: float, m: int = 1) -> float:
    """Order-m echo efficiency of a Gaussian-tooth comb."""
    _check_eff_args(d, F, m)
    dt = d / F
    return float(_GAUSS_PREF * dt**2 * np.exp(-np.sqrt(_GAUSS_PREF) * dt)
                 * np.exp(-np.pi**2 / (2.0 * _LN2) * m**2 / F**2))


def square_efficiency(d: float, F: float, m: int = 1, d0: float = 0.0) -> float:
    """Order-m echo efficiency of a square-tooth comb over background d0."""
    _check_eff_args(d, F, m)
    if d0 < 0:
        raise ValueError("background depth must be non-negative")
    dt = d / F
    x = m * np.pi / F
    return float(dt**2 * np.sinc(x / np.pi) ** 2 * np.exp(-dt) * np.exp(-d0))


def render_comb(spec: CombSpec, grid_min: float = -180.0, grid_max: float = 180.0,
                grid_bin: float = 0.02, polarization: str = "H") -> AbsorptionSpectrum:
    """Sample the comb onto a detuning grid, centered on zero detuning.

    Teeth sit at integer multiples of the spacing; only periods fully inside
    the bandwidth carry a tooth.
    """
    if spec.bandwidth > grid_max - grid_min:
        raise ValueError("comb bandwidth exceeds grid window")
    n = int(round((grid_max - grid_min) / grid_bin)) + 1
    nu = grid_min + grid_bin * np.arange(n)
    centers = np.round(nu / spec.spacing) * spec.spacing
    inside = np.abs(centers) <= spec.bandwidth / 2.0 - spec.spacing / 2.0 + 1e-9
    x = nu - centers
    if spec.tooth_shape == "square":
        tooth = (np.abs(x) < spec.spacing / (2.0 * spec.finesse)).astype(float)
    else:
        fwhm = spec.spacing / spec.finesse
        tooth = np.exp(-4.0 * _LN2 * x**2 / fwhm**2)
    depth = spec.background + np.where(inside, (spec.peak_depth - spec.background) * tooth, 0.0)
    return AbsorptionSpectrum(nu, depth, polarization)


def fit_finesse(observations, d: float, coupling0: float = 1.0):
    """Fit comb finesse from (order, device efficiency) pairs.

    The model is a free coupling constant times the Gaussian-comb
    efficiency at fixed depth d.  Deterministic initialization (F0 = 2,
    coupling0 = 1).  Returns ((F, F_stderr), (coupling, coupling_stderr)).
    """
    obs = np.asarray(observations, dtype=float)
    if obs.ndim != 2 or obs.shape[1] != 2 or obs.shape[0] < 3:
        raise ValueError("need at least 3 (order, efficiency) observations")
    orders, effs = obs[:, 0], obs[:, 1]

    def model(m, F, coupling):
        dt = d / F
        return (coupling * _GAUSS_PREF * dt**2 * np.exp(-np.sqrt(_GAUSS_PREF) * dt)
                * np.exp(-np.pi**2 / (2.0 * _LN2) * m**2 / F**2))

    try:
        popt, pcov = curve_fit(model, orders, effs, p0=[2.0, coupling0],
                               maxfev=20000)
    except RuntimeError as err:
        resid = effs - model(orders, 2.0, coupling0)
        raise RuntimeError(f"finesse fit did not converge; residuals {resid}") from err
    perr = np.sqrt(np.diag(pcov))
    return (float(popt[0]), float(perr[0])), (float(popt[1]), float(perr[1]))
