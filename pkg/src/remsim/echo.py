"""Time-domain storage simulation: linear pulse propagation and Stark gating.

A weak pulse propagating through a structured absorption profile d(nu) is
filtered by H(nu) = exp(-d(nu)/2 + i phi(nu)), where phi is the causal
phase fixed by d through a discrete Hilbert transform (Kramers-Kronig).
For a periodic comb of spacing Delta the output carries echoes at integer
multiples of 1/Delta after the transmitted pulse; the energy in window m
over the input energy is the order-m efficiency.

Stark gating multiplies the emitted field by cos(Phi(t)), Phi being the
net phase wound on the two ion groups by the electric pulses up to time t.
Gates between echo windows leave each order's internal dynamics untouched,
which is exact in the weak-pulse regime simulated here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ions import AbsorptionSpectrum
from .stark import ElectricPulse, StarkConfig, accumulated_phase

_FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


class AliasingError(ValueError):
    """Requested echo order falls outside the simulated time window."""


class GateOverlapError(ValueError):
    """Electric pulse overlaps an echo emission window."""


@dataclass
class Pulse:
    """Gaussian input pulse sampled on a uniform time grid."""

    fwhm_ns: float = 150.0
    center_ns: float = 2000.0
    carrier_mhz: float = 0.0
    window_ns: float = 8192.0
    dt_ns: float = 1.0

    def __post_init__(self):
        if self.fwhm_ns <= 0 or self.dt_ns <= 0:
            raise ValueError("pulse timing parameters must be positive")
        self.times = np.arange(0.0, self.window_ns, self.dt_ns)
        sigma = self.fwhm_ns * _FWHM_TO_SIGMA
        env = np.exp(-0.5 * ((self.times - self.center_ns) / sigma) ** 2)
        if self.carrier_mhz:
            env = env * np.exp(2j * np.pi * self.carrier_mhz * 1e-3 * self.times)
        self.envelope = env.astype(complex)

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.envelope) ** 2))


@dataclass
class EchoTrace:
    times: np.ndarray
    intensity: np.ndarray
    amplitude: np.ndarray = field(repr=False, default=None)
    markers: list = field(default_factory=list)  # (order, (t_lo, t_hi), efficiency)
    input_energy: float = 1.0

    def efficiency(self, order: int) -> float:
        for m, _win, eff in self.markers:
            if m == order:
                return eff
        raise KeyError(f"no marker for echo order {order}")

    def window(self, order: int):
        for m, win, _eff in self.markers:
            if m == order:
                return win
        raise KeyError(f"no marker for echo order {order}")

    def to_csv(self, path):
        from pathlib import Path
        rows = "\n".join(f"{t:.3f},{i:.9g}" for t, i in zip(self.times, self.intensity))
        Path(path).write_text("time_ns,intensity\n" + rows + "\n")


def _causal_transfer(depth_samples: np.ndarray) -> np.ndarray:
    """H(nu) = exp(-d/2 + i phi) with phi from the discrete Hilbert transform.

    The attenuation -d/2 is made the real part of a one-sided (causal)
    response by zeroing its anti-causal components, the standard
    analytic-signal construction.
    """
    n = depth_samples.size
    a = np.fft.ifft(-0.5 * depth_samples)
    w = np.zeros(n)
    w[0] = 1.0
    if n % 2 == 0:
        w[n // 2] = 1.0
        w[1:n // 2] = 2.0
    else:
        w[1:(n + 1) // 2] = 2.0
    return np.exp(np.fft.fft(a * w))


def _oversample(pulse: Pulse, spectrum: AbsorptionSpectrum, pad_factor: int = 8):
    """FFT grid fine enough to resolve the comb teeth."""
    n = int(pad_factor * pulse.times.size)
    t = np.arange(n) * pulse.dt_ns
    env = np.zeros(n, dtype=complex)
    env[: pulse.times.size] = pulse.envelope
    freqs = np.fft.fftfreq(n, pulse.dt_ns * 1e-9) / 1e6  # MHz
    d = np.interp(freqs, spectrum.detunings, spectrum.depth, left=0.0, right=0.0)
    return t, env, d


def comb_spacing_from_spectrum(spectrum: AbsorptionSpectrum) -> float:
    """Tooth period estimated from the autocorrelation peak of d(nu)."""
    d = spectrum.depth - spectrum.depth.mean()
    ac = np.correlate(d, d, mode="full")[d.size - 1:]
    db = spectrum.detunings[1] - spectrum.detunings[0]
    # first local maximum after the zero-lag peak
    i = 1
    while i + 1 < ac.size and ac[i + 1] < ac[i]:
        i += 1
    j = i + np.argmax(ac[i:i + int(round(5.0 / db))])
    return float(j * db)


def propagate(pulse: Pulse, spectrum: AbsorptionSpectrum, spacing: float = None,
              max_order: int = 3) -> EchoTrace:
    """Linear-response propagation through d(nu); echoes at m/spacing.

    Efficiency of order m is the output energy inside the window
    [t0 + m/spacing - T/2, t0 + m/spacing + T/2) over the input energy,
    T = 1/spacing being the echo period.
    """
    if spacing is None:
        spacing = comb_spacing_from_spectrum(spectrum)
    period_ns = 1e3 / spacing  # MHz -> ns
    if pulse.center_ns + max_order * period_ns + period_ns / 2 > pulse.window_ns:
        raise AliasingError(
            f"time window {pulse.window_ns} ns too short for echo order {max_order}")

    t, env, d = _oversample(pulse, spectrum)
    H = _causal_transfer(d)
    out = np.fft.ifft(H * np.fft.fft(env))
    nt = pulse.times.size
    e_in = pulse.energy

    markers = []
    for m in range(max_order + 1):
        t_lo = pulse.center_ns + m * period_ns - period_ns / 2
        t_hi = t_lo + period_ns
        sel = (t >= t_lo) & (t < t_hi)
        eff = float(np.sum(np.abs(out[sel]) ** 2) / e_in)
        markers.append((m, (t_lo, t_hi), eff))
    return EchoTrace(times=t[:nt], intensity=np.abs(out[:nt]) ** 2,
                     amplitude=out[:nt], markers=markers, input_energy=e_in)


def smafc_run(pulse: Pulse, spectrum: AbsorptionSpectrum, stark_config: StarkConfig,
              pulses, target_order: int = 2, spacing: float = None,
              max_order: int = None, series_tol: float = 1e-12) -> EchoTrace:
    """AFC storage with Stark gating of the two ion groups, exact in the
    linear regime.

    The medium operator splits into the two Stark groups, each carrying the
    instantaneous gate phase at its absorption and emission times:

        y = exp(-(L+ + L-)) x
        L_s x = e^{i s Phi(t)} F^-1[ (L(nu)/2) F[e^{-i s Phi(t)} x] ]

    with L(nu) the causal complex depth of the comb and Phi(t) the net
    group-1 Stark phase (group 2 carries -Phi).  The exponential is summed
    as a scattering series, which captures the essential gating physics:
    echoes emitted at net phase phi are suppressed by cos^2(phi), and
    between an opposite-polarity gate pair the re-absorption of suppressed
    intermediate echoes is switched off, so the target order returns at the
    full comb-model efficiency.  Gates must fall between echo emission
    windows.
    """
    if max_order is None:
        max_order = target_order + 1
    if spacing is None:
        spacing = comb_spacing_from_spectrum(spectrum)
    period_ns = 1e3 / spacing
    if pulse.center_ns + max_order * period_ns + period_ns / 2 > pulse.window_ns:
        raise AliasingError(
            f"time window {pulse.window_ns} ns too short for echo order {max_order}")
    guard = pulse.fwhm_ns  # echo emission core half-width
    for p in pulses:
        for m in range(0, max_order + 1):
            t_m = pulse.center_ns + m * period_ns
            if p.start_ns < t_m + guard and p.end_ns > t_m - guard:
                raise GateOverlapError(
                    f"gate [{p.start_ns}, {p.end_ns}] ns overlaps echo order {m}")

    t, env, d = _oversample(pulse, spectrum)
    n = t.size
    # causal complex depth L(nu) = d/2 - i*phi of the whole comb
    a = np.fft.ifft(0.5 * d)
    w = np.zeros(n)
    w[0] = 1.0
    if n % 2 == 0:
        w[n // 2] = 1.0
        w[1:n // 2] = 2.0
    else:
        w[1:(n + 1) // 2] = 2.0
    L_nu = np.fft.fft(a * w)

    knots = _phase_knots(pulses, t)
    phi_k = np.array([accumulated_phase(stark_config, pulses, tk) for tk in knots])
    phase = np.interp(t, knots, phi_k)
    up = np.exp(1j * phase)  # group-1 gate phase factor

    def gated_depth_op(x):
        out = up * np.fft.ifft(0.5 * L_nu * np.fft.fft(x / up))
        out += np.fft.ifft(0.5 * L_nu * np.fft.fft(x * up)) / up
        return out

    y = env.copy()
    term = env.copy()
    for k in range(1, 200):
        term = -gated_depth_op(term) / k
        y += term
        if np.linalg.norm(term) <= series_tol * np.linalg.norm(y):
            break

    e_in = pulse.energy
    markers = []
    for m in range(max_order + 1):
        t_lo = pulse.center_ns + m * period_ns - period_ns / 2
        t_hi = t_lo + period_ns
        sel = (t >= t_lo) & (t < t_hi)
        eff = float(np.sum(np.abs(y[sel]) ** 2) / e_in)
        markers.append((m, (t_lo, t_hi), eff))
    nt = pulse.times.size
    return EchoTrace(times=t[:nt], intensity=np.abs(y[:nt]) ** 2,
                     amplitude=y[:nt], markers=markers, input_energy=e_in)


def _phase_knots(pulses, t) -> np.ndarray:
    """Times where the accumulated phase changes slope (pulse edges)."""
    knots = {0.0, float(t[-1])}
    for p in pulses:
        knots.add(float(p.start_ns))
        knots.add(float(p.end_ns))
    return np.array(sorted(knots))


def smafc_analytic_efficiency(d: float, F: float, m: int, net_phase_rad: float = 0.0,
                              shape: str = "gaussian", d0: float = 0.0) -> float:
    """First-order SMAFC echo efficiency: comb formula times cos^2(phase).

    With intermediate echo emission suppressed by the gates, the order-m
    echo is not depleted by re-absorption of earlier orders and comes out
    at the full comb-model efficiency, scaled by the residual two-group
    dephasing cos^2 of the net Stark phase at emission time.
    """
    from .afc import gaussian_efficiency, square_efficiency
    base = (gaussian_efficiency(d, F, m) if shape == "gaussian"
            else square_efficiency(d, F, m, d0))
    return base * float(np.cos(net_phase_rad) ** 2)


@dataclass
class PolarizationChannel:
    """Polarization-dependent storage: per-axis efficiencies and phase."""

    eta_h: float
    eta_v: float
    phase_rad: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.eta_h <= 1.0 and 0.0 <= self.eta_v <= 1.0):
            raise ValueError("efficiencies must be in [0, 1]")

    @property
    def jones(self) -> np.ndarray:
        return np.diag([np.sqrt(self.eta_h),
                        np.exp(1j * self.phase_rad) * np.sqrt(self.eta_v)])


def apply_channel(jones_in: np.ndarray, channel: PolarizationChannel):
    """Attenuate a normalized Jones vector; returns (output, success prob)."""
    vec = np.asarray(jones_in, dtype=complex)
    if vec.shape != (2,) or not np.isclose(np.vdot(vec, vec).real, 1.0, atol=1e-9):
        raise ValueError("input must be a normalized 2-component Jones vector")
    out = channel.jones @ vec
    return out, float(np.vdot(out, out).real)


def renormalized_fidelity(jones_in: np.ndarray, channel: PolarizationChannel) -> float:
    """Fidelity of the renormalized output state to the input state."""
    out, p = apply_channel(jones_in, channel)
    if p == 0.0:
        return 0.0
    return float(np.abs(np.vdot(np.asarray(jones_in, dtype=complex), out)) ** 2 / p)


def counting_histogram(trace: EchoTrace, mu: float, trials: int,
                       noise_rate: float = 0.0, seed: int = 0,
                       input_energy: float = None) -> dict:
    """Poisson photon-counting histogram of an echo trace.

    Signal counts per bin follow the trace's energy fraction of the input,
    scaled by mu * trials; a flat background of ``noise_rate`` counts per
    bin is added.  Deterministic for a fixed seed.
    """
    if mu <= 0:
        raise ValueError("mean photon number must be positive")
    if input_energy is None:
        input_energy = trace.input_energy
    rng = np.random.default_rng(seed)
    frac = trace.intensity / input_energy
    lam = mu * trials * frac + noise_rate
    counts = rng.poisson(lam) if trials > 0 else np.zeros_like(lam, dtype=int)

    windows = {}
    for m, (t_lo, t_hi), _eff in trace.markers:
        sel = (trace.times >= t_lo) & (trace.times < t_hi)
        sig = int(counts[sel].sum())
        windows[m] = sig
    peak = int(counts.max()) if counts.size else 0
    snr = peak / noise_rate if noise_rate > 0 else np.inf
    return {
        "bins_ns": trace.times,
        "counts": counts,
        "window_counts": windows,
        "snr": float(snr),
        "snr_poisson_err": float(snr / np.sqrt(peak)) if noise_rate > 0 and peak else 0.0,
    }
