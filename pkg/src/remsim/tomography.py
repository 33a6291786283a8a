"""Polarization-qubit storage benchmarking.

Quantum process tomography of the single-qubit storage channel: simulated
photon-counting statistics over the six eigenstates of the Pauli operators,
maximum-likelihood reconstruction of the 4x4 chi matrix in the {I, X, Y, Z}
basis, process fidelity to ideal identity storage, Monte Carlo error bars
from Poisson resampling, and the measure-and-prepare classical bound for
weak coherent pulses.

Loss convention: the storage channel is trace-decreasing, so the estimator
works on the renormalized (post-selected) statistics and chi is normalized
to unit trace.  The fidelity of the conditional map to identity is then
simply chi[0, 0].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .echo import PolarizationChannel

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (_I, _X, _Y, _Z)

_H = np.array([1, 0], dtype=complex)
_V = np.array([0, 1], dtype=complex)
_D = (_H + _V) / np.sqrt(2)
_A = (_H - _V) / np.sqrt(2)
_R = (_H + 1j * _V) / np.sqrt(2)
_L = (_H - 1j * _V) / np.sqrt(2)
INPUT_STATES = {"H": _H, "V": _V, "D": _D, "A": _A, "R": _R, "L": _L}
MEASUREMENT_BASES = {"Z": (_H, _V), "X": (_D, _A), "Y": (_R, _L)}

# A[s, b, o, m, n] = <b_o| sigma_m rho_s sigma_n^dag |b_o>; precomputed once.
_A_TENSOR = None


def _a_tensor() -> np.ndarray:
    global _A_TENSOR
    if _A_TENSOR is None:
        A = np.zeros((6, 3, 2, 4, 4), dtype=complex)
        for si, ket in enumerate(INPUT_STATES.values()):
            rho = np.outer(ket, ket.conj())
            for bi, (k0, k1) in enumerate(MEASUREMENT_BASES.values()):
                for oi, ko in enumerate((k0, k1)):
                    for m in range(4):
                        for n in range(4):
                            A[si, bi, oi, m, n] = ko.conj() @ PAULIS[m] @ rho @ PAULIS[n].conj().T @ ko
        _A_TENSOR = A
    return _A_TENSOR


@dataclass
class ProcessMatrix:
    """Physical chi matrix: Hermitian, PSD, unit trace."""

    chi: np.ndarray

    def __post_init__(self):
        self.chi = np.asarray(self.chi, dtype=complex)
        if self.chi.shape != (4, 4):
            raise ValueError("chi must be 4x4")

    def validate(self, tol: float = 1e-9):
        if np.linalg.norm(self.chi - self.chi.conj().T) > tol:
            raise ValueError("chi is not Hermitian")
        if np.linalg.eigvalsh(self.chi).min() < -tol:
            raise ValueError("chi is not positive semidefinite")
        if abs(np.trace(self.chi).real - 1.0) > 1e-6:
            raise ValueError("chi is not trace-normalized")

    def apply(self, rho: np.ndarray) -> np.ndarray:
        out = np.zeros((2, 2), dtype=complex)
        for m in range(4):
            for n in range(4):
                out += self.chi[m, n] * PAULIS[m] @ rho @ PAULIS[n].conj().T
        return out

    def to_json(self) -> dict:
        return {"re": self.chi.real.tolist(), "im": self.chi.imag.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "ProcessMatrix":
        return cls(np.asarray(d["re"]) + 1j * np.asarray(d["im"]))


def channel_chi(channel: PolarizationChannel) -> ProcessMatrix:
    """Exact trace-normalized chi of a diattenuation channel."""
    K = channel.jones
    coeffs = np.array([np.trace(P.conj().T @ K) / 2.0 for P in PAULIS])
    chi = np.outer(coeffs, coeffs.conj())
    return ProcessMatrix(chi / np.trace(chi).real)


@dataclass
class TomographyCounts:
    """counts[s, b, o]: 6 inputs x 3 bases x (transmitted, reflected)."""

    counts: np.ndarray
    trials: int
    mu: float

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.counts.shape != (6, 3, 2):
            raise ValueError("counts must have shape (6, 3, 2)")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    def to_json(self) -> list:
        out = []
        for si, sname in enumerate(INPUT_STATES):
            for bi, bname in enumerate(MEASUREMENT_BASES):
                out.append({
                    "input": sname, "basis": bname,
                    "counts": [int(self.counts[si, bi, 0]), int(self.counts[si, bi, 1])],
                    "trials": self.trials, "mu": self.mu,
                })
        return out

    @classmethod
    def from_json(cls, rows) -> "TomographyCounts":
        counts = np.zeros((6, 3, 2), dtype=int)
        trials, mu = 0, 0.0
        snames = list(INPUT_STATES)
        bnames = list(MEASUREMENT_BASES)
        for row in rows:
            si, bi = snames.index(row["input"]), bnames.index(row["basis"])
            counts[si, bi] = row["counts"]
            trials, mu = row["trials"], row["mu"]
        return cls(counts, trials, mu)


def born_probabilities(channel: PolarizationChannel) -> np.ndarray:
    """p[s, b, o]: unnormalized detection probabilities of the channel."""
    p = np.zeros((6, 3, 2))
    for si, ket in enumerate(INPUT_STATES.values()):
        out = channel.jones @ ket
        for bi, (k0, k1) in enumerate(MEASUREMENT_BASES.values()):
            p[si, bi, 0] = np.abs(np.vdot(k0, out)) ** 2
            p[si, bi, 1] = np.abs(np.vdot(k1, out)) ** 2
    return p


def simulate_counts(channel: PolarizationChannel, mu: float, trials: int,
                    noise_rate: float = 0.0, seed: int = 0) -> TomographyCounts:
    """Poisson counts for the 18 tomography settings.

    Mean signal counts are trials * mu * (Born probability); ``noise_rate``
    is a flat background detection probability per trial and detector.
    """
    if mu <= 0 or trials <= 0:
        raise ValueError("mu and trials must be positive")
    rng = np.random.default_rng(seed)
    lam = trials * (mu * born_probabilities(channel) + noise_rate)
    return TomographyCounts(rng.poisson(lam), trials, mu)


def _chi_from_params(x: np.ndarray) -> np.ndarray:
    T = np.zeros((4, 4), dtype=complex)
    idx = 0
    for i in range(4):
        for j in range(i + 1):
            if i == j:
                T[i, j] = x[idx]
                idx += 1
            else:
                T[i, j] = x[idx] + 1j * x[idx + 1]
                idx += 2
    chi = T.conj().T @ T
    tr = np.trace(chi).real
    if tr <= 0:
        raise FloatingPointError("degenerate chi parameterization")
    return chi / tr


def _neg_log_likelihood(x: np.ndarray, counts: np.ndarray) -> float:
    chi = _chi_from_params(x)
    p = np.real(np.einsum("mn,sbomn->sbo", chi, _a_tensor()))
    tot = np.clip(p.sum(axis=2, keepdims=True), 1e-12, None)
    pc = np.clip(p / tot, 1e-12, 1.0 - 1e-12)
    return float(-(counts * np.log(pc)).sum())


def mle_reconstruct(counts: TomographyCounts, gtol: float = 1e-9) -> ProcessMatrix:
    """Maximum-likelihood chi matrix from tomography counts.

    chi = T'T with lower-triangular T guarantees Hermiticity and positivity;
    the likelihood uses the per-setting conditional outcome probabilities,
    which removes the unobservable overall loss.  Deterministic: fixed
    maximally-mixed starting point, quasi-Newton minimization.
    """
    x0 = np.zeros(16)
    x0[[0, 2, 5, 9]] = 0.5  # T = I/2: maximally mixed process
    res = minimize(_neg_log_likelihood, x0, args=(counts.counts,),
                   method="L-BFGS-B", options={"maxiter": 2000, "gtol": gtol})
    if not res.success and np.linalg.norm(res.jac) > 1e-3:
        raise RuntimeError(
            f"MLE did not converge: {res.message}, |grad| = {np.linalg.norm(res.jac):.2e}")
    chi = ProcessMatrix(_chi_from_params(res.x))
    chi.validate()
    return chi


def process_fidelity(chi: ProcessMatrix, chi_ideal: ProcessMatrix = None) -> float:
    """F = tr(chi_ideal . chi) for trace-normalized process matrices."""
    chi.validate()
    if chi_ideal is None:
        return float(chi.chi[0, 0].real)  # ideal identity: projector on I
    chi_ideal.validate()
    return float(np.trace(chi_ideal.chi @ chi.chi).real)


def monte_carlo_error(counts: TomographyCounts, resamples: int = 200,
                      seed: int = 0) -> float:
    """Std dev of the identity fidelity under Poisson resampling of counts."""
    if resamples < 100:
        raise ValueError("need at least 100 resamples")
    rng = np.random.default_rng(seed)
    fids = np.empty(resamples)
    base = counts.counts.astype(float)
    for i in range(resamples):
        resampled = TomographyCounts(rng.poisson(base), counts.trials, counts.mu)
        fids[i] = process_fidelity(mle_reconstruct(resampled))
    return float(fids.std())


def classical_bound(mu: float, eta_device: float, tail_tol: float = 1e-12) -> float:
    """Best measure-and-prepare fidelity against this memory.

    The adversary intercepts each weak coherent pulse, estimates the qubit
    on its n photons (optimal fidelity (n+1)/(n+2)), and re-prepares.  It
    must match the memory's per-pulse detection probability mu * eta, so it
    answers preferentially on the largest-n pulses of the Poisson(mu)
    distribution and stays silent otherwise.  Returns the count-weighted
    fidelity of that greedy strategy.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if not 0.0 < eta_device <= 1.0:
        raise ValueError("eta must be in (0, 1]")

    # Poisson tail truncation with provable residual
    n_max = 1
    while True:
        tail = 1.0 - _poisson_cdf(mu, n_max)
        if tail < tail_tol or n_max > 1000:
            break
        n_max += 1
    ns = np.arange(1, n_max + 1)
    pn = np.exp(-mu) * mu**ns.astype(float) / _factorials(n_max)[1:]
    fn = (ns + 1.0) / (ns + 2.0)

    rate = mu * eta_device
    total_nonvacuum = pn.sum()
    if rate >= total_nonvacuum:
        # memory clicks more often than photons arrive: use every pulse
        return float(np.sum(pn * fn) / total_nonvacuum)

    weight = 0.0
    acc = 0.0
    for n in ns[::-1]:
        p, f = pn[n - 1], fn[n - 1]
        take = min(p, rate - weight)
        acc += take * f
        weight += take
        if weight >= rate:
            break
    return float(acc / rate)


def _poisson_cdf(mu, n):
    k = np.arange(0, n + 1)
    return float(np.sum(np.exp(-mu) * mu**k.astype(float) / _factorials(n)))


def _factorials(n):
    out = np.ones(n + 1)
    for i in range(2, n + 1):
        out[i] = out[i - 1] * i
    return out


def sigma_margin(fidelity: float, sigma_f: float, bound: float) -> float:
    """How many standard deviations the fidelity clears the bound by."""
    if sigma_f <= 0:
        raise ValueError("sigma must be positive")
    return (fidelity - bound) / sigma_f
