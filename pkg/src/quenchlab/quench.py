"""Coupling quench through the avoided crossing, per Bloch momentum.

The coupling ramps linearly, ``g(t) = g0 (1 - 2 t / tau_q)`` on ``[0, tau_q]``.
For every k the 2x2 propagator is integrated with RK4; normal-mode
occupations follow from ``C(t) = R(g(t)) S(t) R(g0)^dagger`` and the thermal
populations of the initial normal modes. Occupations are in units of the
mechanical bath occupation.

The constant ``(h11 + h22) / 2`` part of ``h_k`` is taken out of the
integration and restored as the exact phase ``exp(-i c t)``; it never enters
an occupation.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .analytics import PowerLawFit, fit_power_law, kc_landau_zener
from .bloch import ArrayParams, decompose, dispersion, half_splitting
from .numerics import StepPolicy

SPAN_TOL = 5e-10
DEFAULT_N_K = 512
STANDARD_TAUS = tuple(50.0 * 2.0**e for e in range(-1, 11))


@dataclass(frozen=True)
class QuenchSchedule:
    g0: float
    tau_q: float

    def __post_init__(self):
        if not self.tau_q > 0:
            raise ValueError(f"quench time must be positive, got {self.tau_q}")

    def g(self, t):
        return self.g0 * (1.0 - 2.0 * np.asarray(t, dtype=float) / self.tau_q)


def g_of_t(s: QuenchSchedule, t: float) -> float:
    if not (0.0 <= t <= s.tau_q):
        raise ValueError(f"t={t} outside the quench window [0, {s.tau_q}]")
    return float(s.g(t))


@dataclass(frozen=True)
class ThermalPopulations:
    n_a: np.ndarray
    n_b: np.ndarray


@dataclass(frozen=True)
class DissipativeParams:
    kappa: float = 0.01
    gamma: float = 0.001
    n_bath_mech: float = 1.0
    n_bath_opt: float = 0.0

    def __post_init__(self):
        if min(self.kappa, self.gamma, self.n_bath_mech, self.n_bath_opt) < 0:
            raise ValueError("dissipation rates and bath occupations must be non-negative")


@dataclass(frozen=True)
class PopulationTrace:
    times: np.ndarray
    n_a_t: np.ndarray
    n_b_t: np.ndarray


@dataclass(frozen=True)
class QuenchResult:
    """Per-k occupations before and after one quench (arrays over the k grid).

    ``transfer`` is ``|C_AB|^2``: the probability that an excitation starting
    in mode B ends in mode A.
    """

    k: np.ndarray
    n_i_a: np.ndarray
    n_i_b: np.ndarray
    n_f_a: np.ndarray
    n_f_b: np.ndarray
    transfer: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_q_a(self) -> np.ndarray:
        return self.n_f_a - self.n_i_a

    @property
    def n_q_b(self) -> np.ndarray:
        return self.n_f_b - self.n_i_b

    def rows(self):
        for i in range(len(self.k)):
            yield (float(self.k[i]), float(self.n_i_a[i]), float(self.n_i_b[i]), float(self.n_f_a[i]),
                   float(self.n_f_b[i]), float(self.n_q_a[i]), float(self.n_q_b[i]))


def mode_occupations(p_opt, kappa: float, gamma: float, n_mech: float = 1.0, n_opt: float = 0.0):
    """Stationary occupations of modes A and B given A's optical weight.

    Each mode relaxes at the weighted rate of its optical and mechanical
    parts and is fed by the two baths with the same weights.
    """
    p_opt = np.asarray(p_opt, dtype=float)
    q = 1.0 - p_opt
    rate_a = p_opt * kappa + q * gamma
    rate_b = q * kappa + p_opt * gamma
    if np.any(rate_a == 0) or np.any(rate_b == 0):
        raise ValueError("a normal mode has zero total damping; no stationary state")
    n_a = (q * gamma * n_mech + p_opt * kappa * n_opt) / rate_a
    n_b = (p_opt * gamma * n_mech + q * kappa * n_opt) / rate_b
    return n_a, n_b


def thermal_populations(k, p: ArrayParams, g, d: Optional[DissipativeParams] = None) -> ThermalPopulations:
    if d is None:
        d = DissipativeParams(kappa=p.kappa, gamma=p.gamma)
    if d.kappa + d.gamma <= 0:
        raise ValueError("need kappa + gamma > 0 to define a thermal state")
    n_a, n_b = mode_occupations(decompose(k, p, g).p_opt, d.kappa, d.gamma, d.n_bath_mech, d.n_bath_opt)
    return ThermalPopulations(n_a, n_b)


# --- RK4 kernels for the linear ramp -------------------------------------------------

@njit(cache=True)
def _ramp_columns(half, g0, tau, times, max_dt):
    # traceless h = [[d, g], [g, -d]] keeps S in SU(2): S = [[a, -b*], [b, a*]],
    # and RK4 preserves that form, so the first column carries everything
    n_k = half.shape[0]
    out = np.empty((times.shape[0], n_k, 2), dtype=np.complex128)
    rate = -2.0 * g0 / tau
    for ik in range(n_k):
        d = half[ik]
        a = 1.0 + 0.0j
        b = 0.0 + 0.0j
        t = 0.0
        for it in range(times.shape[0]):
            span = times[it] - t
            if span > 0.0:
                n = int(math.ceil(span / max_dt - 1e-9))
                dt = span / n
                for i in range(n):
                    ts = t + i * dt
                    g1 = g0 + rate * ts
                    gm = g0 + rate * (ts + 0.5 * dt)
                    g4 = g0 + rate * (ts + dt)
                    k1a = -1j * (d * a + g1 * b)
                    k1b = -1j * (g1 * a - d * b)
                    a2 = a + 0.5 * dt * k1a
                    b2 = b + 0.5 * dt * k1b
                    k2a = -1j * (d * a2 + gm * b2)
                    k2b = -1j * (gm * a2 - d * b2)
                    a3 = a + 0.5 * dt * k2a
                    b3 = b + 0.5 * dt * k2b
                    k3a = -1j * (d * a3 + gm * b3)
                    k3b = -1j * (gm * a3 - d * b3)
                    a4 = a + dt * k3a
                    b4 = b + dt * k3b
                    k4a = -1j * (d * a4 + g4 * b4)
                    k4b = -1j * (g4 * a4 - d * b4)
                    a = a + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
                    b = b + dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
                t = times[it]
            out[it, ik, 0] = a
            out[it, ik, 1] = b
    return out


@njit(cache=True)
def _cov_rhs(n00, n01, n10, n11, h00, h01, h10, h11, d00, d11):
    # -i (H N - N H^dagger) + D, entries written out
    c00 = np.conj(h00)
    c01 = np.conj(h10)
    c10 = np.conj(h01)
    c11 = np.conj(h11)
    r00 = -1j * ((h00 * n00 + h01 * n10) - (n00 * c00 + n01 * c10)) + d00
    r01 = -1j * ((h00 * n01 + h01 * n11) - (n00 * c01 + n01 * c11))
    r10 = -1j * ((h10 * n00 + h11 * n10) - (n10 * c00 + n11 * c10))
    r11 = -1j * ((h10 * n01 + h11 * n11) - (n10 * c01 + n11 * c11)) + d11
    return r00, r01, r10, r11


@njit(cache=True)
def _ramp_covariance(half, g0, tau, kappa, gamma, d00, d11, n_init, times, max_dt):
    n_k = half.shape[0]
    out = np.empty((times.shape[0], n_k, 2, 2), dtype=np.complex128)
    rate = -2.0 * g0 / tau
    ka = -0.5j * kappa
    ga = -0.5j * gamma
    for ik in range(n_k):
        d = half[ik]
        n00 = n_init[ik, 0, 0]
        n01 = n_init[ik, 0, 1]
        n10 = n_init[ik, 1, 0]
        n11 = n_init[ik, 1, 1]
        t = 0.0
        for it in range(times.shape[0]):
            span = times[it] - t
            if span > 0.0:
                n = int(math.ceil(span / max_dt - 1e-9))
                dt = span / n
                for i in range(n):
                    ts = t + i * dt
                    g1 = g0 + rate * ts
                    gm = g0 + rate * (ts + 0.5 * dt)
                    g4 = g0 + rate * (ts + dt)
                    k1 = _cov_rhs(n00, n01, n10, n11, d + ka, g1 + 0j, g1 + 0j, -d + ga, d00, d11)
                    k2 = _cov_rhs(n00 + 0.5 * dt * k1[0], n01 + 0.5 * dt * k1[1], n10 + 0.5 * dt * k1[2],
                                  n11 + 0.5 * dt * k1[3], d + ka, gm + 0j, gm + 0j, -d + ga, d00, d11)
                    k3 = _cov_rhs(n00 + 0.5 * dt * k2[0], n01 + 0.5 * dt * k2[1], n10 + 0.5 * dt * k2[2],
                                  n11 + 0.5 * dt * k2[3], d + ka, gm + 0j, gm + 0j, -d + ga, d00, d11)
                    k4 = _cov_rhs(n00 + dt * k3[0], n01 + dt * k3[1], n10 + dt * k3[2], n11 + dt * k3[3],
                                  d + ka, g4 + 0j, g4 + 0j, -d + ga, d00, d11)
                    n00 = n00 + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
                    n01 = n01 + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
                    n10 = n10 + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
                    n11 = n11 + dt / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
                t = times[it]
            out[it, ik, 0, 0] = n00
            out[it, ik, 0, 1] = n01
            out[it, ik, 1, 0] = n10
            out[it, ik, 1, 1] = n11
    return out


def ramp_step(half, s: QuenchSchedule, policy: StepPolicy, damping: float = 0.0) -> float:
    """Largest uniform step meeting both caps of ``policy`` over the whole ramp.

    For ``h = d sz + g sx (- i damping terms)`` the infinity norm is at most
    ``max|d| + |g0| + damping`` and ``||[h(t), h(t + dt)]|| = |dg| (2 |d| + skew)``
    with ``dg = 2 g0 dt / tau``.
    """
    dmax = float(np.max(np.abs(half))) if np.size(half) else 0.0
    norm = dmax + abs(s.g0) + damping
    dt = policy.max_phase / norm if norm > 0 else s.tau_q
    slope = 2.0 * abs(s.g0) / s.tau_q * (2.0 * dmax + damping)
    if slope > 0:
        dt = min(dt, (policy.max_commutator / slope) ** (1.0 / 3.0))
    dt = min(dt, policy.max_step)
    if dt < policy.min_step:
        raise RuntimeError(f"step {dt:.3e} below min_step {policy.min_step:.1e}")
    return dt


def default_policy(half, s: QuenchSchedule, damping: float = 0.0, tol: float = SPAN_TOL) -> StepPolicy:
    dmax = float(np.max(np.abs(half))) if np.size(half) else 0.0
    return StepPolicy.for_span((dmax + abs(s.g0) + damping) * s.tau_q, tol)


def _sample_times(s: QuenchSchedule, times) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0) or np.any(times > s.tau_q * (1 + 1e-12)) or np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be increasing inside [0, tau_q]")
    return np.minimum(times, s.tau_q)


def propagators(k, p: ArrayParams, s: QuenchSchedule, times, policy: Optional[StepPolicy] = None) -> np.ndarray:
    """``S_k(t)`` for every k and sample time, shape ``(n_t, n_k, 2, 2)``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    times = _sample_times(s, times)
    half = half_splitting(k, p)
    policy = policy or default_policy(half, s)
    cols = _ramp_columns(half, float(s.g0), float(s.tau_q), times, ramp_step(half, s, policy))
    a, b = cols[..., 0], cols[..., 1]
    su2 = np.stack([np.stack([a, -np.conj(b)], -1), np.stack([b, np.conj(a)], -1)], -2)
    delta_k, omega_k = dispersion(k, p)
    centre = 0.5 * (omega_k - delta_k)
    return su2 * np.exp(-1j * centre[None, :] * times[:, None])[..., None, None]


def transfer_matrices(k, p: ArrayParams, s: QuenchSchedule, times, policy: Optional[StepPolicy] = None):
    """``C(t) = R(g(t)) S(t) R(g0)^dagger`` at each sample, shape ``(n_t, n_k, 2, 2)``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    times = _sample_times(s, times)
    sk = propagators(k, p, s, times, policy)
    r0 = decompose(k, p, s.g0).r
    rt = decompose(k[None, :], p, s.g(times)[:, None]).r
    return rt @ sk @ np.conj(np.swapaxes(r0, -1, -2))[None]


def _occupations_from_c(c, n_a0, n_b0):
    w = np.abs(c) ** 2
    return w[..., 0, 0] * n_a0 + w[..., 0, 1] * n_b0, w[..., 1, 0] * n_a0 + w[..., 1, 1] * n_b0


def evolve_quench(k: float, p: ArrayParams, s: QuenchSchedule, n_samples: int = 201, *,
                  initial: Optional[tuple] = None, policy: Optional[StepPolicy] = None) -> PopulationTrace:
    """Normal-mode occupations of one k through the quench.

    ``initial`` overrides the thermal ``(n_A(0), n_B(0))``.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    times = np.linspace(0.0, s.tau_q, n_samples)
    if initial is None:
        th = thermal_populations(k, p, s.g0)
        initial = (float(th.n_a), float(th.n_b))
    c = transfer_matrices(k, p, s, times, policy)[:, 0]
    n_a, n_b = _occupations_from_c(c, *initial)
    return PopulationTrace(times, n_a, n_b)


def k_grid(n_k: int) -> np.ndarray:
    return np.linspace(0.0, np.pi, n_k)


def net_excitation_spectrum(p: ArrayParams, s: QuenchSchedule, n_k: int = DEFAULT_N_K,
                            policy: Optional[StepPolicy] = None) -> QuenchResult:
    if n_k < 16:
        raise ValueError("need n_k >= 16")
    k = k_grid(n_k)
    th = thermal_populations(k, p, s.g0)
    c = transfer_matrices(k, p, s, [s.tau_q], policy)[0]
    n_f_a, n_f_b = _occupations_from_c(c, th.n_a, th.n_b)
    return QuenchResult(k, th.n_a, th.n_b, n_f_a, n_f_b, transfer=np.abs(c[:, 0, 1]) ** 2)


def kc_extract(spectrum: QuenchResult, epsilon: float, observable: str = "n_q", strict: bool = False) -> float:
    """Half-width of the window around pi/2 outside which the observable stays below epsilon.

    ``observable`` is ``"n_q"`` (net excitation of mode A) or ``"transfer"``
    (inter-band transfer probability). Only ``0 <= k <= pi`` is used; the
    returned width includes half a grid spacing. If the observable reaches
    epsilon at the ends of the grid the window is not resolved: ``strict``
    raises, otherwise the capped width is returned.
    """
    values = _observable(spectrum, observable)
    k = spectrum.k
    keep = (k >= 0) & (k <= np.pi)
    k, values = k[keep], values[keep]
    if len(k) < 2:
        raise ValueError("need at least two grid points in [0, pi]")
    above = values >= epsilon
    if not np.any(above):
        return 0.0
    if strict and (above[0] or above[-1]):
        raise ValueError(f"epsilon={epsilon:.3e} is below the far-field level of the spectrum; k_c unresolvable")
    spacing = float(np.min(np.diff(k)))
    return float(np.max(np.abs(k[above] - np.pi / 2)) + 0.5 * spacing)


def _observable(spectrum: QuenchResult, observable: str) -> np.ndarray:
    if observable == "n_q":
        return spectrum.n_q_a
    if observable == "transfer":
        if spectrum.transfer is None:
            raise ValueError("spectrum carries no transfer probabilities")
        return spectrum.transfer
    raise ValueError(f"unknown observable {observable!r}")


def integrated_excitation(spectrum: QuenchResult):
    """Trapezoidal ``(int N_Q dk, int |N_Q| dk)`` of mode A over the grid."""
    n_q = spectrum.n_q_a
    return float(np.trapezoid(n_q, spectrum.k)), float(np.trapezoid(np.abs(n_q), spectrum.k))


@dataclass(frozen=True)
class KcCurve:
    """Non-adiabatic window versus quench time.

    ``censored`` marks points whose window reaches the zone edge (k = 0) or is
    empty; they bound k_c rather than measure it and are left out of the fit.
    """

    tau: np.ndarray
    k_c: np.ndarray
    censored: np.ndarray
    fit: PowerLawFit
    epsilon: float
    observable: str
    lz_amplitude: float


def _spectrum_task(args):
    p, g0, tau, n_k = args
    return net_excitation_spectrum(p, QuenchSchedule(g0, tau), n_k)


def sweep_spectra(p: ArrayParams, tau_list: Sequence[float], n_k: int = DEFAULT_N_K, workers: int = 1,
                  g0: Optional[float] = None) -> list:
    """Spectra for each quench time, in input order whatever ``workers`` is."""
    g0 = p.g if g0 is None else g0
    tasks = [(p, g0, float(tau), n_k) for tau in tau_list]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_spectrum_task, tasks))
    return [_spectrum_task(t) for t in tasks]


def default_epsilon(spectra: Sequence[QuenchResult], taus: Sequence[float], observable: str) -> float:
    if observable == "transfer":
        return math.exp(-1.0)
    fastest = spectra[int(np.argmin(taus))]
    return 0.02 * float(np.max(fastest.n_q_a))


def kc_curve(p: ArrayParams, tau_list: Sequence[float] = STANDARD_TAUS, epsilon: Optional[float] = None,
             observable: str = "transfer", n_k: int = DEFAULT_N_K, workers: int = 1,
             spectra: Optional[Sequence[QuenchResult]] = None) -> KcCurve:
    """k_c for each quench time plus a log-log power-law fit.

    The default threshold is the Landau-Zener border, transfer probability
    ``1/e``. With ``observable="n_q"`` the default is 2% of the largest net
    excitation at the fastest quench.
    """
    taus = np.asarray(tau_list, dtype=float)
    if taus.size == 0:
        raise ValueError("empty quench-time list")
    if spectra is None:
        spectra = sweep_spectra(p, taus, n_k, workers)
    if epsilon is None:
        epsilon = default_epsilon(spectra, taus, observable)
    kc = np.array([kc_extract(sp, epsilon, observable) for sp in spectra])
    spacing = np.array([sp.k[1] - sp.k[0] for sp in spectra])
    censored = (kc <= 0) | (kc >= np.pi / 2 - 0.5 * spacing)
    use = ~censored
    if np.count_nonzero(use) >= 3:
        fit = fit_power_law(taus[use], kc[use])
    else:
        fit = PowerLawFit(float("nan"), float("nan"), float("nan"))
    lz = kc_landau_zener(p, QuenchSchedule(p.g, 1.0))
    return KcCurve(taus, kc, censored, fit, float(epsilon), observable, lz)


# --- dissipative extension ------------------------------------------------------------

def _dissipative_occupations(k, p: ArrayParams, s: QuenchSchedule, d: DissipativeParams, times,
                             policy: Optional[StepPolicy] = None, initial: Optional[ThermalPopulations] = None):
    k = np.atleast_1d(np.asarray(k, dtype=float))
    times = _sample_times(s, times)
    half = half_splitting(k, p)
    if initial is None:
        th = thermal_populations(k, p, s.g0, d)
    else:
        th = ThermalPopulations(np.broadcast_to(np.asarray(initial.n_a, dtype=float), k.shape),
                                np.broadcast_to(np.asarray(initial.n_b, dtype=float), k.shape))
    r0 = decompose(k, p, s.g0).r
    diag = np.zeros(k.shape + (2, 2), dtype=complex)
    diag[:, 0, 0] = th.n_a
    diag[:, 1, 1] = th.n_b
    n0 = np.conj(np.swapaxes(r0, -1, -2)) @ diag @ r0
    damping = 0.5 * max(d.kappa, d.gamma)
    policy = policy or default_policy(half, s, damping)
    dt = ramp_step(half, s, policy, damping)
    n_t = _ramp_covariance(half, float(s.g0), float(s.tau_q), float(d.kappa), float(d.gamma),
                           complex(d.kappa * d.n_bath_opt), complex(d.gamma * d.n_bath_mech),
                           np.ascontiguousarray(n0), times, dt)
    rt = decompose(k[None, :], p, s.g(times)[:, None]).r
    modes = rt @ n_t @ np.conj(np.swapaxes(rt, -1, -2))
    return th, modes[..., 0, 0].real, modes[..., 1, 1].real


def evolve_dissipative(k: float, p: ArrayParams, s: QuenchSchedule, d: DissipativeParams,
                       n_samples: int = 201, policy: Optional[StepPolicy] = None, *,
                       initial: Optional[ThermalPopulations] = None) -> PopulationTrace:
    """Occupations through the quench with damping and bath input on both oscillators.

    The initial state is diagonal in the normal modes of ``g0`` with the
    thermal occupations for the rates in ``d``, unless ``initial`` is given.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    times = np.linspace(0.0, s.tau_q, n_samples)
    _, n_a, n_b = _dissipative_occupations(k, p, s, d, times, policy, initial)
    return PopulationTrace(times, n_a[:, 0], n_b[:, 0])


def dissipative_spectrum(p: ArrayParams, s: QuenchSchedule, d: DissipativeParams, n_k: int = DEFAULT_N_K,
                         policy: Optional[StepPolicy] = None, *,
                         initial: Optional[ThermalPopulations] = None) -> QuenchResult:
    if n_k < 16:
        raise ValueError("need n_k >= 16")
    k = k_grid(n_k)
    th, n_a, n_b = _dissipative_occupations(k, p, s, d, [s.tau_q], policy, initial)
    return QuenchResult(k, th.n_a, th.n_b, n_a[0], n_b[0])


def reference_spectrum(p: ArrayParams, s: QuenchSchedule, d: DissipativeParams, n_k: int = DEFAULT_N_K,
                       policy: Optional[StepPolicy] = None) -> QuenchResult:
    """Dissipation-free quench started from the same thermal state as ``dissipative_spectrum``."""
    k = k_grid(n_k)
    th = thermal_populations(k, p, s.g0, d)
    c = transfer_matrices(k, p, s, [s.tau_q], policy)[0]
    n_f_a, n_f_b = _occupations_from_c(c, th.n_a, th.n_b)
    return QuenchResult(k, th.n_a, th.n_b, n_f_a, n_f_b, transfer=np.abs(c[:, 0, 1]) ** 2)
