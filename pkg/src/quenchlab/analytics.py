"""Closed-form Landau-Zener / Kibble-Zurek estimates and log-log power-law fits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

if TYPE_CHECKING:
    from .bloch import ArrayParams
    from .quench import QuenchSchedule


def lz_probability(k, p: "ArrayParams", s: "QuenchSchedule"):
    """Landau-Zener excitation probability for the ramp ``g0 -> -g0`` over ``tau_q``.

    ``exp(-pi (J - K)^2 cos(k)^2 tau_q / (2 g0))``, clipped to [0, 1].
    """
    rate = np.pi * (p.j_opt - p.k_mech) ** 2 * np.cos(k) ** 2 * s.tau_q / (2.0 * abs(s.g0))
    return np.clip(np.exp(-rate), 0.0, 1.0)


def kc_landau_zener(p: "ArrayParams", s: "QuenchSchedule") -> float:
    """Predicted half-width of the non-adiabatic window, ``sqrt(2 g0 / (pi tau_q)) / (J - K)``."""
    if p.j_opt == p.k_mech:
        raise ValueError("J == K: flat relative dispersion, no Landau-Zener window")
    return float(np.sqrt(2.0 * abs(s.g0) / (np.pi * s.tau_q)) / abs(p.j_opt - p.k_mech))


@dataclass(frozen=True)
class KZParams:
    """Symmetric sweep ``g(t) = g_m t / tau_q`` for ``t`` in ``(-inf, inf)``.

    ``delta`` is the constant diagonal half-splitting. The ramp
    ``g0 (1 - 2 t / tau_Q)`` on ``[0, tau_Q]`` has the same sweep rate with
    ``g_m = g0`` and ``tau_q = tau_Q / 2``; see :meth:`from_ramp`.
    """

    g_m: float
    tau_q: float
    delta: float

    def __post_init__(self):
        if not self.tau_q > 0:
            raise ValueError("tau_q must be positive")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")

    @classmethod
    def from_ramp(cls, k: float, p: "ArrayParams", s: "QuenchSchedule") -> "KZParams":
        from .bloch import half_splitting

        return cls(g_m=abs(s.g0), tau_q=0.5 * s.tau_q, delta=float(abs(half_splitting(k, p))))

    @property
    def t_hat(self) -> float:
        return kz_freeze_out(self)


def _freeze_residual(t, prm: KZParams):
    return t - 1.0 / np.sqrt(prm.delta**2 + (prm.g_m * t / prm.tau_q) ** 2)


def kz_freeze_out(prm: KZParams, rtol: float = 1e-13) -> float:
    """Positive root of ``t = 1 / sqrt(delta^2 + (g_m t / tau_q)^2)`` by bisection."""
    if prm.g_m == 0:
        if prm.delta == 0:
            raise ValueError("g_m = delta = 0: no finite freeze-out time")
        return 1.0 / prm.delta
    # the root is below both decoupled solutions 1/delta and sqrt(tau_q / g_m)
    hi = np.sqrt(prm.tau_q / abs(prm.g_m))
    if prm.delta > 0:
        hi = min(hi, 1.0 / prm.delta)
    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _freeze_residual(mid, prm) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def kz_beta_squared(prm: KZParams) -> float:
    """Frozen-state excitation ``x / (x + delta^2)`` with ``x = (g_m t_hat / tau_q)^2``."""
    x = (prm.g_m * kz_freeze_out(prm) / prm.tau_q) ** 2
    if x + prm.delta**2 == 0:
        return 1.0
    return float(x / (x + prm.delta**2))


def kz_excitation(prm: KZParams) -> float:
    """Closed form ``1 - 2 d^2 tau^2 / (d^2 tau^2 + sqrt(d^4 tau^4 + 32 g^2 tau^2))``."""
    a = prm.delta**2 * prm.tau_q**2
    root = np.sqrt(a**2 + 32.0 * prm.g_m**2 * prm.tau_q**2)
    if a + root == 0:
        return 1.0
    return float(1.0 - 2.0 * a / (a + root))


class PowerLawFit(NamedTuple):
    amplitude: float
    exponent: float
    rms_residual: float

    def __call__(self, x):
        return self.amplitude * np.asarray(x, dtype=float) ** self.exponent


def fit_power_law(x, y) -> PowerLawFit:
    """Ordinary least squares of ``log y`` on ``log x``."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("x and y differ in length")
    if x.size < 3:
        raise ValueError("need at least three points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs strictly positive data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (intercept + slope * lx)
    return PowerLawFit(float(np.exp(intercept)), float(slope), float(np.sqrt(np.mean(resid**2))))


class PowerLawRegressor(RegressorMixin, BaseEstimator):
    """``y = amplitude * x**exponent`` fitted in log-log space.

    Takes a single feature column; ``score`` is R^2 on the original scale.
    """

    def fit(self, X, y):
        X, y = validate_data(self, X, y, ensure_min_samples=3, y_numeric=True)
        if X.shape[1] != 1:
            raise ValueError(f"expected one feature, got {X.shape[1]}")
        result = fit_power_law(X[:, 0], y)
        self.amplitude_, self.exponent_, self.rms_residual_ = result
        return self

    def predict(self, X):
        check_is_fitted(self, "exponent_")
        X = validate_data(self, X, reset=False)
        return self.amplitude_ * X[:, 0] ** self.exponent_
