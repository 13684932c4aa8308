import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from quenchlab import (ArrayParams, KZParams, PowerLawRegressor, fit_power_law, kc_landau_zener, kz_beta_squared,
                       kz_excitation, kz_freeze_out, lz_probability)
from quenchlab.quench import QuenchSchedule


def test_lz_examples(defaults):
    s = QuenchSchedule(0.02, 800.0)
    assert lz_probability(np.pi / 2, defaults, s) == pytest.approx(1.0, abs=1e-15)
    assert lz_probability(0.3, defaults, QuenchSchedule(0.02, 1e9)) == 0.0
    k = 1.2
    border = 2 * 0.02 / (np.pi * (defaults.j_opt - defaults.k_mech) ** 2 * np.cos(k) ** 2)
    assert lz_probability(k, defaults, QuenchSchedule(0.02, border)) == pytest.approx(np.exp(-1), rel=1e-12)


@given(st.floats(-np.pi, np.pi), st.floats(1.0, 1e5), st.floats(1.0, 4.0))
def test_lz_monotone(k, tau, factor):
    p = ArrayParams()
    a = lz_probability(k, p, QuenchSchedule(0.02, tau))
    assert 0.0 <= a <= 1.0
    assert lz_probability(k, p, QuenchSchedule(0.02, tau * factor)) <= a
    k2 = np.arccos(min(1.0, abs(np.cos(k)) * factor))
    assert lz_probability(k2, p, QuenchSchedule(0.02, tau)) <= a + 1e-15


def test_kc_landau_zener(defaults):
    tau = 400.0
    kc = kc_landau_zener(defaults, QuenchSchedule(0.02, tau))
    assert kc * np.sqrt(tau) == pytest.approx(10.0, rel=2e-3)
    assert kc_landau_zener(defaults, QuenchSchedule(0.02, 4 * tau)) == pytest.approx(kc / 2, rel=1e-14)
    assert kc_landau_zener(defaults, QuenchSchedule(0.08, tau)) == pytest.approx(2 * kc, rel=1e-14)
    with pytest.raises(ValueError, match="J == K"):
        kc_landau_zener(ArrayParams(j_opt=0.01, k_mech=0.01), QuenchSchedule(0.02, tau))


def test_freeze_out_limits():
    assert kz_freeze_out(KZParams(0.0, 50.0, 0.01)) == pytest.approx(100.0, rel=1e-15)
    assert kz_freeze_out(KZParams(0.02, 50.0, 0.0)) == pytest.approx(np.sqrt(50 / 0.02), rel=1e-12)
    with pytest.raises(ValueError):
        kz_freeze_out(KZParams(0.0, 50.0, 0.0))
    with pytest.raises(ValueError):
        KZParams(0.02, 0.0, 0.1)
    with pytest.raises(ValueError):
        KZParams(0.02, 1.0, -0.1)


def test_freeze_out_residual_random(rng):
    worst = 0.0
    for g, tau, d in zip(rng.uniform(1e-4, 1, 10_000), 10 ** rng.uniform(-1, 5, 10_000), rng.uniform(0, 0.1, 10_000)):
        t = kz_freeze_out(KZParams(g, tau, d))
        assert t > 0
        worst = max(worst, abs(t - 1 / np.sqrt(d**2 + (g * t / tau) ** 2)) / t)
    assert worst < 1e-10


def test_from_ramp(defaults):
    prm = KZParams.from_ramp(0.4, defaults, QuenchSchedule(0.02, 800.0))
    assert prm.tau_q == 400.0 and prm.g_m == 0.02
    assert prm.delta == pytest.approx((0.0123 - 0.0010) * np.cos(0.4), rel=1e-12)
    assert prm.t_hat == kz_freeze_out(prm)


def test_kz_excitation_examples():
    assert kz_excitation(KZParams(0.02, 100.0, 0.0)) == 1.0
    assert kz_excitation(KZParams(0.02, 1e12, 0.005)) < 1e-6
    mpmath.mp.dps = 50
    g, d, tau = mpmath.mpf("0.02"), mpmath.mpf("0.005"), mpmath.mpf(100)
    a = d**2 * tau**2
    exact = 1 - 2 * a / (a + mpmath.sqrt(a**2 + 32 * g**2 * tau**2))
    assert kz_excitation(KZParams(0.02, 100.0, 0.005)) == pytest.approx(float(exact), rel=1e-14)


def test_kz_excitation_monotone_in_delta():
    for g in (0.005, 0.02, 0.1):
        for tau in (10.0, 100.0, 1e4):
            vals = [kz_excitation(KZParams(g, tau, d)) for d in np.linspace(0, 0.05, 200)]
            assert np.all(np.diff(vals) <= 0)


@given(st.floats(1e-3, 1), st.floats(1, 1e5), st.floats(0, 0.1))
def test_beta_squared_consistent(g, tau, d):
    prm = KZParams(g, tau, d)
    b = kz_beta_squared(prm)
    x = (g * kz_freeze_out(prm) / tau) ** 2
    assert 0 <= b <= 1
    assert b == pytest.approx(x / (x + d**2) if x + d**2 else 1.0, rel=1e-12)


def test_fit_exact():
    x = np.logspace(0, 4, 9)
    fit = fit_power_law(x, 3 * x**-0.5)
    assert fit.amplitude == pytest.approx(3, abs=1e-12)
    assert fit.exponent == pytest.approx(-0.5, abs=1e-12)
    assert fit.rms_residual < 1e-12
    assert np.allclose(fit(x), 3 * x**-0.5)


def test_fit_outlier_is_least_squares():
    x = np.logspace(0, 3, 8)
    y = 2 * x**-1.0
    y[3] *= 5
    fit = fit_power_law(x, y)
    assert fit.rms_residual > 0.1
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    assert fit.exponent == pytest.approx(slope) and fit.amplitude == pytest.approx(np.exp(intercept))
    for ds in (1e-4, -1e-4):
        worse = np.sqrt(np.mean((np.log(y) - intercept - (slope + ds) * np.log(x)) ** 2))
        assert worse > fit.rms_residual


def test_fit_rejects_bad_input():
    with pytest.raises(ValueError, match="positive"):
        fit_power_law([1, 2, 3], [1, 0, 2])
    with pytest.raises(ValueError, match="three"):
        fit_power_law([1, 2], [1, 2])
    with pytest.raises(ValueError):
        fit_power_law([1, 2, 3], [1, 2])


@given(st.floats(0.01, 100), st.floats(-2, 2), st.floats(0.1, 10))
def test_fit_scale_equivariance(c, b, a):
    x = np.array([1.0, 3.0, 10.0, 40.0])
    y = a * x**b * np.array([1.0, 1.1, 0.95, 1.02])
    f1 = fit_power_law(x, y)
    f2 = fit_power_law(c * x, y)
    assert f2.exponent == pytest.approx(f1.exponent, abs=1e-9)
    assert f2.amplitude == pytest.approx(f1.amplitude * c ** (-f1.exponent), rel=1e-9)


def test_regressor():
    x = np.logspace(1, 4, 10)[:, None]
    y = 10 * x[:, 0] ** -0.5
    est = PowerLawRegressor().fit(x, y)
    assert est.exponent_ == pytest.approx(-0.5) and est.amplitude_ == pytest.approx(10)
    assert est.n_features_in_ == 1
    assert np.allclose(est.predict(x), y)
    assert est.score(x, y) == pytest.approx(1.0)
    assert clone(est).get_params() == {}
    with pytest.raises(ValueError):
        PowerLawRegressor().fit(np.ones((5, 2)), np.ones(5))
    with pytest.raises(ValueError):
        est.predict(np.ones((3, 2)))
