import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quenchlab import numerics
from quenchlab.numerics import (StepPolicy, StepUnderflowError, SymmetricMatrix, eig_hermitian_2x2,
                                eig_symmetric, expm_hermitian_2x2, integrate_covariance, integrate_matrix_ode)

finite = st.floats(-10, 10, allow_nan=False)


def random_hermitian(rng, size):
    a = rng.normal(size=size + (2, 2)) + 1j * rng.normal(size=size + (2, 2))
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def quadratic_roots(m):
    # characteristic polynomial x^2 - tr x + det
    tr = (m[0, 0] + m[1, 1]).real
    det = (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]).real
    disc = np.sqrt(max(tr * tr - 4 * det, 0.0))
    return sorted([(tr - disc) / 2, (tr + disc) / 2])


def same_up_to_phase(u, v, tol=1e-12):
    return abs(abs(np.vdot(u, v)) - 1) < tol


class TestEigHermitian:
    def test_symmetric_pair(self):
        vals, vecs = eig_hermitian_2x2(np.array([[1, 0.02], [0.02, 1]]))
        assert np.allclose(vals, [0.98, 1.02], atol=1e-15)
        assert same_up_to_phase(vecs[:, 0], np.array([1, -1]) / np.sqrt(2))
        assert same_up_to_phase(vecs[:, 1], np.array([1, 1]) / np.sqrt(2))

    def test_diagonal(self):
        vals, vecs = eig_hermitian_2x2(np.diag([-1.0, 1.0]))
        assert np.array_equal(vals, [-1.0, 1.0])
        assert np.allclose(vecs, np.eye(2))

    def test_identity_gives_standard_basis(self):
        vals, vecs = eig_hermitian_2x2(3 * np.eye(2))
        assert np.array_equal(vals, [3.0, 3.0])
        assert np.array_equal(vecs, np.eye(2))

    @given(finite, finite, finite, finite)
    def test_matches_quadratic_formula(self, a, d, re, im):
        m = np.array([[a, re + 1j * im], [re - 1j * im, d]])
        vals, vecs = eig_hermitian_2x2(m)
        scale = max(1.0, np.abs(m).max())
        assert np.allclose(vals, quadratic_roots(m), atol=1e-12 * scale, rtol=0)
        assert np.allclose(np.conj(vecs.T) @ vecs, np.eye(2), atol=1e-12)

    def test_reconstruction_batch(self, rng):
        m = random_hermitian(rng, (10_000,))
        vals, vecs = eig_hermitian_2x2(m)
        r = np.conj(np.swapaxes(vecs, -1, -2))
        rebuilt = np.conj(np.swapaxes(r, -1, -2)) @ (vals[..., :, None] * r)
        assert np.max(np.abs(rebuilt - m)) < 1e-10
        assert np.all(vals[:, 0] <= vals[:, 1])

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match="not Hermitian"):
            eig_hermitian_2x2(np.array([[1, 0.1], [0.2, 1]]))
        with pytest.raises(ValueError, match="non-finite"):
            eig_hermitian_2x2(np.array([[np.nan, 0], [0, 1]]))
        with pytest.raises(ValueError):
            eig_hermitian_2x2(np.eye(3))


def power_iteration_extremes(a, iters=20_000, tol=1e-14):
    """Largest and smallest eigenvalues by shifted power iteration with deflation."""
    n = a.shape[0]
    rng = np.random.default_rng(0)

    def dominant(m, deflate=()):
        v = rng.normal(size=n)
        lam = 0.0
        for _ in range(iters):
            for u in deflate:
                v -= (u @ v) * u
            w = m @ v
            new = v @ w
            v = w / np.linalg.norm(w)
            if abs(new - lam) < tol * max(1.0, abs(new)):
                break
            lam = new
        return v @ m @ v, v

    shift = np.abs(a).sum(axis=1).max()
    top, u = dominant(a + shift * np.eye(n))
    bottom, _ = dominant(shift * np.eye(n) - a)
    # second largest after deflating the top vector
    second, _ = dominant(a + shift * np.eye(n), deflate=(u,))
    return top - shift, shift - bottom, second - shift


class TestEigSymmetric:
    def test_dimer(self):
        vals, _ = eig_symmetric(SymmetricMatrix.from_dense([[0, 0.7], [0.7, 0]]))
        assert np.allclose(vals, [-0.7, 0.7])

    def test_identity(self):
        vals, vecs = eig_symmetric(SymmetricMatrix.from_dense(np.eye(5)))
        assert np.array_equal(vals, np.ones(5))
        assert np.array_equal(vecs, np.eye(5))

    def test_against_power_iteration(self):
        from quenchlab.ssh import SSHParams, hopping_matrix
        a = hopping_matrix(SSHParams(10, 1.0, 2.0))
        vals, _ = eig_symmetric(SymmetricMatrix.from_dense(a))
        top, bottom, second = power_iteration_extremes(a)
        assert abs(vals[-1] - top) < 1e-8
        assert abs(vals[0] - bottom) < 1e-8
        assert abs(vals[-2] - second) < 1e-8

    @given(st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_invariants(self, n, seed):
        a = np.random.default_rng(seed).normal(size=(n, n))
        m = SymmetricMatrix.from_dense(a + a.T)
        vals, vecs = eig_symmetric(m)
        dense = m.to_dense()
        assert np.all(np.diff(vals) >= 0)
        assert np.max(np.abs(vecs.T @ vecs - np.eye(n))) < 1e-10
        assert np.max(np.abs(dense @ vecs - vecs * vals)) < 1e-9 * np.abs(dense).sum(axis=1).max()
        assert abs(vals.sum() - np.trace(dense)) <= 1e-9 * max(1.0, np.abs(vals).sum())
        idx = np.argmax(np.abs(vecs), axis=0)
        assert np.all(vecs[idx, np.arange(n)] > 0)

    def test_packed_roundtrip(self, rng):
        a = rng.normal(size=(6, 6))
        a = a + a.T
        assert np.array_equal(SymmetricMatrix.from_dense(a).to_dense(), a)
        with pytest.raises(ValueError):
            SymmetricMatrix(3, np.zeros(5))

    def test_size_cap(self, monkeypatch):
        monkeypatch.setattr(numerics, "MAX_SYMMETRIC_DIM", 3)
        with pytest.raises(ValueError, match="exceeds"):
            eig_symmetric(SymmetricMatrix.from_dense(np.eye(4)))


class TestIntegrator:
    H = np.array([[0.3, 0.2 - 0.1j], [0.2 + 0.1j, -0.5]])

    def test_constant_generator_matches_exponential(self):
        for t in (0.7, 13.0, 250.0):
            policy = StepPolicy.for_span(np.abs(self.H).sum(axis=1).max() * t)
            s = integrate_matrix_ode(lambda _: self.H, 0.0, t, policy)
            assert np.max(np.abs(s - expm_hermitian_2x2(self.H, t))) < 1e-8

    def test_zero_span_is_identity(self):
        assert np.array_equal(integrate_matrix_ode(lambda _: self.H, 2.0, 2.0), np.eye(2))

    def test_rejects_backwards(self):
        with pytest.raises(ValueError):
            integrate_matrix_ode(lambda _: self.H, 1.0, 0.0)

    def test_step_underflow(self):
        with pytest.raises(StepUnderflowError, match="min_step"):
            integrate_matrix_ode(lambda t: 1e14 * self.H, 0.0, 1.0)

    @staticmethod
    def ramp(t):
        g = 0.4 * (1 - 2 * t / 30.0)
        return np.array([[0.25, g], [g, -0.25]], dtype=complex)

    def test_unitary_at_every_step(self):
        worst = []
        policy = StepPolicy.for_span(0.65 * 30.0)
        integrate_matrix_ode(self.ramp, 0.0, 30.0, policy,
                             callback=lambda t, s: worst.append(np.abs(s.conj().T @ s - np.eye(2)).max()))
        assert len(worst) > 100
        assert max(worst) < 1e-9

    def test_determinant_and_step_halving(self):
        policy = StepPolicy.for_span(0.65 * 30.0)
        s1 = integrate_matrix_ode(self.ramp, 0.0, 30.0, policy)
        s2 = integrate_matrix_ode(self.ramp, 0.0, 30.0, StepPolicy(max_phase=policy.max_phase / 2))
        assert abs(abs(np.linalg.det(s1)) - 1) < 1e-9
        assert np.max(np.abs(s1 - s2)) < 1e-8

    def test_fourth_order_convergence(self):
        free = dict(max_commutator=np.inf)
        ref = integrate_matrix_ode(self.ramp, 0.0, 30.0, StepPolicy(max_phase=0.005, **free))
        errs = [np.max(np.abs(integrate_matrix_ode(self.ramp, 0.0, 30.0, StepPolicy(max_phase=c, **free)) - ref))
                for c in (0.2, 0.1)]
        assert np.log2(errs[0] / errs[1]) > 3.7

    def test_sample_times(self):
        times = [1.0, 5.0, 9.0]
        stack = integrate_matrix_ode(lambda _: self.H, 0.0, 9.0, StepPolicy.for_span(9.0), times=times)
        for t, s in zip(times, stack):
            assert np.max(np.abs(s - expm_hermitian_2x2(self.H, t))) < 1e-9

    def test_covariance_without_damping(self):
        n0 = np.array([[0.3, 0.05j], [-0.05j, 0.8]])
        n1 = integrate_covariance(lambda _: self.H, np.zeros((2, 2)), n0, 0.0, 20.0, StepPolicy.for_span(20.0))
        u = expm_hermitian_2x2(self.H, 20.0)
        assert np.max(np.abs(n1 - u @ n0 @ u.conj().T)) < 1e-9

    def test_covariance_scalar_relaxation(self):
        # single damped mode: n(t) = exp(-G t)(n0 - nth) + nth
        gam, nth, n0 = 0.02, 1.5, 4.0
        times = np.linspace(10, 200, 5)
        out = integrate_covariance(lambda _: np.array([[1.0 - 0.5j * gam]]), np.array([[gam * nth]]),
                                   np.array([[n0]]), 0.0, 200.0, StepPolicy(max_phase=0.01), times=times)
        assert np.allclose(out[:, 0, 0].real, np.exp(-gam * times) * (n0 - nth) + nth, atol=1e-9)
