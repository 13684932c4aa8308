"""Small dense linear algebra and a fixed-order matrix ODE stepper.

Matrices are plain numpy arrays. A "2x2" argument may carry leading batch
axes, shape ``(..., 2, 2)``; every routine here broadcasts over them so a
whole k-grid can be advanced in one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
MAX_SYMMETRIC_DIM = 4096

Generator = Callable[[float], np.ndarray]


class StepUnderflowError(RuntimeError):
    """Raised when the step controller asks for a step below ``min_step``."""


class EigenSystem(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


def check_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.shape[-2:] != (2, 2):
        raise ValueError(f"expected a (..., 2, 2) array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    off = np.abs(m[..., 0, 1] - np.conj(m[..., 1, 0]))
    diag = np.abs(np.imag(m[..., 0, 0])) + np.abs(np.imag(m[..., 1, 1]))
    worst = float(np.max(np.maximum(off, diag)))
    if worst > tol:
        raise ValueError(f"matrix is not Hermitian: deviation {worst:.3e} > {tol:.1e}")
    return m


def eig_hermitian_2x2(m: np.ndarray) -> EigenSystem:
    """Closed-form eigendecomposition of Hermitian 2x2 matrices.

    Eigenvalues come back ascending along the last axis; ``vectors[..., :, j]``
    is the unit eigenvector of ``values[..., j]``, phased so its larger
    component is real and positive. A degenerate input (scalar multiple of the
    identity) returns the standard basis.
    """
    m = check_hermitian(m)
    a = m[..., 0, 0].real
    d = m[..., 1, 1].real
    b = 0.5 * (m[..., 0, 1] + np.conj(m[..., 1, 0]))
    mean = 0.5 * (a + d)
    half = 0.5 * (a - d)
    r = np.hypot(half, np.abs(b))

    # upper eigenvector, picking the algebraically stable of the two forms
    upper_pos = half >= 0
    x = np.where(upper_pos, half + r, b)
    y = np.where(upper_pos, np.conj(b), r - half)
    norm = np.sqrt(np.abs(x) ** 2 + np.abs(y) ** 2)
    degenerate = norm == 0
    safe = np.where(degenerate, 1.0, norm)
    x = np.where(degenerate, 0.0, x / safe)
    y = np.where(degenerate, 1.0, y / safe)
    up = _fix_phase(np.stack([x, y], axis=-1))
    lo = _fix_phase(np.stack([-np.conj(y), np.conj(x)], axis=-1))

    values = np.stack([mean - r, mean + r], axis=-1)
    vectors = np.stack([lo, up], axis=-1)
    return EigenSystem(values, vectors)


def _fix_phase(v):
    # make the larger component (the first on a tie) real and positive
    pick = np.where(np.abs(v[..., 1]) > np.abs(v[..., 0]), v[..., 1], v[..., 0])
    mag = np.abs(pick)
    phase = np.where(mag > 0, np.conj(pick) / np.where(mag > 0, mag, 1.0), 1.0)
    return v * phase[..., None]


def expm_hermitian_2x2(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i h t)`` via the spectral decomposition of ``h``."""
    vals, vecs = eig_hermitian_2x2(h)
    phase = np.exp(-1j * vals * t)
    return np.einsum("...ij,...j,...kj->...ik", vecs, phase, np.conj(vecs))


@dataclass(frozen=True)
class SymmetricMatrix:
    """Real symmetric matrix stored as its packed upper triangle (row-major)."""

    n: int
    packed: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if self.packed.shape != (self.n * (self.n + 1) // 2,):
            raise ValueError(f"packed storage of length {self.packed.shape} does not match n={self.n}")

    @classmethod
    def from_dense(cls, m: np.ndarray) -> "SymmetricMatrix":
        m = np.asarray(m, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("need a square matrix")
        iu = np.triu_indices(m.shape[0])
        return cls(m.shape[0], m[iu].copy())

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        iu = np.triu_indices(self.n)
        out[iu] = self.packed
        out.T[iu] = self.packed
        return out


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def eig_symmetric(m: SymmetricMatrix) -> EigenSystem:
    """Full eigendecomposition of a real symmetric matrix, ascending, sign-fixed."""
    if m.n > MAX_SYMMETRIC_DIM:
        raise ValueError(f"dimension {m.n} exceeds the cap of {MAX_SYMMETRIC_DIM}")
    vals, vecs = np.linalg.eigh(m.to_dense())
    return EigenSystem(vals, fix_signs(vecs))


def _inf_norm(m: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(m), axis=-1)))


@dataclass(frozen=True)
class StepPolicy:
    """Step caps for the RK4 marcher.

    ``max_phase`` bounds ``dt * ||h||``; ``max_commutator`` bounds
    ``dt**2 * ||[h(t), h(t + dt)]||``. Norms are infinity norms, maximised
    over any batch axes.
    """

    max_phase: float = 0.05
    max_commutator: float = 1e-4
    min_step: float = 1e-12
    max_step: float = np.inf

    @classmethod
    def for_span(cls, total_phase: float, tol: float = 5e-10, **kw) -> "StepPolicy":
        """Tighten ``max_phase`` for a run accumulating ``total_phase = int ||h|| dt``.

        Per RK4 step of phase ``theta`` the norm of ``S`` shrinks by
        ``theta**6 / 72`` and the truncation error is ``theta**5 / 120``;
        summed over ``total_phase / theta`` steps both stay below ``tol``.
        """
        base = kw.pop("max_phase", cls.max_phase)
        if total_phase <= 0:
            return cls(max_phase=base, **kw)
        theta = min((72.0 * tol / total_phase) ** 0.2, (120.0 * tol / total_phase) ** 0.25)
        return cls(max_phase=min(base, theta), **kw)


def _matmul(a, b):
    if a.shape[-2:] != (2, 2) or b.shape[-2:] != (2, 2):
        return a @ b
    # batched 2x2 products are several times faster written out than through matmul
    out = np.empty(np.broadcast_shapes(a.shape, b.shape), dtype=np.result_type(a, b))
    out[..., 0, 0] = a[..., 0, 0] * b[..., 0, 0] + a[..., 0, 1] * b[..., 1, 0]
    out[..., 0, 1] = a[..., 0, 0] * b[..., 0, 1] + a[..., 0, 1] * b[..., 1, 1]
    out[..., 1, 0] = a[..., 1, 0] * b[..., 0, 0] + a[..., 1, 1] * b[..., 1, 0]
    out[..., 1, 1] = a[..., 1, 0] * b[..., 0, 1] + a[..., 1, 1] * b[..., 1, 1]
    return out


def _rk4_propagator(s, dt, h0, hm, h1):
    k1 = -1j * _matmul(h0, s)
    k2 = -1j * _matmul(hm, s + 0.5 * dt * k1)
    k3 = -1j * _matmul(hm, s + 0.5 * dt * k2)
    k4 = -1j * _matmul(h1, s + dt * k3)
    return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _march(advance, generator: Generator, y0, t0: float, t1: float, policy: StepPolicy,
           times: Optional[Sequence[float]], callback):
    if t1 < t0:
        raise ValueError(f"t1={t1} precedes t0={t0}")
    targets = [t1] if times is None else [float(t) for t in times]
    if any(b <= a for a, b in zip(targets, targets[1:])):
        raise ValueError("sample times must be strictly increasing")
    if targets and (targets[0] < t0 or targets[-1] > t1):
        raise ValueError("sample times must lie inside [t0, t1]")

    y = y0
    t = t0
    h0 = None
    out = []
    for target in targets:
        while target - t > 0:
            remaining = target - t
            if h0 is None:
                h0 = generator(t)
            n0 = _inf_norm(h0)
            cap = min(policy.max_step, policy.max_phase / n0 if n0 > 0 else np.inf)
            while True:
                # equal sub-steps so the last one lands on ``target``
                dt = remaining / np.ceil(remaining / cap - 1e-9) if cap < remaining else remaining
                if dt < policy.min_step:
                    raise StepUnderflowError(f"step {dt:.3e} at t={t:.6g} is below min_step {policy.min_step:.1e}")
                h1 = generator(t + dt)
                n1 = _inf_norm(h1)
                if dt * n1 > policy.max_phase * (1 + 1e-9):
                    cap = min(cap, policy.max_phase / n1)
                    continue
                comm = _inf_norm(_matmul(h0, h1) - _matmul(h1, h0))
                if dt * dt * comm > policy.max_commutator:
                    cap = min(cap, 0.9 * np.sqrt(policy.max_commutator / comm))
                    continue
                break
            hm = generator(t + 0.5 * dt)
            y = advance(y, dt, h0, hm, h1)
            t = target if dt == remaining else t + dt
            h0 = h1
            if callback is not None:
                callback(t, y)
        out.append(y)
    return out[-1] if times is None else np.stack(out)


def integrate_matrix_ode(generator: Generator, t0: float, t1: float, policy: Optional[StepPolicy] = None,
                         *, times: Optional[Sequence[float]] = None, initial: Optional[np.ndarray] = None,
                         callback: Optional[Callable[[float, np.ndarray], None]] = None) -> np.ndarray:
    """Propagator of ``dS/dt = -i h(t) S`` with ``S(t0) = I`` by classical RK4.

    ``generator(t)`` returns ``h(t)`` with shape ``(..., 2, 2)`` (any square
    trailing shape works). Returns ``S(t1)``, or, when ``times`` is given, the
    stack of ``S`` at those times along a new leading axis. ``callback(t, S)``
    fires after every accepted step.
    """
    policy = policy or StepPolicy()
    h = np.asarray(generator(t0))
    if initial is None:
        s0 = np.broadcast_to(np.eye(h.shape[-1], dtype=complex), h.shape).copy()
    else:
        s0 = np.array(initial, dtype=complex)
    return _march(_rk4_propagator, generator, s0, t0, t1, policy, times, callback)


def integrate_covariance(h_eff: Generator, drive: np.ndarray, n0: np.ndarray, t0: float, t1: float,
                         policy: Optional[StepPolicy] = None, *, times: Optional[Sequence[float]] = None,
                         callback=None) -> np.ndarray:
    """Occupation matrix under ``dN/dt = -i (H N - N H^dagger) + D``.

    ``h_eff`` may be non-Hermitian (damping on the anti-Hermitian part);
    ``drive`` is the constant input matrix ``D``.
    """
    policy = policy or StepPolicy()
    drive = np.asarray(drive, dtype=complex)

    def rhs(n, h):
        return -1j * (_matmul(h, n) - _matmul(n, np.conj(np.swapaxes(h, -1, -2)))) + drive

    def advance(n, dt, h0, hm, h1):
        k1 = rhs(n, h0)
        k2 = rhs(n + 0.5 * dt * k1, hm)
        k3 = rhs(n + 0.5 * dt * k2, hm)
        k4 = rhs(n + dt * k3, h1)
        return n + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return _march(advance, h_eff, np.array(n0, dtype=complex), t0, t1, policy, times, callback)
