"""k-space Bloch Hamiltonian of the 1D optomechanical array.

All rates are in units of the mechanical frequency (``omega = 1``), times in
units of its inverse. Functions accept scalar or array ``k`` and broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import eig_hermitian_2x2


@dataclass(frozen=True)
class ArrayParams:
    """Physical rates of the lattice.

    ``j_opt - k_mech = 0.0113`` is what the non-adiabatic window prefactor of
    about 10 implies for ``g = 0.02``; the split between the two is a choice.
    """

    delta: float = -1.0
    omega: float = 1.0
    g: float = 0.02
    j_opt: float = 0.0123
    k_mech: float = 0.0010
    kappa: float = 0.01
    gamma: float = 0.001

    def __post_init__(self):
        if self.omega != 1.0:
            raise ValueError(f"omega sets the unit of frequency and must be 1, got {self.omega}")
        if self.kappa < 0 or self.gamma < 0:
            raise ValueError("decay rates must be non-negative")

    @property
    def red_detuned(self) -> bool:
        return self.delta == -self.omega


@dataclass(frozen=True)
class ModeBasis:
    """Normal modes at given (k, g).

    ``r`` has the mode A row first: ``r @ h @ r.conj().T = diag(omega_a, omega_b)``.
    ``p_opt`` is the optical weight of mode A, ``|r[..., 0, 0]|**2``.
    """

    r: np.ndarray
    omega_a: np.ndarray
    omega_b: np.ndarray
    p_opt: np.ndarray = field(repr=False)


def dispersion(k, p: ArrayParams):
    """Bare optical and mechanical dispersions ``(Delta(k), Omega(k))``."""
    c = np.cos(k)
    return p.delta - 2.0 * p.j_opt * c, p.omega + 2.0 * p.k_mech * c


def bloch_matrix(k, p: ArrayParams, g) -> np.ndarray:
    delta_k, omega_k = dispersion(k, p)
    delta_k, omega_k, g = np.broadcast_arrays(delta_k, omega_k, np.asarray(g, dtype=float))
    h = np.empty(delta_k.shape + (2, 2), dtype=complex)
    h[..., 0, 0] = -delta_k
    h[..., 0, 1] = g
    h[..., 1, 0] = g
    h[..., 1, 1] = omega_k
    return h


def half_splitting(k, p: ArrayParams):
    """Half the bare diagonal difference of ``h_k``; ``(J - K) cos k`` when red detuned."""
    delta_k, omega_k = dispersion(k, p)
    return 0.5 * (-delta_k - omega_k)


def band_gap(k, p: ArrayParams, g):
    if p.red_detuned:
        return 2.0 * np.sqrt(g**2 + np.cos(k) ** 2 * (p.j_opt - p.k_mech) ** 2)
    vals = eig_hermitian_2x2(bloch_matrix(k, p, g)).values
    return vals[..., 1] - vals[..., 0]


def decompose(k, p: ArrayParams, g) -> ModeBasis:
    vals, vecs = eig_hermitian_2x2(bloch_matrix(k, p, g))
    # rows of r are the conjugated eigenvectors, upper band (A) first
    r = np.conj(np.swapaxes(vecs[..., ::-1], -1, -2))
    p_opt = np.abs(r[..., 0, 0]) ** 2
    return ModeBasis(r=r, omega_a=vals[..., 1], omega_b=vals[..., 0], p_opt=p_opt)


@dataclass(frozen=True)
class BandTable:
    """Band energies on a uniform k grid, one row per coupling value."""

    g: np.ndarray
    k: np.ndarray
    omega_a: np.ndarray
    omega_b: np.ndarray

    @property
    def gap(self) -> np.ndarray:
        return self.omega_a - self.omega_b

    def rows(self):
        for i, g in enumerate(self.g):
            for j, k in enumerate(self.k):
                yield float(k), float(g), float(self.omega_a[i, j]), float(self.omega_b[i, j]), float(self.gap[i, j])


def band_sweep(p: ArrayParams, g_list, n_k: int) -> BandTable:
    if n_k < 2:
        raise ValueError("need at least two k points")
    k = np.linspace(-np.pi, np.pi, n_k)
    g = np.asarray(g_list, dtype=float).reshape(-1)
    modes = decompose(k[None, :], p, g[:, None])
    return BandTable(g=g, k=k, omega_a=modes.omega_a, omega_b=modes.omega_b)
