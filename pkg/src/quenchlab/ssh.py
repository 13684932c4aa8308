"""Finite bosonic SSH chain in the single-excitation sector.

Sites alternate between the two sublattices; hopping ``K`` couples the two
sites of a cell and ``K_p`` couples neighbouring cells. The uniform on-site
frequency only adds a global phase, so the hopping matrix has a zero diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .bloch import ArrayParams
from .numerics import EigenSystem, SymmetricMatrix, eig_symmetric


@dataclass(frozen=True)
class SSHParams:
    n_cells: int = 10
    k_intra: float = 1.0
    k_inter: float = 3.0

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ValueError(f"n_cells must be a positive integer, got {self.n_cells}")

    @property
    def n_sites(self) -> int:
        return 2 * self.n_cells

    @property
    def lam(self) -> float:
        """Order parameter ``K_p / K``."""
        if self.k_intra == 0:
            return np.inf if self.k_inter != 0 else np.nan
        return self.k_inter / self.k_intra

    def swapped(self) -> "SSHParams":
        return SSHParams(self.n_cells, self.k_inter, self.k_intra)


def hopping_matrix(p: SSHParams) -> np.ndarray:
    n = p.n_sites
    off = np.where(np.arange(n - 1) % 2 == 0, p.k_intra, p.k_inter).astype(float)
    return np.diag(off, 1) + np.diag(off, -1)


def build_ssh(p: SSHParams) -> SymmetricMatrix:
    return SymmetricMatrix.from_dense(hopping_matrix(p))


@dataclass(frozen=True)
class SSHSpectrum:
    params: SSHParams
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def ssh_spectrum(p: SSHParams) -> SSHSpectrum:
    vals, vecs = eig_symmetric(build_ssh(p))
    return SSHSpectrum(p, vals, vecs)


def spectrum_scan(n_cells: int, lambda_list: Sequence[float], k_intra: float = 1.0) -> list:
    """``(lambda, eigenvalues)`` for each ratio, in input order."""
    out = []
    for lam in lambda_list:
        if lam < 0:
            raise ValueError(f"lambda must be non-negative, got {lam}")
        spec = ssh_spectrum(SSHParams(n_cells, k_intra, lam * k_intra))
        out.append((float(lam), spec.eigenvalues))
    return out


def effective_coupling(p: ArrayParams) -> float:
    """Phonon hopping mediated by the optical modes, to second order in ``g``."""
    d, j, w = p.delta, p.j_opt, p.omega
    factors = {
        "(-Delta + J - Omega)": -d + j - w,
        "(Delta + J - Omega)": d + j - w,
        "(-Delta + J + Omega)": -d + j + w,
        "(Delta + J + Omega)": d + j + w,
    }
    for name, value in factors.items():
        if value == 0:
            raise ValueError(f"resonant denominator: factor {name} vanishes")
    denom = np.prod(list(factors.values()))
    return float(2.0 * p.g**2 * j * (-d**2 + j**2 - w**2) / denom)


class EdgeStates(NamedTuple):
    left: np.ndarray
    right: np.ndarray
    topological: bool


def _project_site(pair: np.ndarray, site: int) -> np.ndarray:
    # component of e_site inside span(pair), normalised, positive on that site
    v = pair @ pair[site]
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError(f"site {site} has no weight on the two lowest-|E| states")
    v = v / norm
    return v if v[site] >= 0 else -v


def edge_states(spec: SSHSpectrum) -> EdgeStates:
    """Left and right edge modes from the two smallest-``|E|`` eigenvectors.

    ``topological`` is False when ``lambda <= 1``; the states are then the
    same construction but delocalised.
    """
    order = np.argsort(np.abs(spec.eigenvalues), kind="stable")[:2]
    pair = spec.eigenvectors[:, np.sort(order)]
    n = spec.eigenvectors.shape[0]
    if n == 1:
        raise ValueError("need at least two sites")
    return EdgeStates(_project_site(pair, 0), _project_site(pair, n - 1), bool(spec.params.lam > 1))


def group_velocity(p: SSHParams) -> float:
    """Largest bulk group velocity, in cells per unit time: ``min(K, K_p)``."""
    return float(min(abs(p.k_intra), abs(p.k_inter)))


def arrival_time(p: SSHParams) -> float:
    """Time for the fastest bulk wave packet to cross the chain."""
    v = group_velocity(p)
    if v == 0:
        return np.inf
    return p.n_cells / v


@dataclass(frozen=True)
class EdgeQuenchResult:
    """Site occupations after a sudden change of the hoppings.

    ``site_occupation`` has shape ``(n_sites, n_t)``. ``rightmost`` is the
    occupation of the last site, ``survival`` the return probability
    ``|<psi(0)|psi(t)>|^2``, and ``right_edge`` the weight on the initial
    Hamiltonian's right edge state.
    """

    times: np.ndarray
    site_occupation: np.ndarray
    rightmost: np.ndarray
    survival: np.ndarray
    right_edge: np.ndarray

    @property
    def norm(self) -> np.ndarray:
        return self.site_occupation.sum(axis=0)


def evolve_state(h: EigenSystem, psi0: np.ndarray, times) -> np.ndarray:
    """``psi(t) = V exp(-i E t) V^T psi0`` for each time; shape ``(n_sites, n_t)``."""
    vals, vecs = h
    coeff = vecs.T @ psi0
    phases = np.exp(-1j * np.outer(vals, np.asarray(times, dtype=float)))
    return vecs @ (coeff[:, None] * phases)


def quench_edge_state(p_initial: SSHParams, p_final: SSHParams | None = None, t_max: float | None = None,
                      n_samples: int = 201) -> EdgeQuenchResult:
    """Start in the left edge state of ``p_initial`` and evolve under ``p_final``.

    ``p_final`` defaults to ``p_initial`` with the two hoppings swapped;
    ``t_max`` defaults to three arrival times.
    """
    if p_final is None:
        p_final = p_initial.swapped()
    if p_final.n_cells != p_initial.n_cells:
        raise ValueError("initial and final chains differ in length")
    if not p_initial.lam > 1:
        raise ValueError(f"initial chain is not topological (lambda = {p_initial.lam})")
    if n_samples < 2:
        raise ValueError("need at least two samples")
    if t_max is None:
        t_max = 3.0 * arrival_time(p_final)
    if not np.isfinite(t_max) or t_max <= 0:
        raise ValueError(f"t_max must be positive and finite, got {t_max}")

    edges = edge_states(ssh_spectrum(p_initial))
    psi0 = edges.left
    times = np.linspace(0.0, t_max, n_samples)
    psi = evolve_state(eig_symmetric(build_ssh(p_final)), psi0, times)
    occ = np.abs(psi) ** 2
    return EdgeQuenchResult(
        times=times,
        site_occupation=occ,
        rightmost=occ[-1],
        survival=np.abs(psi0 @ psi) ** 2,
        right_edge=np.abs(edges.right @ psi) ** 2,
    )
