"""Collective modes of the whole chain and the Lorentzian expansion of (t, r).

In the Markov regime the chain Hamiltonian is Delta-independent, so

    t(Delta) = 1 + sum_j c_j / (Delta - lambda_j),
    r(Delta) =     sum_j d_j / (Delta - lambda_j),

with lambda_j = Dt_j - i Gt_j / 2 the complex collective eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateSpectrum
from .model import ChainConfig, PhaseMode, coupled_operator, intra_cell_phases

DEGENERACY_RTOL = 1e-9
TIE_TOL = 1e-10


@dataclass(frozen=True)
class ChainHamiltonian:
    h: np.ndarray
    w: np.ndarray
    phases: np.ndarray
    gamma: float

    @property
    def size(self) -> int:
        return self.w.size


@dataclass(frozen=True)
class ModeSpectrum:
    eigenvalues: np.ndarray
    c: np.ndarray
    d: np.ndarray
    right: np.ndarray | None = None  # columns U_j^R
    left: np.ndarray | None = None   # columns U_j^L, (U^L)^dagger U^R = I
    gamma: float = 1.0

    @property
    def shifts(self) -> np.ndarray:
        return self.eigenvalues.real

    @property
    def widths(self) -> np.ndarray:
        return -2.0 * self.eigenvalues.imag

    def __len__(self):
        return self.eigenvalues.size


def build_chain_hamiltonian(config: ChainConfig) -> ChainHamiltonian:
    """Full M*N-atom effective Hamiltonian; cells are coupled only through the waveguide."""
    if config.phase_mode is not PhaseMode.MARKOV:
        raise ValueError("the collective-mode expansion needs Delta-independent phases (Markov mode)")
    M, N = config.cells, config.atoms_per_cell
    phases = (np.arange(M)[:, None] * config.beta0 + intra_cell_phases(N, config.alpha0)[None, :]).ravel()
    bonds = np.tile(np.append(np.asarray(config.couplings, dtype=float), 0.0), M)[:-1]
    h = coupled_operator(phases, bonds, config.gamma)
    w = np.sqrt(config.gamma / 2) * np.exp(1j * phases)
    return ChainHamiltonian(h=h, w=w, phases=phases, gamma=config.gamma)


def _order(lam):
    return np.lexsort((lam.imag, lam.real))


def eigendecompose_biorthogonal(ham: ChainHamiltonian) -> ModeSpectrum:
    """Right/left eigenvectors normalised so that (U^L)^dagger U^R = I."""
    h = ham.h
    lam, ul, ur = scipy.linalg.eig(h, left=True, right=True)
    n = lam.size
    if n > 1:
        gaps = np.abs(lam[:, None] - lam[None, :]) + np.diag(np.full(n, np.inf))
        min_gap = float(gaps.min())
        if min_gap < DEGENERACY_RTOL * np.linalg.norm(h, 2):
            raise DegenerateSpectrum(
                f"eigenvalues {min_gap:.3e} apart; perturb the couplings by ~1e-7 gamma", min_gap=min_gap)
    idx = _order(lam)
    lam, ul, ur = lam[idx], ul[:, idx], ur[:, idx]
    ur = ur / np.linalg.norm(ur, axis=0)
    ul = ul / np.einsum("ij,ij->j", ul.conj(), ur).conj()
    return ModeSpectrum(eigenvalues=lam, c=np.zeros(n, complex), d=np.zeros(n, complex),
                        right=ur, left=ul, gamma=ham.gamma)


def lorentzian_decomposition(config: ChainConfig) -> ModeSpectrum:
    """Eigenvalues plus residues c_j, d_j of the transmission and reflection amplitudes."""
    ham = build_chain_hamiltonian(config)
    spec = eigendecompose_biorthogonal(ham)
    w = ham.w
    proj = spec.left.conj().T @ w             # (U_j^L)^dagger W
    c = -1j * (w.conj() @ spec.right) * proj  # W^dagger U_j^R
    d = -1j * (w @ spec.right) * proj         # W^T U_j^R
    return ModeSpectrum(eigenvalues=spec.eigenvalues, c=c, d=d,
                        right=spec.right, left=spec.left, gamma=ham.gamma)


def mode_components(modes: ModeSpectrum, deltas) -> np.ndarray:
    """Per-mode reflection terms d_j / (Delta - lambda_j), shape (len(deltas), n_modes)."""
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    return modes.d[None, :] / (deltas[:, None] - modes.eigenvalues[None, :])


def reconstruct_amplitudes(modes: ModeSpectrum, delta: float) -> tuple[complex, complex]:
    den = delta - modes.eigenvalues
    return complex(1.0 + np.sum(modes.c / den)), complex(np.sum(modes.d / den))


def subradiant_metrics(modes: ModeSpectrum) -> tuple[float, float]:
    """Narrowest decay width and the detuning spread of the two narrowest modes."""
    if len(modes) < 2:
        raise ValueError("need at least two modes")
    g = modes.widths
    shift = modes.shifts
    # sort by width, then prefer modes nearest the origin among near-ties
    key = np.round((g - g.min()) / TIE_TOL)
    idx = np.lexsort((np.abs(shift), key))
    a, b = idx[0], idx[1]
    return float(g[a]), float(abs(shift[a] - shift[b]))
