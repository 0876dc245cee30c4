"""Chain configuration, phase delays and per-cell effective operators.

Energies are measured in units of the waveguide decay rate ``gamma`` (the
default ``gamma=1`` makes every number directly a multiple of Gamma).  Only
dimensionless phase delays enter; atom positions are never materialised.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class PhaseMode(str, enum.Enum):
    MARKOV = "markov"
    FULL = "full"

    @classmethod
    def parse(cls, value) -> "PhaseMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"phase_mode must be 'markov' or 'full', got {value!r}") from None


@dataclass(frozen=True)
class ChainConfig:
    """Physical description of M identical N-atom polymers on a waveguide.

    ``couplings`` holds the N-1 intra-cell nearest-neighbour couplings.
    ``alpha0`` / ``beta0`` are the resonant intra- and inter-cell phase
    delays in radians.
    """

    cells: int
    atoms_per_cell: int
    couplings: tuple = ()
    alpha0: float = 0.0
    beta0: float = math.pi
    gamma: float = 1.0
    omega_a: float = 1.0e4
    phase_mode: PhaseMode = PhaseMode.MARKOV

    def __post_init__(self):
        object.__setattr__(self, "couplings", tuple(float(j) for j in np.ravel(np.asarray(self.couplings, dtype=float))))
        object.__setattr__(self, "phase_mode", PhaseMode.parse(self.phase_mode))
        if int(self.cells) != self.cells or self.cells < 1:
            raise ValueError(f"cells must be a positive integer, got {self.cells!r}")
        if int(self.atoms_per_cell) != self.atoms_per_cell or self.atoms_per_cell < 1:
            raise ValueError(f"atoms_per_cell must be a positive integer, got {self.atoms_per_cell!r}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.omega_a > 0:
            raise ValueError("omega_a must be positive")
        if len(self.couplings) != self.atoms_per_cell - 1:
            raise ValueError(
                f"expected {self.atoms_per_cell - 1} couplings for N={self.atoms_per_cell}, "
                f"got {len(self.couplings)}")
        if self.atoms_per_cell >= 2 and not (self.atoms_per_cell - 1) * self.alpha0 < self.beta0:
            raise ValueError("(N-1)*alpha0 must be smaller than beta0: atoms of a cell must fit in one period")

    @property
    def n_atoms(self) -> int:
        return self.cells * self.atoms_per_cell

    def with_(self, **changes) -> "ChainConfig":
        """Copy with some fields replaced."""
        from dataclasses import replace
        return replace(self, **changes)

    @classmethod
    def dimer(cls, cells, J, alpha0, beta0, **kw) -> "ChainConfig":
        return cls(cells=cells, atoms_per_cell=2, couplings=(J,), alpha0=alpha0, beta0=beta0, **kw)

    @classmethod
    def tetramer(cls, cells, J, eta, alpha0=math.pi / 2, beta0=2 * math.pi, **kw) -> "ChainConfig":
        return cls(cells=cells, atoms_per_cell=4, couplings=(J, eta * J, J), alpha0=alpha0, beta0=beta0, **kw)


@dataclass(frozen=True)
class CellOperator:
    h_c: np.ndarray
    v: np.ndarray
    phases: np.ndarray


@dataclass(frozen=True)
class MarkovReport:
    bound_generic: float
    condition_b1_ok: bool
    condition_b2_ok: bool
    epsilon: float = 0.01


def phase_delays(config: ChainConfig, delta: float) -> tuple[float, float]:
    """Return (alpha, beta) at detuning ``delta``."""
    if config.phase_mode is PhaseMode.MARKOV:
        return config.alpha0, config.beta0
    scale = 1.0 + delta / config.omega_a
    return scale * config.alpha0, scale * config.beta0


def intra_cell_phases(n: int, alpha: float) -> np.ndarray:
    # centred on the cell reference point
    s = np.arange(1, n + 1)
    return (s - (n + 1) / 2.0) * alpha


def coupled_operator(phases: np.ndarray, bonds: np.ndarray, gamma: float) -> np.ndarray:
    """Effective non-Hermitian Hamiltonian for atoms at the given phases.

    ``bonds[k]`` couples atom k and k+1 directly.
    """
    dphi = np.abs(phases[:, None] - phases[None, :])
    h = -0.5j * gamma * np.exp(1j * dphi)
    k = np.arange(len(bonds))
    h[k, k + 1] += bonds
    h[k + 1, k] += bonds
    return h


def build_cell_operator(config: ChainConfig, delta: float) -> CellOperator:
    alpha, _ = phase_delays(config, delta)
    phases = intra_cell_phases(config.atoms_per_cell, alpha)
    h = coupled_operator(phases, np.asarray(config.couplings, dtype=float), config.gamma)
    v = math.sqrt(config.gamma / 2.0) * np.exp(1j * phases)
    return CellOperator(h_c=h, v=v, phases=phases)


def markov_check(config: ChainConfig, epsilon: float = 0.01, delta_scale: float | None = None) -> MarkovReport:
    """Evaluate the two Markov-validity inequalities with "much less" read as a factor ``epsilon``.

    The first bounds chains probed at detunings of order Gamma, the second
    the Bragg/Bragg case where the relevant detuning grows like M*Gamma.
    """
    if delta_scale is None:
        delta_scale = config.gamma
    ratio = config.omega_a / config.gamma
    return MarkovReport(
        bound_generic=config.cells * config.beta0 * delta_scale / config.omega_a,
        condition_b1_ok=bool(config.cells < epsilon * ratio),
        condition_b2_ok=bool(config.cells < epsilon * math.sqrt(ratio)),
        epsilon=epsilon,
    )
