"""Brute-force reference: solve the real-space transport equations directly.

Every atom contributes three unknowns (right-going amplitude after it,
left-going amplitude before it, scaled excitation).  All cells are
stacked into one dense system, so nothing here shares code with the
transfer-matrix path except the configuration and phase delays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import SingularSystem
from .model import ChainConfig, PhaseMode, intra_cell_phases, phase_delays

MAX_UNKNOWN_ATOMS = 1000


@dataclass(frozen=True)
class TransportSolution:
    t_cells: np.ndarray  # (M, N) right-going amplitude just after atom (m, s)
    r_cells: np.ndarray  # (M, N) left-going amplitude just before atom (m, s)
    f_cells: np.ndarray  # (M, N) scaled atomic excitation amplitude
    t: complex
    r: complex
    delta: float


def _atom_phases(config: ChainConfig, delta: float) -> np.ndarray:
    alpha, beta = phase_delays(config, delta)
    m = np.arange(config.cells)[:, None]
    return m * beta + intra_cell_phases(config.atoms_per_cell, alpha)[None, :]


def direct_solve(config: ChainConfig, delta: float) -> TransportSolution:
    M, N = config.cells, config.atoms_per_cell
    if M * N > MAX_UNKNOWN_ATOMS:
        raise ValueError(f"M*N={M * N} exceeds the dense-solve budget of {MAX_UNKNOWN_ATOMS} atoms")
    g = math.sqrt(config.gamma / 2)
    J = config.couplings
    phi = _atom_phases(config, delta)
    size = 3 * M * N
    A = np.zeros((size, size), dtype=complex)
    b = np.zeros(size, dtype=complex)

    def it(m, s):
        return 3 * (m * N + s)

    def ir(m, s):
        return 3 * (m * N + s) + 1

    def jf(m, s):
        return 3 * (m * N + s) + 2

    for m in range(M):
        for s in range(N):
            e = np.exp(1j * phi[m, s])
            row_t, row_r, row_f = it(m, s), ir(m, s), jf(m, s)
            # amplitude entering from the left: previous atom, previous cell, or the unit input
            prev_t = it(m, s - 1) if s > 0 else (it(m - 1, N - 1) if m > 0 else None)
            # amplitude entering from the right: next atom, next cell, or nothing
            next_r = ir(m, s + 1) if s < N - 1 else (ir(m + 1, 0) if m < M - 1 else None)

            A[row_t, it(m, s)] += 1
            A[row_t, jf(m, s)] += 1j * g / e
            if prev_t is None:
                b[row_t] += 1
            else:
                A[row_t, prev_t] -= 1

            A[row_r, ir(m, s)] -= 1
            A[row_r, jf(m, s)] -= 1j * g * e
            if next_r is not None:
                A[row_r, next_r] += 1

            A[row_f, jf(m, s)] -= delta
            if s > 0:
                A[row_f, jf(m, s - 1)] += J[s - 1]
            if s < N - 1:
                A[row_f, jf(m, s + 1)] += J[s]
            A[row_f, it(m, s)] += 0.5 * g * e
            if prev_t is None:
                b[row_f] -= 0.5 * g * e
            else:
                A[row_f, prev_t] += 0.5 * g * e
            A[row_f, ir(m, s)] += 0.5 * g / e
            if next_r is not None:
                A[row_f, next_r] += 0.5 * g / e

    try:
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SingularSystem(f"transport system singular at Delta={delta!r}") from exc
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= 1e-14 * pivots.max():
        raise SingularSystem(f"transport system singular at Delta={delta!r}")
    x = scipy.linalg.lu_solve((lu, piv), b, check_finite=False).reshape(M, N, 3)
    return TransportSolution(
        t_cells=x[:, :, 0].copy(),
        r_cells=x[:, :, 1].copy(),
        f_cells=x[:, :, 2].copy(),
        t=complex(x[-1, -1, 0]),
        r=complex(x[0, 0, 1]),
        delta=float(delta),
    )


def residual_check(config: ChainConfig, delta: float, sol: TransportSolution) -> float:
    """Largest absolute residual of the transport equations evaluated on ``sol``."""
    M, N = config.cells, config.atoms_per_cell
    g = math.sqrt(config.gamma / 2)
    J = config.couplings
    phi = _atom_phases(config, delta)
    t, r, f = sol.t_cells, sol.r_cells, sol.f_cells
    # pad with boundary values: t before the first atom is 1, r after the last is 0
    t_flat = np.concatenate([[1.0 + 0j], t.ravel()])
    r_flat = np.concatenate([r.ravel(), [0j]])
    f_flat = f.ravel()
    phi_flat = phi.ravel()
    worst = 0.0
    for n in range(M * N):
        s = n % N
        e = np.exp(1j * phi_flat[n])
        t_in, t_out = t_flat[n], t_flat[n + 1]
        r_out, r_in = r_flat[n], r_flat[n + 1]
        eq_a = t_out - t_in + 1j * g * f_flat[n] / e
        eq_b = r_in - r_out - 1j * g * f_flat[n] * e
        eq_c = -delta * f_flat[n] + 0.5 * g * ((t_out + t_in) * e + (r_in + r_out) / e)
        if s > 0:
            eq_c += J[s - 1] * f_flat[n - 1]
        if s < N - 1:
            eq_c += J[s] * f_flat[n + 1]
        worst = max(worst, abs(eq_a), abs(eq_b), abs(eq_c))
    return float(worst)


def random_config(rng: np.random.Generator, max_cells: int = 8, max_atoms: int = 4,
                  coupling_range: float = 3.0, phase_mode=None) -> ChainConfig:
    """Draw a valid configuration: J uniform in +-coupling_range, phases in (0, 4 pi)."""
    cells = int(rng.integers(1, max_cells + 1))
    n = int(rng.integers(1, max_atoms + 1))
    while True:
        alpha0, beta0 = rng.uniform(0.0, 4 * math.pi, size=2)
        if n == 1 or (n - 1) * alpha0 < beta0:
            break
    if phase_mode is None:
        phase_mode = PhaseMode.FULL if rng.random() < 0.5 else PhaseMode.MARKOV
    return ChainConfig(cells=cells, atoms_per_cell=n,
                       couplings=tuple(rng.uniform(-coupling_range, coupling_range, n - 1)),
                       alpha0=float(alpha0), beta0=float(beta0), phase_mode=phase_mode)
