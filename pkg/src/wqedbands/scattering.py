"""Single-photon scattering through a periodic polymer chain.

Each cell is reduced to a 2x2 unimodular transfer matrix; the M-fold
product is evaluated with Chebyshev polynomials of the second kind, which
keeps the cost independent of M and avoids repeated multiplication.
"""

from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DivisionByZeroTransmission, NearSingular
from .model import ChainConfig, CellOperator, PhaseMode, build_cell_operator, phase_delays, intra_cell_phases, coupled_operator

SINGULAR_RTOL = 1e-13
# t~ = 1 - i V^dagger x cancels O(1) terms; below this it is indistinguishable from 0
T_ZERO = 8 * np.finfo(float).eps
# half-width of the band around |y| = 1 where U_m is evaluated by Taylor series
_EDGE_BAND = 1e-8


@dataclass(frozen=True)
class Transfer2:
    m11: complex
    m12: complex
    m21: complex
    m22: complex

    @classmethod
    def from_array(cls, a) -> "Transfer2":
        return cls(complex(a[0, 0]), complex(a[0, 1]), complex(a[1, 0]), complex(a[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]], dtype=complex)

    @property
    def det(self) -> complex:
        return self.m11 * self.m22 - self.m12 * self.m21

    @property
    def half_trace(self) -> complex:
        return 0.5 * (self.m11 + self.m22)

    def __matmul__(self, other: "Transfer2") -> "Transfer2":
        return Transfer2.from_array(self.as_array() @ other.as_array())


@dataclass(frozen=True)
class SpectrumSample:
    delta: float
    T: float
    R: float
    y: float
    zeta: float


@dataclass(frozen=True)
class DetuningGrid:
    """Uniform detuning grid, inclusive of both ends."""

    dmin: float
    dmax: float
    points: int

    def __post_init__(self):
        if self.points < 1:
            raise ValueError("grid must contain at least one point")
        if self.points > 1 and not self.dmax > self.dmin:
            raise ValueError("grid requires dmax > dmin")

    def values(self) -> np.ndarray:
        if self.points == 1:
            return np.array([float(self.dmin)])
        return np.linspace(self.dmin, self.dmax, self.points)


def _as_grid(grid) -> np.ndarray:
    values = grid.values() if isinstance(grid, DetuningGrid) else np.asarray(grid, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("grid must contain at least one point")
    if np.any(np.diff(values) <= 0):
        raise ValueError("grid must be strictly increasing")
    return values


# -- single cell -------------------------------------------------------------

def _is_near_singular(a: np.ndarray) -> tuple[bool, float]:
    sv = np.linalg.svd(a, compute_uv=False)
    det = float(np.prod(sv))
    return det < SINGULAR_RTOL * sv[0] ** a.shape[0], det


def single_cell_amplitudes(cell: CellOperator, delta: float, on_singular: str = "raise") -> tuple[complex, complex]:
    """Transmission and reflection amplitudes (t~, r~) of one isolated cell.

    ``on_singular="lstsq"`` resolves an exactly dark collective state by a
    minimum-norm solve instead of raising :class:`NearSingular`; dark
    states do not couple to the drive, so the amplitudes stay finite.
    """
    n = len(cell.v)
    a = delta * np.eye(n) - cell.h_c
    singular, det = _is_near_singular(a)
    if singular:
        if on_singular == "raise":
            raise NearSingular(delta, det)
        x = np.linalg.lstsq(a, cell.v, rcond=None)[0]
    else:
        x = np.linalg.solve(a, cell.v)
    t = complex(1.0 - 1j * np.vdot(cell.v, x))
    r = complex(-1j * np.dot(cell.v, x))
    return (0j if abs(t) < T_ZERO else t), r


def cell_amplitudes_array(config: ChainConfig, deltas) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised (t~, r~, beta) over an array of detunings."""
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    n = config.atoms_per_cell
    h, v, beta = _cell_matrices(config, deltas)
    a = deltas[:, None, None] * np.eye(n) - h
    sv = np.linalg.svd(a, compute_uv=False)
    singular = np.prod(sv, axis=1) < SINGULAR_RTOL * sv[:, 0] ** n
    x = np.empty((deltas.size, n), dtype=complex)
    ok = ~singular
    if ok.any():
        x[ok] = np.linalg.solve(a[ok], v[ok][..., None])[..., 0]
    for k in np.flatnonzero(singular):
        x[k] = np.linalg.lstsq(a[k], v[k], rcond=None)[0]
    t = 1.0 - 1j * np.einsum("ki,ki->k", v.conj(), x)
    r = -1j * np.einsum("ki,ki->k", v, x)
    t[np.abs(t) < T_ZERO] = 0
    return t, r, beta


def cell_transfer_matrix(t: complex, r: complex) -> Transfer2:
    """Transfer matrix of a reciprocal lossless cell from its amplitudes."""
    if t == 0:
        raise DivisionByZeroTransmission("cell transmission is zero; transfer matrix undefined")
    tc = t.conjugate()
    return Transfer2(1 / t, r.conjugate() / tc, r / t, 1 / tc)


def dressed_transfer_matrix(t: complex, r: complex, beta: float) -> Transfer2:
    """Cell matrix followed by free propagation over one period."""
    m = cell_transfer_matrix(t, r)
    eb = cmath.exp(1j * beta)
    return Transfer2(m.m11 / eb, m.m12 * eb, m.m21 / eb, m.m22 * eb)


def _cell(config: ChainConfig, delta: float, regularize: bool):
    cell = build_cell_operator(config, delta)
    t, r = single_cell_amplitudes(cell, delta, on_singular="lstsq" if regularize else "raise")
    _, beta = phase_delays(config, delta)
    return t, r, beta


def chain_transfer_params(config: ChainConfig, delta: float, regularize: bool = False) -> tuple[float, float]:
    """Half-trace ``y`` and off-diagonal weight ``zeta`` of the dressed cell matrix."""
    t, r, beta = _cell(config, delta, regularize)
    if t == 0:
        raise DivisionByZeroTransmission(f"zero cell transmission at Delta={delta!r}; zeta diverges")
    ratio = abs(r / t)
    return (cmath.exp(-1j * beta) / t).real, ratio * ratio


def _cell_matrices(config: ChainConfig, deltas: np.ndarray):
    """Batched (H_c, V, beta) for each detuning."""
    n = config.atoms_per_cell
    bonds = np.asarray(config.couplings, dtype=float)
    if config.phase_mode is PhaseMode.MARKOV:
        phases = intra_cell_phases(n, config.alpha0)
        h = np.broadcast_to(coupled_operator(phases, bonds, config.gamma), (deltas.size, n, n))
        v = np.broadcast_to(np.sqrt(config.gamma / 2) * np.exp(1j * phases), (deltas.size, n))
        return h, v, np.full(deltas.size, config.beta0)
    scale = 1.0 + deltas / config.omega_a
    h = np.empty((deltas.size, n, n), dtype=complex)
    v = np.empty((deltas.size, n), dtype=complex)
    for k, s in enumerate(scale):
        phases = intra_cell_phases(n, s * config.alpha0)
        h[k] = coupled_operator(phases, bonds, config.gamma)
        v[k] = np.sqrt(config.gamma / 2) * np.exp(1j * phases)
    return h, v, scale * config.beta0


def half_trace_array(config: ChainConfig, deltas) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Numerator, denominator and absolute rounding floor of ``y = P / Q``.

    t~ = det(Delta - K) / det(Delta - H_c) where K = H_c + i V V^dagger is a
    real matrix, so y = Re(e^{-i beta} det(Delta - H_c)) / det(Delta - K).
    Unlike Re(e^{-i beta} / t~) both factors stay O(1) next to the zeros of
    t~, so poles and removable singularities of y are resolved cleanly.
    """
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    n = config.atoms_per_cell
    h, v, beta = _cell_matrices(config, deltas)
    eye = np.eye(n)
    a = deltas[:, None, None] * eye - h
    k = (a - 1j * v[:, :, None] * v.conj()[:, None, :]).real
    numer = (np.exp(-1j * beta) * np.linalg.det(a)).real
    size = np.maximum(np.linalg.norm(a, axis=(1, 2)), np.linalg.norm(k, axis=(1, 2)))
    floor = 4 * n * np.finfo(float).eps * size ** n
    return numer, np.linalg.det(k), floor


def gap_margin_array(config: ChainConfig, deltas, tol: float = 1e-10) -> np.ndarray:
    """Signed, normalised ``|y| - 1 - tol``; positive means no Bloch mode.

    ``|P|`` must beat ``|Q|`` by more than the determinant rounding floor,
    so 0/0 points and curves with |y| pinned at 1 never register as gaps.
    """
    p, q, floor = half_trace_array(config, deltas)
    p, q = np.abs(p), np.abs(q)
    return (p - (1.0 + tol) * q - floor) / np.maximum(np.maximum(p, q), floor)


def transfer_params_array(config: ChainConfig, deltas) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``(y, zeta)``; zero-transmission points give ``inf``."""
    t, r, beta = cell_amplitudes_array(config, deltas)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.where(t == 0, np.inf, (np.exp(-1j * beta) / t).real)
        zeta = np.where(t == 0, np.inf, np.abs(r / t) ** 2)
    return y, zeta


# -- Chebyshev polynomials of the second kind --------------------------------

def _edge_derivatives(m: int) -> list[float]:
    # d^k U_m / dy^k at y = 1, k = 0..3
    out = []
    prod = 1.0
    for k in range(4):
        prod *= ((m + 1) ** 2 - k * k) / (2 * k + 1)
        out.append(prod / (m + 1))
    return out


def chebyshev_u(m: int, y: float) -> float:
    """U_m(y) for any real y.

    Trigonometric form inside (-1, 1), hyperbolic form outside, and a cubic
    Taylor expansion within 1e-8 of |y| = 1.  Overflow returns +-inf.
    """
    if m == -1:
        return 0.0
    if m < -1:
        return -chebyshev_u(-m - 2, y)
    if m == 0:
        return 1.0
    a = abs(y)
    sign = -1.0 if (y < 0 and m % 2) else 1.0
    if a < 1 - _EDGE_BAND:
        theta = math.acos(y)
        return math.sin((m + 1) * theta) / math.sin(theta)
    if a > 1 + _EDGE_BAND:
        if math.isinf(a):
            return sign * math.inf
        mu = math.acosh(a)
        try:
            growth = math.exp(m * mu)
        except OverflowError:
            return sign * math.inf
        return sign * growth * math.expm1(-2 * (m + 1) * mu) / math.expm1(-2 * mu)
    eps = a - 1
    d = _edge_derivatives(m)
    return sign * (d[0] + eps * (d[1] + eps * (d[2] / 2 + eps * d[3] / 6)))


def _chebyshev_ratio(m: int, y: float) -> float:
    """U_{m-1}(y) / U_m(y), stable where U_m overflows."""
    a = abs(y)
    if a > 1 + _EDGE_BAND:
        if math.isinf(a):
            return 0.0
        mu = math.acosh(a)
        ratio = math.exp(-mu) * math.expm1(-2 * m * mu) / math.expm1(-2 * (m + 1) * mu)
        return math.copysign(ratio, y)
    return chebyshev_u(m - 1, y) / chebyshev_u(m, y)


# -- chain ---------------------------------------------------------------------

def _split(zu2: float) -> tuple[float, float]:
    if zu2 > 1:
        inv = 1.0 / zu2
        return inv / (1 + inv), 1 / (1 + inv)
    return 1 / (1 + zu2), zu2 / (1 + zu2)


def transmittance_reflectance(config: ChainConfig, delta: float) -> SpectrumSample:
    t, r, beta = _cell(config, delta, regularize=True)
    if t == 0:
        return SpectrumSample(float(delta), 0.0, 1.0, math.inf, math.inf)
    y = (cmath.exp(-1j * beta) / t).real
    zeta = abs(r / t) * abs(r / t)
    u = chebyshev_u(config.cells - 1, y)
    x = abs(r) / abs(t) * abs(u)
    zu2 = x * x  # float ** raises on overflow, * saturates to inf
    T, R = _split(zu2)
    return SpectrumSample(float(delta), T, R, y, zeta)


def chain_amplitudes(config: ChainConfig, delta: float) -> tuple[complex, complex]:
    """Complex transmission and reflection amplitudes of the whole chain."""
    t1, r1, beta = _cell(config, delta, regularize=True)
    if t1 == 0:
        # the first cell already reflects everything
        return 0j, r1
    M = config.cells
    eb = cmath.exp(-1j * beta)
    m11 = eb / t1
    m21 = r1 * eb / t1
    y = m11.real
    u1 = chebyshev_u(M - 1, y)
    phase = cmath.exp(-1j * M * beta)
    if abs(u1) > 1:
        reduced = m11 - _chebyshev_ratio(M - 1, y)
        t = 0j if math.isinf(u1) else phase / (u1 * reduced)
        return t, m21 / reduced
    d = m11 * u1 - chebyshev_u(M - 2, y)
    return phase / d, m21 * u1 / d


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("WQED_THREADS", "1")))
    except ValueError:
        return 1


def spectrum_sweep(config: ChainConfig, grid, workers: int | None = None) -> list[SpectrumSample]:
    deltas = _as_grid(grid)
    workers = workers or _default_workers()
    if workers == 1:
        return [transmittance_reflectance(config, d) for d in deltas]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda d: transmittance_reflectance(config, d), deltas))


def _bisect(func, lo, hi, f_lo, tol=0.0, maxiter=200):
    # plain bisection down to floating-point resolution
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= tol:
            break
        f_mid = func(mid)
        if f_mid == 0:
            return mid, mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return lo, hi


def zero_reflection_points(config: ChainConfig, interval, scan_points: int = 4001) -> list[float]:
    """Detunings in ``interval`` where y(Delta) = cos(l pi / M), l = 1..M-1.

    These are the zeros of U_{M-1}(y) and hence of the reflectance.
    """
    if config.phase_mode is not PhaseMode.MARKOV:
        raise ValueError("zero_reflection_points requires Markov phase mode")
    lo, hi = map(float, interval)
    if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
        raise ValueError("interval must be finite with hi > lo")
    M = config.cells
    grid = np.linspace(lo, hi, scan_points)
    y_grid, _ = transfer_params_array(config, grid)

    def y_at(d):
        return float(transfer_params_array(config, [d])[0][0])

    roots = []
    for l in range(1, M):
        target = math.cos(l * math.pi / M)
        g = y_grid - target
        for k in range(scan_points - 1):
            ga, gb = g[k], g[k + 1]
            if not (np.isfinite(ga) and np.isfinite(gb)):
                continue
            if ga == 0:
                cand = grid[k]
            elif ga * gb < 0:
                a, b = _bisect(lambda d: y_at(d) - target, grid[k], grid[k + 1], ga)
                cand = 0.5 * (a + b)
            else:
                continue
            # a sign flip across a pole of y is not a root
            if abs(y_at(cand) - target) > 1e-6:
                continue
            if transmittance_reflectance(config, cand).R < 1e-10:
                roots.append(float(cand))
        if g[-1] == 0 and transmittance_reflectance(config, grid[-1]).R < 1e-10:
            roots.append(float(grid[-1]))
    return sorted(set(roots))
