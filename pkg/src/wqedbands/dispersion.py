"""Bloch dispersion cos(qL) = y(Delta) inside passbands.

Only the principal branch qL in [0, pi] is stored; -q follows by symmetry.
Group velocities are dDelta/d(qL) in units of gamma (i.e. v_g / (gamma L)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AtBandEdge, BandContainsGap
from .model import ChainConfig, PhaseMode
from .scattering import gap_margin_array, half_trace_array

# |y| may overshoot 1 by this much and still count as propagating
Y_TOL = 1e-10
# extremum of qL this close to 0 or pi inside a stencil is treated as a fold
FOLD_WINDOW = 0.1


@dataclass(frozen=True)
class DispersionCurve:
    config: ChainConfig
    band: tuple
    band_index: int
    delta: np.ndarray
    qL: np.ndarray
    group_velocity: np.ndarray  # nan where the stencil leaves the band
    monotonic: bool
    step: float

    def __len__(self):
        return self.delta.size


def _require_markov(config):
    if config.phase_mode is not PhaseMode.MARKOV:
        raise ValueError("dispersion is defined in the Markov phase mode only")


def _y(config, deltas):
    p, q, _ = half_trace_array(config, deltas)
    with np.errstate(divide="ignore", invalid="ignore"):
        return p / q


def _q(config, deltas):
    """qL on the principal branch, nan inside gaps."""
    y = _y(config, np.asarray(deltas, dtype=float))
    q = np.arccos(np.clip(y, -1.0, 1.0))
    q[~(np.abs(y) <= 1.0 + Y_TOL)] = np.nan
    return q


def bloch_q(config: ChainConfig, delta: float) -> float | None:
    """arccos(y(Delta)) in [0, pi], or None when Delta lies in a gap."""
    _require_markov(config)
    q = _q(config, [delta])[0]
    return None if math.isnan(q) else float(q)


def stencil_step(band) -> float:
    lo, hi = band
    return max(1e-4, (hi - lo) / 1e3)


def _slopes(config, deltas, h, lo, hi):
    deltas = np.asarray(deltas, dtype=float)
    qm, q0, qp = (_q(config, deltas + s) for s in (-h, 0.0, h))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 2 * h / (qp - qm)

    # a closed gap inside the stencil: |Delta - Delta_f| = v |q| on both sides,
    # so q_- + q_+ = 2h / v wherever the fold sits in (Delta - h, Delta + h)
    bent = (qp - q0) * (q0 - qm) <= 0
    low = bent & (np.fmin(np.fmin(qm, qp), q0) < FOLD_WINDOW)
    high = bent & (np.fmax(np.fmax(qm, qp), q0) > math.pi - FOLD_WINDOW)
    with np.errstate(divide="ignore"):
        out[low] = 2 * h / (qm[low] + qp[low])
        out[high] = 2 * h / (2 * math.pi - qm[high] - qp[high])

    outside = (deltas - h < lo) | (deltas + h > hi) | np.isnan(qm) | np.isnan(qp)
    out[outside] = np.nan
    return out


def dispersion_curve(config: ChainConfig, band, resolution: float, band_index: int = 0) -> DispersionCurve:
    """Sample the branch over a passband ``band = (lo, hi)`` with spacing <= resolution."""
    _require_markov(config)
    lo, hi = map(float, band)
    if not hi > lo:
        raise ValueError("band must satisfy hi > lo")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    n = max(int(math.ceil((hi - lo) / resolution)) + 1, 3)
    d = np.linspace(lo, hi, n)
    y = _y(config, d)
    # endpoints come from bisected gap edges and may sit a hair inside a gap
    margin = gap_margin_array(config, d[1:-1], Y_TOL)
    if np.any(margin > 0):
        bad = d[1:-1][np.argmax(margin)]
        raise BandContainsGap(f"|y| > 1 at Delta={bad!r} inside claimed band ({lo!r}, {hi!r})")
    q = np.arccos(np.clip(y, -1.0, 1.0))
    h = stencil_step((lo, hi))
    v = _slopes(config, d, h, lo, hi)
    dq = np.diff(q)
    monotonic = bool(np.all(dq >= -1e-12) or np.all(dq <= 1e-12))
    return DispersionCurve(config, (lo, hi), band_index, d, q, v, monotonic, h)


def group_velocity(curve: DispersionCurve, delta: float) -> float:
    """Centred-difference dDelta/d(qL) at ``delta`` (units of gamma).

    At a closed gap the principal branch folds back at qL = 0 or pi, where
    the sign of the slope depends on which of the +-q branches is followed;
    the magnitude of the unfolded slope is reported there.
    """
    lo, hi = curve.band
    h = curve.step
    v = _slopes(curve.config, [delta], h, lo, hi)[0]
    if math.isnan(v):
        raise AtBandEdge(f"Delta={delta!r} is within one stencil step ({h:.3g}) of a band edge")
    return float(v)


def flat_band_metric(curve: DispersionCurve) -> float:
    """Energy width of the branch; small values mean a flat band."""
    if len(curve) == 0:
        raise ValueError("empty curve")
    return float(curve.delta.max() - curve.delta.min())
