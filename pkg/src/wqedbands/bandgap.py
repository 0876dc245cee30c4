"""Band-gap detection from |y(Delta)| > 1 and the dimer/tetramer closed forms."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .errors import FitNotConverged, NotADimer, PhaseNotCommensurate, ResolutionTooCoarse
from .model import ChainConfig, PhaseMode
from .scattering import SpectrumSample, _bisect, gap_margin_array

# |y| must exceed 1 by this much to count as "no propagating mode"; absorbs
# rounding where y only touches +-1 (closed gaps)
GAP_TOL = 1e-10
EDGE_XTOL = 1e-12
# gaps or passbands narrower than this (in units of gamma) are rounding artefacts
# at removable singularities of y and are dropped / bridged
SLIVER = 1e-9
PHASE_TOL = 1e-9

BRAGG_BRAGG = "BraggBragg"
ANTIBRAGG_BRAGG = "AntiBraggBragg"
BRAGG_ANTIBRAGG = "BraggAntiBragg"
ANTIBRAGG_ANTIBRAGG = "AntiBraggAntiBragg"
TETRAMER = "Tetramer"


@dataclass(frozen=True)
class GapReport:
    interval: tuple
    gaps: list
    widths: list
    centers: list
    passbands: list

    @classmethod
    def from_gaps(cls, interval, gaps) -> "GapReport":
        lo, hi = interval
        gaps = [(float(a), float(b)) for a, b in gaps]
        passbands = []
        cursor = lo
        for a, b in gaps:
            if a > cursor:
                passbands.append((float(cursor), a))
            cursor = b
        if hi > cursor:
            passbands.append((float(cursor), float(hi)))
        return cls(
            interval=(float(lo), float(hi)),
            gaps=gaps,
            widths=[b - a for a, b in gaps],
            centers=[0.5 * (a + b) for a, b in gaps],
            passbands=passbands,
        )


@dataclass(frozen=True)
class AnalyticGapPrediction:
    regime: str
    gaps: list
    widths: list
    centers: list
    passband_widths: list = field(default_factory=list)
    aux: dict = field(default_factory=dict)


def _merge(intervals):
    out = []
    for a, b in sorted(intervals):
        if b <= a:
            continue
        if out and a <= out[-1][1] + 1e-14:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def _symmetric(inner, outer):
    # gaps inner < |Delta| < outer, or a single centred gap when inner <= 0
    if outer <= inner:
        return []
    if inner <= 0:
        return [(-outer, outer)]
    return _merge([(-outer, -inner), (inner, outer)])


def _prediction(regime, gaps, aux=None) -> AnalyticGapPrediction:
    gaps = _merge(gaps)
    passbands = [gaps[k + 1][0] - gaps[k][1] for k in range(len(gaps) - 1)]
    return AnalyticGapPrediction(
        regime=regime,
        gaps=gaps,
        widths=[b - a for a, b in gaps],
        centers=[0.5 * (a + b) for a, b in gaps],
        passband_widths=passbands,
        aux=aux or {},
    )


def _classify(phase: float) -> tuple[str, int]:
    """Return ('B' | 'AB', parity of n) for a Bragg / anti-Bragg phase."""
    x = math.fmod(phase, 2 * math.pi)
    if x < 0:
        x += 2 * math.pi
    for kind, target, parity in (("B", 0.0, 0), ("B", math.pi, 1), ("AB", math.pi / 2, 1),
                                 ("AB", 1.5 * math.pi, 0), ("B", 2 * math.pi, 0)):
        if abs(x - target) <= PHASE_TOL:
            return kind, parity
    raise PhaseNotCommensurate(f"phase {phase!r} is neither Bragg nor anti-Bragg")


def nearest_regime(config: ChainConfig) -> str:
    """Dimer regime of (alpha0, beta0) snapped to the nearest multiple of pi/2."""
    def snap(p):
        q = round(2 * p / math.pi) * math.pi / 2
        return q
    try:
        a, _ = _classify(snap(config.alpha0))
        b, _ = _classify(snap(config.beta0))
    except PhaseNotCommensurate:
        return "unknown"
    return {("B", "B"): BRAGG_BRAGG, ("AB", "B"): ANTIBRAGG_BRAGG,
            ("B", "AB"): BRAGG_ANTIBRAGG, ("AB", "AB"): ANTIBRAGG_ANTIBRAGG}[(a, b)]


def dimer_closed_forms(config: ChainConfig) -> AnalyticGapPrediction:
    """Infinite-chain gap structure of a Bragg/anti-Bragg dimer chain."""
    if config.atoms_per_cell != 2:
        raise NotADimer(f"closed forms need N=2, got N={config.atoms_per_cell}")
    J = config.couplings[0]
    G = config.gamma
    if J < 0:
        raise ValueError("dimer closed forms assume J >= 0")
    try:
        a_kind, n_odd = _classify(config.alpha0)
        b_kind, _ = _classify(config.beta0)
    except PhaseNotCommensurate as exc:
        raise PhaseNotCommensurate(
            f"(alpha0, beta0) = ({config.alpha0!r}, {config.beta0!r}) matches no dimer regime",
            nearest=nearest_regime(config)) from exc
    sign_n = -1.0 if n_odd else 1.0

    if (a_kind, b_kind) == ("B", "B"):
        return _prediction(BRAGG_BRAGG, [], {
            "lorentzian_center": sign_n * J,
            "lorentzian_fwhm": 2 * config.cells * G,
        })
    if (a_kind, b_kind) == ("AB", "B"):
        half = abs(J + G / 2) if n_odd else abs(J - G / 2)
        if half <= 1e-12 * G:
            half = 0.0
        return _prediction(ANTIBRAGG_BRAGG, [(-half, half)] if half > 0 else [], {"W": 2 * half})
    if (a_kind, b_kind) == ("B", "AB"):
        center = -J if n_odd else J
        return _prediction(BRAGG_ANTIBRAGG, [(center - G, center + G)], {"W": 2 * G})
    if n_odd:
        return _prediction(ANTIBRAGG_ANTIBRAGG, _symmetric(J, J + G), {"W": G, "W_prime": 2 * J})
    # n even: the three rows of the J-table
    tol = 1e-12 * G
    if abs(J - G / 2) <= tol:
        return _prediction(ANTIBRAGG_ANTIBRAGG, [], {"W": 0.0, "W_prime": None})
    if abs(J - G) <= tol:
        return _prediction(ANTIBRAGG_ANTIBRAGG, [(-G, G)], {"W": 2 * G, "W_prime": 0.0})
    if J < G / 2:
        gaps, W, Wp = _symmetric(J, G - J), G - 2 * J, 2 * J
    elif J < G:
        gaps, W, Wp = _symmetric(G - J, J), 2 * J - G, 2 * (G - J)
    else:
        gaps, W, Wp = _symmetric(J - G, J), G, 2 * (J - G)
    return _prediction(ANTIBRAGG_ANTIBRAGG, gaps, {"W": W, "W_prime": Wp})


def tetramer_discriminant(J_reduced: float, eta: float) -> float:
    return 3 * J_reduced ** 2 * eta ** 2 + 2 * (4 * J_reduced ** 2 + J_reduced) * eta - 1


def tetramer_closed_forms(J: float, eta: float, gamma: float = 1.0) -> AnalyticGapPrediction:
    """Gap regions of the tetramer chain with couplings (J, eta*J, J), alpha0=pi/2, beta0=2pi."""
    G = gamma
    delta = 0.5 * (G + (eta + 2) * J)
    root = math.sqrt((G + 2 * J) ** 2 + (G + eta * J) ** 2)
    d1 = 0.5 * (eta * J + root)
    d2 = 0.5 * (-eta * J + root)
    f = tetramer_discriminant(J / G, eta)
    aux = {"delta": delta, "delta1": d1, "delta2": d2, "f": f, "eta": eta, "J_reduced": J / G}
    if abs(f) < 1e-10:
        aux.update(W_c=2 * d1, W_s=0.0, W_p=0.0)
        return _prediction(TETRAMER, [(-d1, d1)], aux)
    if f < 0:
        gaps = [(-delta, delta)] + _symmetric(d2, d1)
        aux.update(W_c=2 * delta, W_s=d1 - d2, W_p=d2 - delta)
    else:
        gaps = [(-d2, d2)] + _symmetric(delta, d1)
        aux.update(W_c=2 * d2, W_s=d1 - delta, W_p=delta - d2)
    return _prediction(TETRAMER, gaps, aux)


def closed_form_prediction(config: ChainConfig) -> AnalyticGapPrediction | None:
    """Closed-form prediction for ``config`` if one applies, else None."""
    if config.phase_mode is not PhaseMode.MARKOV:
        return None
    try:
        if config.atoms_per_cell == 2 and config.couplings[0] >= 0:
            return dimer_closed_forms(config)
        if config.atoms_per_cell == 4:
            J1, J2, J3 = config.couplings
            a_kind, a_odd = _classify(config.alpha0)
            b_kind, b_odd = _classify(config.beta0)
            if (a_kind, a_odd, b_kind, b_odd) == ("AB", 1, "B", 0) and J1 == J3 and J1 > 0:
                return tetramer_closed_forms(J1, J2 / J1, config.gamma)
    except PhaseNotCommensurate:
        return None
    return None


def _gap_indicator(config, deltas):
    return gap_margin_array(config, deltas, GAP_TOL)


def gap_regions(config: ChainConfig, interval, resolution: float, use_hints: bool = True) -> GapReport:
    """Scan ``interval`` for detunings with |y| > 1 and refine each edge by bisection."""
    lo, hi = map(float, interval)
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    if not hi > lo:
        raise ValueError("interval must satisfy hi > lo")
    if use_hints:
        hint = closed_form_prediction(config)
        if hint is not None:
            for (a0, b0), (a1, b1) in zip(hint.gaps, hint.gaps[1:]):
                width = a1 - b0
                if 0 < width < 2 * resolution and lo < b0 and a1 < hi:
                    raise ResolutionTooCoarse(
                        f"passband ({b0:.6g}, {a1:.6g}) of width {width:.3g} is narrower than 2*resolution")
    n = int(math.ceil((hi - lo) / resolution)) + 1
    grid = np.linspace(lo, hi, n)
    g = _gap_indicator(config, grid)
    inside = g > 0

    def indicator(d):
        return float(_gap_indicator(config, [d])[0])

    def edge(k):
        a, b = _bisect(indicator, grid[k], grid[k + 1], g[k], tol=EDGE_XTOL)
        return 0.5 * (a + b)

    gaps = []
    start = lo if inside[0] else None
    for k in range(n - 1):
        if inside[k] == inside[k + 1]:
            continue
        x = edge(k)
        if inside[k + 1]:
            start = x
        else:
            gaps.append((start, x))
            start = None
    if start is not None:
        gaps.append((start, hi))
    return GapReport.from_gaps((lo, hi), _clean(gaps, SLIVER * config.gamma))


def _clean(gaps, sliver):
    bridged = []
    for a, b in gaps:
        if bridged and a - bridged[-1][1] < sliver:
            bridged[-1] = (bridged[-1][0], b)
        else:
            bridged.append((a, b))
    return [(a, b) for a, b in bridged if b - a >= sliver]


def _lorentzian(x, amp, center, hwhm):
    return amp * hwhm ** 2 / ((x - center) ** 2 + hwhm ** 2)


def superradiant_lorentzian_fit(samples: list[SpectrumSample]) -> tuple[float, float]:
    """Least-squares Lorentzian fit of R(Delta); returns (center, FWHM)."""
    x = np.array([s.delta for s in samples], dtype=float)
    y = np.array([s.R for s in samples], dtype=float)
    if x.size < 4:
        raise FitNotConverged("need at least four samples")
    k = int(np.argmax(y))
    above = x[y >= 0.5 * y[k]]
    guess_hwhm = max(0.5 * (above.max() - above.min()), (x[-1] - x[0]) / x.size)
    try:
        with warnings.catch_warnings():
            # an exact Lorentzian leaves a zero residual and no covariance estimate
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, _ = curve_fit(_lorentzian, x, y, p0=(y[k], x[k], guess_hwhm), maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitNotConverged(str(exc)) from exc
    amp, center, hwhm = popt
    if not np.all(np.isfinite(popt)) or amp <= 0:
        raise FitNotConverged(f"unphysical fit parameters {popt}")
    return float(center), float(2 * abs(hwhm))
