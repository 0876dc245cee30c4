"""Exception types raised by the numerical routines."""


class WqedError(Exception):
    """Base class for all package errors."""


class NearSingular(WqedError):
    """The cell resolvent ``(Delta I - H_c)`` is numerically singular."""

    def __init__(self, delta, det):
        super().__init__(f"Delta I - H_c is near singular at Delta={delta!r} (|det|={det:.3e})")
        self.delta = delta
        self.det = det


class DivisionByZeroTransmission(WqedError):
    """A cell transmits nothing, so its transfer matrix does not exist."""


class ResolutionTooCoarse(WqedError):
    pass


class NotADimer(WqedError):
    pass


class PhaseNotCommensurate(WqedError):
    """(alpha0, beta0) matches none of the Bragg / anti-Bragg regimes."""

    def __init__(self, message, nearest=None):
        super().__init__(message)
        self.nearest = nearest


class FitNotConverged(WqedError):
    pass


class BandContainsGap(WqedError):
    pass


class AtBandEdge(WqedError):
    pass


class DegenerateSpectrum(WqedError):
    """Two collective eigenvalues are too close for a stable decomposition."""

    def __init__(self, message, min_gap=None):
        super().__init__(message)
        self.min_gap = min_gap


class SingularSystem(WqedError):
    pass
