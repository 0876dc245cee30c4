"""Single-photon band structure of periodic atom-polymer chains coupled to a waveguide."""

__version__ = "0.1.0"

from .errors import (AtBandEdge, BandContainsGap, DegenerateSpectrum, DivisionByZeroTransmission,
                     FitNotConverged, NearSingular, NotADimer, PhaseNotCommensurate,
                     ResolutionTooCoarse, SingularSystem, WqedError)
from .model import (CellOperator, ChainConfig, MarkovReport, PhaseMode, build_cell_operator,
                    markov_check, phase_delays)
from .scattering import (DetuningGrid, SpectrumSample, Transfer2, cell_transfer_matrix, chain_amplitudes,
                         chain_transfer_params, chebyshev_u, dressed_transfer_matrix, single_cell_amplitudes,
                         spectrum_sweep, transmittance_reflectance, zero_reflection_points)
from .bandgap import (AnalyticGapPrediction, GapReport, closed_form_prediction, dimer_closed_forms,
                      gap_regions, superradiant_lorentzian_fit, tetramer_closed_forms, tetramer_discriminant)
from .dispersion import DispersionCurve, bloch_q, dispersion_curve, flat_band_metric, group_velocity
from .modes import (ChainHamiltonian, ModeSpectrum, build_chain_hamiltonian, eigendecompose_biorthogonal,
                    lorentzian_decomposition, reconstruct_amplitudes, subradiant_metrics)
from .oracle import TransportSolution, direct_solve, residual_check
