"""Monte Carlo and analysis toolkit for rectified quantum-heterodyne detection.

Modules
-------
signal_model  target signal, aliasing, noiseless photon-rate traces
physics       accumulated phase, readout probabilities, DD lineshape, J0/J1
protocols     QDyne / ex situ / in situ trace engines
fidelity      rectification fidelity and reduction factor
spectral      averaging pipelines, |DFT|^2 spectra, SNR
analysis      scaling fits, lineshape fitting, protocol comparison
cli           command-line front end (``rectqdyne``)
"""

__version__ = "0.1.0"

from .errors import ConfigError, EmptyInputError, FitError
from .fidelity import (FidelityReport, fidelity_alpha_ensemble, fidelity_report,
                       fidelity_shot_noise, fidelity_with_charge, optimal_alpha,
                       rectified_amplitude_factor, reduction_factor)
from .physics import (InteractionParams, accumulated_phase, alpha_from_field, bessel_j0,
                      bessel_j1, dd_lineshape, field_from_alpha, p0_x_readout, p0_y_readout,
                      sinc_pi)
from .protocols import (MemoryOutcome, PhotonModel, PhotonTrace, Protocol, ProtocolConfig,
                        RunSummary, generate_trace, iter_traces, reference_config,
                        rectification_decision, run_protocol)
from .signal_model import (NoiseMode, PhotonReadoutModel, TargetSignal, TraceGeometry,
                           alias_frequency, expected_rate, sample_phase)
from .spectral import (AveragingMode, CoherentAverager, IncoherentAverager, PSDSpectrum,
                       SNREstimate, average_coherent, average_incoherent, dft_power,
                       estimate_snr)
from .analysis import (ComparisonCurve, ComparisonParams, ProtocolLabel, ScalingFit,
                       comparison_curves, config_reduction_factor, fit_dd_lineshape,
                       fit_power_law, polarization_ratio, predict_snr, rectified_amplitude,
                       snr_versus_n)
