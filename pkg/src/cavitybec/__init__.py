"""Quantum noise spectra of a driven cavity with a Bose-Einstein condensate.

The s-wave collision frequency of the condensate sets the Bogoliubov mode
frequency, which in turn shapes the normal-mode splitting of the output
spectra.  The package computes steady states, stability, phase-noise,
intensity and squeezing spectra, and inverts a measured splitting into an
estimate of the collision frequency.
"""
from .calib import CalibrationCurve, CalibrationEstimate, build_curve, estimate_omega_sw, forward_splitting
from .errors import (
    AmbiguousBranch,
    AmbiguousEstimate,
    CavityBECError,
    NoStableBranch,
    NumericError,
    OutOfRange,
    ParameterError,
    UnknownPreset,
)
from .lindyn import DriftMatrix, ModeReport, drift_matrix, is_stable, mode_report, resolve_working_point
from .params import ModelParams, PhysicalParams, Quantity, derive_model_params, mechanical_frequency
from .spectra import (
    Grid,
    NoiseModel,
    SpectrumSeries,
    intensity_spectrum,
    optimal_phase,
    phase_noise_spectrum,
    squeezing_spectrum,
)
from .steady import WorkingPoint, select_branch, solve_steady_state

__version__ = "0.1.0"
