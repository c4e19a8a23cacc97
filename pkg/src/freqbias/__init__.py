"""Spectral analysis tools for the spatial frequency bias of convolutional generators."""
from .cnn import LayerSpec, StackSpec, default_stack, effective_filter_spectrum, forward, init_weights
from .metrics import (
    FidLevelsCurve,
    GaussianHighpass,
    GaussianMoments,
    PixelFeatures,
    fid_levels,
    fit_moments,
    frechet_distance,
    highpass_gaussian,
    leakage_ratio,
    true_fid_levels,
)
from .spectral import (
    AveragePowerSpectrum,
    PowerSpectrum,
    average_power_spectrum,
    dft2,
    display_normalize,
    hann_window,
    idft2,
    power_spectrum,
)
from .theory import FilterShape, adjacent_diag_corr, analytic_corr, brute_force_corr, monte_carlo_corr
from .transforms import CheckerboardShift, FrequencyShift, ShiftTarget, checkerboard_shift, complex_shift

__all__ = [
    "LayerSpec",
    "StackSpec",
    "default_stack",
    "effective_filter_spectrum",
    "forward",
    "init_weights",
    "FidLevelsCurve",
    "GaussianHighpass",
    "GaussianMoments",
    "PixelFeatures",
    "fid_levels",
    "fit_moments",
    "frechet_distance",
    "highpass_gaussian",
    "leakage_ratio",
    "true_fid_levels",
    "AveragePowerSpectrum",
    "PowerSpectrum",
    "average_power_spectrum",
    "dft2",
    "display_normalize",
    "hann_window",
    "idft2",
    "power_spectrum",
    "FilterShape",
    "adjacent_diag_corr",
    "analytic_corr",
    "brute_force_corr",
    "monte_carlo_corr",
    "CheckerboardShift",
    "FrequencyShift",
    "ShiftTarget",
    "checkerboard_shift",
    "complex_shift",
]

__version__ = "0.1.0"
