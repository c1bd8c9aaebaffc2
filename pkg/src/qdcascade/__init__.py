"""Quantum-dot biexciton-exciton cascade: simulation and analysis toolkit.

Submodules
----------
core        cascade rates, Purcell tuning, visibility law, purity oracle
montecarlo  pulsed-experiment time-tag simulation (lifetime, HBT, HOM)
streams     time-tag stream container and text format
analysis    coincidence histograms, g2(0), HOM visibility, backgrounds
fitting     IRF-convolved lifetime fits with bootstrap errors
tables      table and record file I/O
cli         batch command-line front end
"""

from .analysis import (
    CoincidenceHistogram,
    G2Result,
    VisibilityReport,
    build_histogram,
    correct_visibility,
    estimate_background,
    g2_vs_window,
    g2_zero,
    hom_visibility,
    integrate_peak,
    select_noise_boundary,
)
from .core import (
    BINDING_ENERGY_GHZ,
    CascadeConfig,
    EffectiveRates,
    TimeGrid,
    cascade_population_x,
    effective_rates,
    joint_amplitude,
    lorentzian_enhancement,
    purcell_factor_xx,
    reduced_purity,
    visibility_from_ratio,
)
from .fitting import (
    DecayHistogram,
    FitResult,
    PurcellReport,
    bootstrap,
    fit,
    fit_with_bootstrap,
    model_cascade_irf,
    model_exponential_irf,
    purcell_report,
)
from .montecarlo import (
    EmissionEvent,
    ExperimentConfig,
    HomOutcome,
    conditional_overlap,
    hbt_expected_g2,
    hom_click,
    leakage_for_target_g2,
    sample_cascade,
    simulate,
)
from .streams import TimeTagStream

__version__ = "0.1.0"

__all__ = [
    "BINDING_ENERGY_GHZ",
    "CascadeConfig",
    "CoincidenceHistogram",
    "DecayHistogram",
    "EffectiveRates",
    "EmissionEvent",
    "ExperimentConfig",
    "FitResult",
    "G2Result",
    "HomOutcome",
    "PurcellReport",
    "TimeGrid",
    "TimeTagStream",
    "VisibilityReport",
    "bootstrap",
    "build_histogram",
    "cascade_population_x",
    "conditional_overlap",
    "correct_visibility",
    "effective_rates",
    "estimate_background",
    "fit",
    "fit_with_bootstrap",
    "g2_vs_window",
    "g2_zero",
    "hbt_expected_g2",
    "hom_click",
    "hom_visibility",
    "integrate_peak",
    "joint_amplitude",
    "leakage_for_target_g2",
    "lorentzian_enhancement",
    "model_cascade_irf",
    "model_exponential_irf",
    "purcell_factor_xx",
    "purcell_report",
    "reduced_purity",
    "sample_cascade",
    "select_noise_boundary",
    "simulate",
    "visibility_from_ratio",
]
