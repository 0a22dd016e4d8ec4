"""Solver suite for the Alber equation of random-sea statistics.

Relaxation Crank-Nicolson timestepper with 4th-order periodic finite
differences, exact-solution and Fourier-side oracles, Penrose-type
stability analysis, and randomized amplification experiments.
"""

from .errors import (
    AlberError,
    ConfigurationError,
    IndeterminateWindingError,
    ParameterError,
    ScanRangeError,
    StepFailure,
    ValidationError,
)
from .grid_spectra import (
    Autocorrelation,
    GaussianSpectrumParams,
    Grid,
    gamma_from_spectrum,
    gaussian_gamma,
    grid_for_mesh,
    periodize,
    zero_autocorrelation,
)
from .operators import build_operators, solve_step, StepMatrix
from .rcn_scheme import (
    EvolveResult,
    InitialInhomogeneity,
    SchemeConfig,
    State,
    build_initial_state,
    evolve,
    step,
)
from .diagnostics import (
    AmplificationReport,
    DiagnosticsCollector,
    amplification_factors,
    balance_residual,
    constraint_error,
    invariant_I0,
    invariant_I1,
    invariant_I2,
    invariant_I3,
)
from .validation import (
    SolitonParams,
    fourier_oracle,
    run_eoc_space,
    run_eoc_time,
    run_soliton,
    soliton_exact,
)
from .stability_analysis import (
    StabilityResult,
    critical_intensity,
    stability_scan,
    winding_number,
)
from .experiments import MonteCarloConfig, RunConfig, run_experiment, run_montecarlo

__version__ = "0.1.0"
