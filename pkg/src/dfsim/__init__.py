"""Exact non-Markovian dynamics of a resonant level coupled to a fermionic
reservoir, with the machinery to locate and classify its dynamically
stabilised decoherence-free states."""

from .spectral import (KernelContractionError, QuadratureError, SpectralKind,
                       SpectralModel, fermi, memory_kernel, noise_kernel,
                       sample_kernels, spectral_density)
from .greens import (AuditError, GreenTrajectory, SolverBlowupError, TimeGrid,
                     bm_green, compute_v, solve_green_functions,
                     solve_u_numeric, u_lorentz_analytic)
from .rates import (RateTrajectory, SwitchOffKind, SwitchOffReport, bm_rates,
                    detect_switch_off, rates_from_uv, rates_simplified)
from .liouville import (DensityVector, DFClass, DFReport, LiouvilleSpectrum,
                        build_Lt, classify_df_states,
                        markovian_criterion_check, spectrum)
from .propagate import (Method, PropagationResult, StateBasis, integrate_ode,
                        propagate_exact, purity_and_fidelity)
from .scenario import (PRESETS, BMComparison, ScenarioConfig, ScenarioReport,
                       StabilizationCondition, StabilizationVerdict,
                       SteadyValue, bm_compare, default_grid, preset,
                       run_scenario, sweep, table1_lookup)

__version__ = "0.1.0"

__all__ = [
    "AuditError", "BMComparison", "DFClass", "DFReport", "DensityVector",
    "GreenTrajectory", "KernelContractionError", "LiouvilleSpectrum",
    "Method", "PRESETS", "PropagationResult", "QuadratureError",
    "RateTrajectory", "ScenarioConfig", "ScenarioReport", "SolverBlowupError",
    "SpectralKind", "SpectralModel", "StabilizationCondition",
    "StabilizationVerdict", "StateBasis", "SteadyValue", "SwitchOffKind",
    "SwitchOffReport", "TimeGrid", "bm_compare", "bm_green", "bm_rates",
    "build_Lt", "classify_df_states", "compute_v", "default_grid",
    "detect_switch_off", "fermi", "integrate_ode", "markovian_criterion_check",
    "memory_kernel", "noise_kernel", "preset", "propagate_exact",
    "purity_and_fidelity", "rates_from_uv", "rates_simplified", "run_scenario",
    "sample_kernels", "solve_green_functions", "solve_u_numeric",
    "spectral_density", "spectrum", "sweep", "table1_lookup",
    "u_lorentz_analytic",
]
