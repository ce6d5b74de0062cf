"""Time averages of exponential path functionals along ergodic diffusions.

The package simulates scalar diffusions, evaluates the decaying-exponential
source functional along each path with an underflow-safe backward recurrence,
verifies the pathwise mean-value representation of the functional, and
compares long-run time averages against an independent quadrature of q/K
under the invariant density.
"""

from .errors import (AssumptionViolationError, ConfigError, DegenerateStepError,
                     FkavgError, NumericalError, QuadratureBudgetError,
                     SimulationDiverged, SingularityError, SingularRatioError)
from .fields import (AssumptionReport, ScalarField, check_assumptions,
                     eval_field, eval_ratio_derivative, field_derivative,
                     field_from_spec, make_field)
from .functional import (FunctionalSeries, cumulative_K, functional_direct,
                         functional_series, time_average, window_value)
from .harness import (ConvergenceRow, RunConfig, draw_windows, run_converge,
                      run_functional, run_limit, run_mvt, run_simulate, steps_for)
from .measure import (InvariantDensity, QuadratureResult, invariant_density,
                      quadrature_q_over_K, truncation_interval)
from .mvt import (MvtRecord, boundary_ratio, boundary_ratio_global_form,
                  mvt_identity_check, terminal_ratio_limit, time_change)
from .sde import (SamplePath, SdeModel, make_model, model_from_spec,
                  path_increments, refine_path, simulate_ensemble, simulate_path)

__version__ = "0.1.0"

__all__ = [
    "AssumptionReport", "AssumptionViolationError", "ConfigError",
    "ConvergenceRow", "DegenerateStepError", "FkavgError", "FunctionalSeries",
    "InvariantDensity", "MvtRecord", "NumericalError", "QuadratureBudgetError",
    "QuadratureResult", "RunConfig", "SamplePath", "ScalarField", "SdeModel",
    "SimulationDiverged", "SingularityError", "SingularRatioError",
    "boundary_ratio", "boundary_ratio_global_form", "check_assumptions",
    "cumulative_K", "draw_windows", "eval_field", "eval_ratio_derivative",
    "field_derivative", "field_from_spec", "functional_direct",
    "functional_series", "invariant_density", "make_field", "make_model",
    "model_from_spec", "mvt_identity_check", "path_increments",
    "quadrature_q_over_K", "refine_path", "run_converge", "run_functional",
    "run_limit", "run_mvt", "run_simulate", "simulate_ensemble",
    "simulate_path", "steps_for", "terminal_ratio_limit", "time_average",
    "time_change", "truncation_interval", "window_value",
]
