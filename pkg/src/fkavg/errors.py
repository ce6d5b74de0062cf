"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration errors exit 2,
numerical failures exit 3, assumption violations exit 4.
"""


class FkavgError(Exception):
    """Base class for all package errors."""


class ConfigError(FkavgError):
    """Bad user input: unknown catalog kind, malformed grammar, invalid run config."""


class NumericalError(FkavgError):
    """Base class for numerical failures during a run."""


class SimulationDiverged(NumericalError):
    """A simulated state became non-finite."""

    def __init__(self, step_index, path_index=None):
        self.step_index = step_index
        self.path_index = path_index
        where = f"step {step_index}"
        if path_index is not None:
            where += f" of path {path_index}"
        super().__init__(f"simulation diverged: non-finite state at {where}")


class SingularityError(NumericalError):
    """Evaluation at a point where the expression is singular (e.g. K = 0)."""


class DegenerateStepError(NumericalError):
    """A recurrence step had zero mean decay rate, so the update is undefined."""


class SingularRatioError(NumericalError):
    """The source field vanishes on a window, making a ratio or root search singular."""


class QuadratureBudgetError(NumericalError):
    """Adaptive quadrature hit its evaluation budget before reaching tolerance.

    Carries the best estimate obtained so far.
    """

    def __init__(self, message, best_value, best_error, evaluations):
        self.best_value = best_value
        self.best_error = best_error
        self.evaluations = evaluations
        super().__init__(message)


class AssumptionViolationError(FkavgError):
    """A run was refused because the field pair violates the required bounds."""

    def __init__(self, report):
        self.report = report
        conds = ", ".join(v[0] for v in report.violations)
        super().__init__(
            f"assumption check failed on [{report.domain[0]:g}, {report.domain[1]:g}]: {conds}"
        )
