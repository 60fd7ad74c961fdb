"""Exception hierarchy shared by all modules.

Every error carries a short machine name (the class name) so the CLI can
report it and map it onto an exit code.
"""


class DskgError(Exception):
    """Base class for all package errors."""

    exit_code = 3

    @property
    def name(self):
        return type(self).__name__


class ValidationError(DskgError):
    exit_code = 2


class NumericalError(DskgError):
    exit_code = 3


class ConfigInvalid(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NoPositivityInterval(ValidationError):
    pass


class NoErgoregion(NumericalError):
    def __init__(self, message, r1=None, r2=None):
        super().__init__(message)
        self.r1 = r1
        self.r2 = r2


class QuadratureFailure(NumericalError):
    pass


class PencilSingular(NumericalError):
    def __init__(self, z, rcond=None):
        super().__init__(f"pencil singular at z={z!r} (rcond={rcond})")
        self.z = z
        self.rcond = rcond


class PositivityViolation(NumericalError):
    def __init__(self, which, eigenvalue):
        super().__init__(f"{which}: smallest eigenvalue {eigenvalue:.3e} < 0")
        self.which = which
        self.eigenvalue = eigenvalue


class SupportOverflow(ValidationError):
    pass


class BudgetExceeded(ValidationError):
    pass


class SolverFailure(NumericalError):
    pass


class IllConditioned(NumericalError):
    pass


class SpectrumOnContour(NumericalError):
    pass


class DefectiveCluster(NumericalError):
    pass


class NotInL(ValidationError):
    pass


class NotInFin(ValidationError):
    pass


class CausalWindowExceeded(ValidationError):
    pass


class AssemblyDomainError(ValidationError):
    pass
