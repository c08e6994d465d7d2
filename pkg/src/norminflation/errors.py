"""Exception hierarchy.

Every error carries a short machine-readable ``reason`` code; the CLI prints
it verbatim on validation failures.
"""


class NormInflationError(ValueError):
    reason = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.reason)


class InvalidNormSpec(NormInflationError):
    reason = "invalid-norm-spec"


class DimensionMismatch(NormInflationError):
    reason = "dimension-mismatch"


class InvalidParameters(NormInflationError):
    reason = "invalid-parameters"


class Unsupported(NormInflationError):
    reason = "unsupported"


class IntegrationDiverged(NormInflationError):
    reason = "integration-diverged"


class SolverDiverged(NormInflationError):
    reason = "solver-diverged"


class RootNotFound(NormInflationError):
    reason = "root-not-found"


class AliasingError(NormInflationError):
    reason = "aliasing"


class Undersampled(NormInflationError):
    reason = "undersampled"


class CoverageError(NormInflationError):
    reason = "missing-trajectory-coverage"


class InfeasibleRegularity(NormInflationError):
    reason = "infeasible-regularity"
