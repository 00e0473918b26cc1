"""Exception and warning types raised across the package."""


class PTMetricError(Exception):
    """Base class for all numerical failures raised by ptmetric."""


class NonDiagonalizable(PTMetricError):
    """The matrix is defective (or numerically indistinguishable from it)."""


class NotHermitian(PTMetricError):
    pass


class NotPSD(PTMetricError):
    pass


class NotPhysicallyHermitian(PTMetricError):
    """The operator is not self-adjoint with respect to the supplied metric."""


class StepTooCoarse(PTMetricError):
    """The step-doubling error estimate exceeds the requested tolerance."""


class SingularEta(PTMetricError):
    pass


class IllConditionedMetric(PTMetricError):
    pass


class MetricBelowIdentity(PTMetricError):
    """W(t) - I has an eigenvalue below the dilation margin."""


class MetricMismatch(PTMetricError):
    pass


class BadWeights(PTMetricError):
    pass


class UnnormalizedState(PTMetricError):
    pass


class NotCyclic(PTMetricError):
    pass


class DegenerateSpectrumWarning(UserWarning):
    """Spectral projectors were grouped over a degenerate eigenvalue."""
