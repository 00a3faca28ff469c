"""Exception and warning types shared across the package."""


class TailFactorError(Exception):
    """Base class for all errors raised by tailfactor."""


class NotPSD(TailFactorError):
    """A correlation matrix fails the positive semi-definiteness tolerance."""


class DegenerateNormalizer(TailFactorError):
    """A conditioning probability underflowed to (numerical) zero."""


class OutOfSupport(TailFactorError):
    """Argument lies outside the support of a distribution."""


class DimMismatch(TailFactorError):
    """Inconsistent dimensions between a model and its arguments."""


class DimError(DimMismatch):
    """Operation only defined for a specific dimension."""


class InvalidModel(TailFactorError):
    """Model parameters violate a validity constraint."""


class InvalidFamily(TailFactorError):
    """Unknown or inapplicable model family tag."""


class UnsupportedModel(TailFactorError):
    """Operation has no meaning for this model family."""


class NonDifferentiable(TailFactorError):
    """Derivative requested exactly at a kink."""


class DomainError(TailFactorError):
    """Argument outside the mathematical domain of an operation."""


class SimplexError(DomainError):
    """Point is not on the unit simplex."""


class NonConvergence(TailFactorError):
    """Iterative scheme failed to converge; partial results attached."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class TooFewExceedances(TailFactorError):
    """Not enough rows exceed the threshold to form an exceedance sample."""


class NonFiniteTerm(TailFactorError):
    """A likelihood term evaluated to NaN or infinity."""


class RowOnBoundary(TailFactorError):
    """An exceedance row sits (numerically) on a boundary face."""


class ZeroMassFace(TailFactorError):
    """Observation assigned to a face carrying zero model mass."""


class MarginFitFailure(TailFactorError):
    """Univariate margin estimation failed for a column."""


class NegativeDeviance(TailFactorError):
    """Nested model log-likelihood exceeds the full model's."""


class EmptyPairSet(TailFactorError):
    """Pair set for an aggregate diagnostic is empty."""


class GridError(TailFactorError):
    """Evaluation grid violates a requirement (coverage, midpoint, size)."""


class DegenerateData(TailFactorError):
    """Data column has no variation."""


class ConfigError(TailFactorError):
    """Run configuration failed schema validation."""


class TiesDetected(UserWarning):
    """Ties found while computing empirical ranks; broken by average rank."""
