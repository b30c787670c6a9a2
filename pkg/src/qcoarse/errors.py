"""Exception hierarchy shared across the package."""


class QcoarseError(Exception):
    """Base class for every error raised by this package."""


class DomainError(QcoarseError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InputError(QcoarseError, ValueError):
    """Malformed or inconsistent user input (files, specs, parameters)."""


class UnsupportedDistributionError(QcoarseError, ValueError):
    """A distribution violates a structural requirement (divergent mean, ...)."""


class NumericalFailureError(QcoarseError):
    """A numerical routine failed beyond recovery.

    Carries the relevant residual when one is available.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class EmptyDecompositionError(QcoarseError):
    """Post-processing removed every candidate term."""


class InconsistentDecompositionError(QcoarseError):
    """An exponential sum cannot support a physical memory model."""


class ConstructionFailureError(QcoarseError):
    """Unitary assembly violated its isometry contract."""


class TailUnderflowError(QcoarseError):
    """A memory state was requested so deep in the tail its norm underflowed."""


class NonTerminatingError(QcoarseError):
    """A counter model assigns zero probability to every event."""


class ReducibleChainError(QcoarseError):
    """The embedded mode chain is reducible; stationary weights are ambiguous.

    ``closed_classes`` lists the closed communicating classes found.
    """

    def __init__(self, message, closed_classes=()):
        super().__init__(message)
        self.closed_classes = tuple(tuple(c) for c in closed_classes)
