"""Exception types raised across the package."""

from __future__ import annotations


class DwellFleeError(Exception):
    """Base class for all package errors."""


class NonConvergence(DwellFleeError):
    """An iterative eigenvalue routine failed to converge."""


class IllConditionedBasis(DwellFleeError):
    """A Jordan basis is too close to singular to be trusted."""


class MarginRequired(DwellFleeError):
    """A defective mode needs an explicit decay margin."""


class CyclicGraph(DwellFleeError):
    """A graph expected to be acyclic contains a directed cycle."""

    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cycle: " + " -> ".join(str(m) for m in self.cycle))


class HypothesisViolated(DwellFleeError):
    """The unstable-source subgraph has a directed cycle."""

    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__(
            "unstable-source subgraph is cyclic: "
            + " -> ".join(str(m) for m in self.cycle)
        )


class FleeUndefined(DwellFleeError):
    """A flee-time numerator is nonnegative, so no positive flee time exists."""


class NotAllStable(DwellFleeError):
    """An operation that needs only stable modes received an unstable one."""


class ZeroInSet(DwellFleeError):
    """A candidate jump set contains the zero matrix."""


class DimensionMismatch(DwellFleeError):
    """Matrix or vector dimensions disagree."""


class InfeasibleAtUpperBound(DwellFleeError):
    """A dwell-time bisection found no certificate at its upper end."""

    def __init__(self, message, profile=None):
        self.profile = list(profile or [])
        super().__init__(message)


class RatioInvalid(DwellFleeError):
    """Switch-type frequencies are outside [0, 1] or do not sum to one."""


class InadmissibleSignal(DwellFleeError):
    """A switching signal violates the mode graph or its own invariants."""


class ScheduleMismatch(DwellFleeError):
    """An impulse schedule does not match the signal's switch times."""


class UnsatisfiableClass(DwellFleeError):
    """No signal of the requested class exists on the given graph."""


class DocumentError(DwellFleeError):
    """A system document could not be parsed or failed validation."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = list(diagnostics or [])
        super().__init__(message)
