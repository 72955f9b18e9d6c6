"""Semantic exception hierarchy for the whole package.

Public functions never raise bare ValueError/RuntimeError for contract
violations; they raise one of these so callers (and the CLI exit-code
mapping) can tell validation failures from numerical trouble.
"""

from __future__ import annotations


class BlockplanError(Exception):
    """Base class for every error raised by this package."""


# --- piecewise-linear function contract ---------------------------------


class PwlError(BlockplanError):
    """A breakpoint list violates the piecewise-linear function contract."""


class UnsortedDomain(PwlError):
    """Breakpoint x-coordinates are not strictly increasing."""


class DomainNotAtZero(PwlError):
    """The first breakpoint does not sit at x = 0."""


class NegativeValue(PwlError):
    """A utility value (or target payoff) is negative."""


class NonConcave(PwlError):
    """Successive segment slopes increase beyond tolerance."""


class OutOfDomain(PwlError):
    """An evaluation or integration point lies outside [0, u]."""


class TargetAboveMax(PwlError):
    """A raise target exceeds the function's maximum value."""


class DomainMismatch(PwlError):
    """Two functions that must share a domain [0, u] do not."""


# --- game model ----------------------------------------------------------


class InvalidInstance(BlockplanError):
    """A city instance violates its invariants.

    Carries every violation found, not just the first one.
    """

    def __init__(self, violations: list[str]):
        self.violations = tuple(violations)
        super().__init__("; ".join(violations))


class PopulationOutOfRange(BlockplanError):
    """N is below the largest capacity or above the total capacity."""


class DimensionMismatch(BlockplanError):
    """An allocation vector does not match the instance's locations."""


class IndexOutOfRange(BlockplanError):
    """A plan entry references a location the instance does not have."""


class NegativeInput(BlockplanError):
    """A quantity that must be non-negative (welfare, ratio input) is not."""


# --- solvers -------------------------------------------------------------


class InstanceTooLarge(BlockplanError):
    """Exhaustive grid machinery is only available for n <= 3."""


class EmptyEquilibriumSet(BlockplanError):
    """The grid found no approximate equilibria; refine the resolution."""


class GridTooFine(BlockplanError):
    """The dynamic program's state budget would be exceeded."""


# --- planner -------------------------------------------------------------


class NoPrefix(BlockplanError):
    """Sum of u_i*h_i falls short of the benchmark welfare W.

    Signals that W overestimates the optimum; the planner requires W <= opt.
    """


class EpsilonOutOfRange(BlockplanError):
    """The welfare fraction must satisfy 0 < epsilon <= 1."""


# --- scenarios -----------------------------------------------------------


class UnknownScenario(BlockplanError):
    """No built-in scenario with that name."""


class MissingParam(BlockplanError):
    """A built-in scenario needs a parameter that was not supplied."""
