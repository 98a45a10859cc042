"""Exception taxonomy shared across the package.

Every error a caller can act on derives from ValidationError (bad inputs,
infeasible parameters, malformed tables) or SimulationFailure (a registered
simulation raised during study execution).  The CLI maps ValidationError to
exit code 2 and SimulationFailure to exit code 3.
"""

from __future__ import annotations


class SimdoeError(Exception):
    """Base class for all package errors."""


class ValidationError(SimdoeError):
    """Invalid input: violated precondition, malformed table, bad parameters."""


class Unbalanced(ValidationError):
    """Response table is not balanced-complete; carries the offending cells."""

    def __init__(self, message: str, missing=(), duplicated=()):
        super().__init__(message)
        self.missing = tuple(missing)
        self.duplicated = tuple(duplicated)


class OutOfRangeLevel(ValidationError):
    """A run references a level index (or label) the factor does not have."""


class DependentGenerators(ValidationError):
    """A generator word lies in the group generated by the others."""


class NonTwoLevelFactor(ValidationError):
    """Operation requires every factor to have exactly two levels."""


class TrivialRelation(ValidationError):
    """Defining relation contains only the identity; resolution is undefined."""


class OverlappingFactors(ValidationError):
    """Control and noise designs share a factor name."""


class InvalidDf(ValidationError):
    """Degrees of freedom must be positive integers."""


class InfeasibleParams(ValidationError):
    """Heredity prior parameters fall outside [0, 1] probabilities."""


class InvalidCorrelation(ValidationError):
    """Adjacent-correlation parameter outside [0, 1)."""


class CholeskyFailure(ValidationError):
    """Correlation matrix is not positive definite."""


class DegenerateDesign(ValidationError):
    """Training matrix unusable (e.g. all columns constant)."""


class EmptyControlSet(ValidationError):
    """Robustness analysis needs at least one control factor."""


class EmptySubset(ValidationError):
    """Pilot subset selects no runs."""


class ArityMismatch(ValidationError):
    """Plot data does not match the requested plot kind."""


class SimulationFailure(SimdoeError):
    """A simulation run raised; carries enough context to replay it."""

    def __init__(self, message: str, run_index: int, replicate: int,
                 seed: int, levels=None):
        super().__init__(message)
        self.run_index = run_index
        self.replicate = replicate
        self.seed = seed
        self.levels = dict(levels or {})

    def __reduce__(self):
        # Keeps the replay context when crossing process boundaries.
        return (SimulationFailure, (str(self), self.run_index,
                                    self.replicate, self.seed, self.levels))
