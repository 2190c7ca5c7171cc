#!/usr/bin/env python3
"""
Exception hierarchy for sbp-groundstate

Every error raised on purpose by the library derives from SBPError so the
command line front end can report it cleanly and exit non-zero. Each
subclass also derives from the closest builtin so plain callers can keep
catching ValueError / ArithmeticError.
"""


class SBPError(Exception):
    """Base class for all library errors"""


class DomainError(SBPError, ValueError):
    """An argument lies outside the domain of the operation"""


class AdmissibilityError(SBPError, ValueError):
    """A radial function does not decay at the truncation radius"""


class ResolutionError(SBPError, ValueError):
    """The grid is too coarse for the requested computation"""


class GridMismatchError(SBPError, ValueError):
    """Two radial functions live on different grids"""


class NumericError(SBPError, ArithmeticError):
    """A quadrature or linear solve produced a non-finite result"""


class TruncationError(SBPError):
    """A rescaled profile carries mass beyond the truncation radius"""


class NehariProjectionError(SBPError):
    """The fibering derivative has no positive root along the ray"""


class OracleError(SBPError):
    """The shooting oracle could not bracket the ground state"""


class MethodError(SBPError):
    """Every solution method available for the parameters failed"""


class RunError(SBPError):
    """A command failed; the message carries the command context"""

    def __init__(self, command: str, message: str):
        super().__init__(f"{command}: {message}")
        self.command = command
