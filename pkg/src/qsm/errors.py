"""Exception types shared across the package.

The command-line interface maps these to exit codes: validation problems
(malformed inputs, violated preconditions) exit with 2, verification or
solver failures (a constructed object fails its own checks) exit with 3.
"""

from __future__ import annotations


class ValidationError(ValueError):
    """Raised when an input fails a structural or numerical precondition."""


class VerificationError(RuntimeError):
    """Raised when a constructed object fails its verification checks."""


class SolverError(VerificationError):
    """Raised when an iterative solver cannot reach its certified accuracy."""
