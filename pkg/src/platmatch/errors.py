"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation/input problems exit 3,
unmet preconditions (including size caps and IC requirements) exit 2,
failed internal cross-checks exit 5.
"""

from __future__ import annotations


class PlatmatchError(Exception):
    """Base class for all package errors."""


class InputError(PlatmatchError):
    """Unknown id, value outside support, or otherwise malformed argument."""


class ValidationError(PlatmatchError):
    """One or more scenario/spec invariants are violated.

    Collects every violation found, not just the first.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class InvariantViolation(PlatmatchError):
    """A value that must hold by construction failed at runtime."""


class PreconditionError(PlatmatchError):
    """An operation's stated preconditions do not hold for these inputs."""


class StructureError(PreconditionError):
    """Structural requirement failed (threshold form, supermodularity, ...).

    Carries an optional witness of the failure.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class SizeError(PreconditionError):
    """Enumeration cap exceeded; the instance is too large for this method."""


class IcError(PreconditionError):
    """Incentive-compatibility requirement failed (non-monotone allocation)."""


class NumericError(PlatmatchError):
    """A payoff or kernel evaluation produced a non-finite value."""


class IdentityError(PlatmatchError):
    """Two routes that must agree numerically disagreed beyond tolerance."""
