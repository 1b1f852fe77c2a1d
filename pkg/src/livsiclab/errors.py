"""Exception types raised across livsiclab."""


class LivsicError(Exception):
    """Base class for all validation and contract errors in this package."""


class CapExceededError(LivsicError):
    """Periodic-point enumeration would exceed the configured cap."""

    def __init__(self, required, cap):
        self.required = int(required)
        self.cap = int(cap)
        super().__init__(
            f"enumeration needs {self.required} points but cap is {self.cap}; "
            f"raise the cap to at least {self.required}"
        )


class NotCertifiedError(LivsicError):
    """A sheared map was used in an experiment without a verified cone certificate."""


class MembershipError(LivsicError):
    """An observable is not a member of the class required by the certifier."""


class NoObstructionError(LivsicError):
    """No periodic orbit carries a nonzero obstruction, so no witness exists."""


class InsufficientCoverageError(LivsicError):
    """A grid function does not cover enough cells for the requested check."""
