"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad input: malformed network, mismatched dimensions, invalid config."""


class CapacityError(RuntimeError):
    """An exact enumeration would exceed its hard size limit."""


class MissingPinningError(ValidationError):
    """GFF requested on a network without a positive pinning conductance."""


class NotASuperpositionError(ValueError):
    """Trace reconstruction produced significantly negative mass."""


class UnsupportedMethodError(ValueError):
    """Requested sampling method does not exist for the model kind."""


class TruncationError(RuntimeError):
    """Loop catalog cutoff leaves more than the tolerated neglected mass."""


class DegenerateStateError(RuntimeError):
    """Jump-process state collapsed numerically (vanishing correlation)."""


class EnvelopeViolationError(AssertionError):
    """A thinning proposal saw a true rate above its envelope (internal bug)."""


class RunawayError(RuntimeError):
    """Event count exceeded the safety cap (internal envelope bug)."""


class InvariantViolationError(AssertionError):
    """A cross-checked internal identity failed (must never fire)."""
