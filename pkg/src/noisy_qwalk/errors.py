"""Exception types shared across the package."""


class QWalkError(Exception):
    """Base class for all errors raised by noisy_qwalk."""


class DegenerateCoset(QWalkError):
    """The unitary has a vanishing diagonal, so its coset coordinate is infinite."""


class SupportOverflow(QWalkError):
    """Probability mass would leave the finite lattice window."""


class CapacityError(QWalkError):
    """Requested lattice window exceeds the configured memory cap."""


class ClosedFormInapplicable(QWalkError):
    """Closed-form moments only hold for the unbiased walk (q_plus = 1/2)."""


class NegativeProbability(QWalkError):
    """A probability fell below the round-off tolerance."""
