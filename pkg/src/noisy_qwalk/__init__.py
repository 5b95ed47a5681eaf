"""Noisy discrete-time quantum walk on the integers with dichotomous coin noise."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CapacityError,
    ClosedFormInapplicable,
    DegenerateCoset,
    NegativeProbability,
    SupportOverflow,
)
from .evolution import NoiseSpec, cptp_step, diagonal_step, evolve  # noqa: E402
from .state import InitialCondition, LatticeWindow  # noqa: E402
