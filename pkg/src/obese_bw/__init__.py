"""Bandwidth coefficient of obese timed automata.

The pipeline turns a timed automaton into a weighted corner-point graph
and reports the coefficient alpha such that the epsilon-bandwidth grows
like alpha/epsilon, together with the speedy spots responsible for it.
"""

from .errors import (InternalConsistencyError, ObeseBwError, ParseError,
                     ResourceError, ValidationError)
from .growth import growth_rate
from .metrics import pseudo_distance
from .ratio import bandwidth

__version__ = "0.1.0"

__all__ = [
    "bandwidth", "growth_rate", "pseudo_distance",
    "ObeseBwError", "ParseError", "ValidationError", "ResourceError",
    "InternalConsistencyError", "__version__",
]
