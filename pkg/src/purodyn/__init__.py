"""Open-system dynamics through density-matrix purification.

A mixed system state is lifted to a pure system-bath state, propagated
unitarily under a shaped interaction, and reduced back. Interaction shapes
are fitted so that the reduced dynamics follow a chosen target.
"""

from . import channels, circuit, fit, lindblad, network, purified_dynamics, qmath, shapes, states
from .errors import PurodynError

__version__ = "0.1.0"

__all__ = [
    "PurodynError",
    "channels",
    "circuit",
    "fit",
    "lindblad",
    "network",
    "purified_dynamics",
    "qmath",
    "shapes",
    "states",
]
