"""Simulation, SDP and bound toolkit for attacks on quantum position verification."""

__version__ = "0.1.0"

from . import bounds, montecarlo, protocols, qcore, sdp, strategies  # noqa: E402
from ._backend import NAME as BACKEND  # noqa: E402

__all__ = ["BACKEND", "bounds", "montecarlo", "protocols", "qcore", "sdp", "strategies", "__version__"]
