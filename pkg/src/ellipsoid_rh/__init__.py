"""Rossby-Haurwitz stream functions on a rotating biaxial ellipsoid."""

from .errors import *  # noqa: F401,F403
from .geometry import EllipsoidGeometry, ThetaGrid, ZonalProfile

__version__ = "0.1.0"

__all__ = ["EllipsoidGeometry", "ThetaGrid", "ZonalProfile", "__version__"]
