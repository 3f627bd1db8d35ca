"""Fusion-in-decoder extractive rationale pipeline."""

from ._fidex import *  # noqa: F401,F403
from ._fidex import __doc__  # noqa: F401

__version__ = "0.1.0"
