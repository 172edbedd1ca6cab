"""Numerical laboratory for the one-dimensional long-range Ising chain in a field."""

__version__ = "0.1.0"

from .model import BoundaryCondition, ModelParams, Side, Window  # noqa: E402

__all__ = ["__version__", "BoundaryCondition", "ModelParams", "Side", "Window"]
