"""Grey-box pendulum identification workbench.

Fits a linear pendulum model plus a Hammerstein-Chebyshev residual to a
simulated nonlinear pendulum and numerically certifies that the residual
class is orthogonal to the physical model class (and to its parameter
sensitivity) on sinusoidal witness inputs.
"""

__version__ = "0.1.0"

from .excitation import ExcitationSpec
from .physical import PhysicalParams
from .plant import PlantParams, PlantState
from .residual import ResidualParams
from .signals import Grid, Signal

__all__ = [
    "ExcitationSpec",
    "Grid",
    "PhysicalParams",
    "PlantParams",
    "PlantState",
    "ResidualParams",
    "Signal",
    "__version__",
]
