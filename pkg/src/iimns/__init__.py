"""Immersed-interface finite differences for incompressible flow on a periodic grid.

Modules
-------
grid         periodic node grid and difference operators
spectral     Fourier multipliers, Poisson solvers, projections, exact max-norms
interface    closed curves, side classification, crossings, jump data
corrections  sparse correction fields for stencils that straddle the interface
solver       the time-stepping scheme
harness      manufactured cases, studies and the command-line driver
"""

from .errors import (
    ConfigError,
    ConstructionInvalid,
    Diverged,
    GeometryDegenerate,
    IIMError,
    MissingJumps,
    MissingTangentialDerivative,
    MultipleCrossings,
    NotInRange,
    NotMeanZero,
    RootNotBracketed,
)
from .grid import GridFunction, GridSpec, VectorGridFunction
from .interface import Circle, Ellipse, JumpSet, Motion, SampledCurve
from .solver import Solver, SolverConfig, SolverState, run

__version__ = "0.1.0"

__all__ = [
    "Circle", "ConfigError", "ConstructionInvalid", "Diverged", "Ellipse", "GeometryDegenerate",
    "GridFunction", "GridSpec", "IIMError", "JumpSet", "MissingJumps", "MissingTangentialDerivative",
    "Motion", "MultipleCrossings", "NotInRange", "NotMeanZero", "RootNotBracketed", "SampledCurve",
    "Solver", "SolverConfig", "SolverState", "VectorGridFunction", "run",
]
