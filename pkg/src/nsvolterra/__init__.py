"""Volterra fixed-point formulation of the periodic Navier-Stokes problem.

Modules:

* ``fields``: Fourier fields on the periodic box, transforms, norms
* ``greenop``: heat Green operator, kernel bounds, Riesz potentials
* ``projection``: Weyl decomposition and the pressure operator
* ``fraccalc``: fractional integrals, Abel inversion, Beta-gap rule
* ``solver``: Picard solve of the fixed point, residuals, manufactured data
* ``inequalities``: numerical checks of the integral inequalities
* ``export``: file formats
* ``cli``: command-line runner
"""
from .fields import DomainSpec, SpaceTimeField, SpectralField, SpectralVectorField, TimeGrid, TimeSeries
from .greenop import HeatParams
from .solver import ConvergenceError, ManufacturedSpec, SolutionBundle, SolveConfig, picard_solve, solve_inhomogeneous

__all__ = [
    "DomainSpec",
    "SpaceTimeField",
    "SpectralField",
    "SpectralVectorField",
    "TimeGrid",
    "TimeSeries",
    "HeatParams",
    "ConvergenceError",
    "ManufacturedSpec",
    "SolutionBundle",
    "SolveConfig",
    "picard_solve",
    "solve_inhomogeneous",
]
