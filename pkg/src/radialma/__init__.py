"""Radial reduction of invariant Monge-Ampere operators on symmetric spaces.

Subpackages:

- ``liealg``: dense matrix Lie algebra engine (exp, brackets, Killing form,
  polar and Cartan decompositions).
- ``catalog``: shipped symmetric-space descriptors and restricted roots.
- ``radialops``: radial metrics, Hessians, Monge-Ampere operators, and the
  reduction factor, plus the geodesic finite-difference oracle.
- ``complexcheck``: finite-difference verification of the complex-to-real
  reduction on the complexified models.
- ``solver``: quadrature and damped-Newton solvers for the reduced equation.
- ``cli``: batch front end (config in, reports and CSV tables out).
"""

from . import catalog, complexcheck, liealg, radialops, solver

__all__ = ["catalog", "complexcheck", "liealg", "radialops", "solver"]

__version__ = "0.1.0"
