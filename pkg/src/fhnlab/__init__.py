"""Numerical laboratory for periodic travelling waves of the FitzHugh-Nagumo system.

Subpackages by task: wave trains and their wavenumber family (``waves``),
Bloch spectra and dispersion coefficients (``bloch``), spatial Floquet theory
and resolvent checks (``floquet``), the linear semigroup decomposition
(``semigroup``), nonlinear runs with phase modulation (``modulation``), and
the configuration, caching and reporting layer (``config``, ``store``,
``pipeline``, ``report``, ``cli``).
"""

from .model import FhnParams, FieldPair, Grid

__all__ = ["FhnParams", "FieldPair", "Grid"]
__version__ = "0.1.0"
