"""Uncertainty quantification for density-driven flow in porous media.

Subpackages: :mod:`elderuq.flow` (finite-volume solver) and
:mod:`elderuq.campaign` (realization campaigns, CLI).  The stochastic tools
live in :mod:`elderuq.quadrature` and :mod:`elderuq.gpc`.
"""

__version__ = "0.1.0"
