"""Numerical lab for planar Hele-Shaw flow (Laplacian growth).

Weak solutions through an obstacle problem, classical front tracking,
Cauchy transforms and Schwarz functions, complex moments, quadrature
domains and the moment-flow identity.
"""

from .core import DensityField, MarkerCurve, ScalarGrid, circle, ellipse

__all__ = ["DensityField", "MarkerCurve", "ScalarGrid", "circle", "ellipse"]
