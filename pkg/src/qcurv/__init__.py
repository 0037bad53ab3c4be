"""Numerical laboratory for radially symmetric conformal metrics e^{2u}|dx|^2 on R^n."""

__version__ = "0.1.0"
