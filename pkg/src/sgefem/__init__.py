"""Mixed 10-DoF / P1 finite elements for strain gradient elasticity."""

__version__ = "0.1.0"
