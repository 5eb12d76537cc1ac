"""High-order upwind summation-by-parts discretizations with flux vector splitting."""

__version__ = "0.1.0"
