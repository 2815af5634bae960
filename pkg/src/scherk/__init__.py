"""Numerical gluing of a catenoidal neck into two parallel hyperplanes of R^n x T^m.

Submodules are imported on demand; ``scherk.cli`` is the command-line entry point.
"""

__version__ = "0.1.0"
