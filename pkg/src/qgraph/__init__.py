"""Quantum graphs: quantum adjacency matrices, Choi projections, bimodules and
Cayley graphs of discrete quantum groups."""
from __future__ import annotations

__version__ = "0.1.0"
