"""tetforge: tetrahedral mesh generation, optimization, and adaptive refinement."""

__version__ = "0.1.0"
