"""Multi-bump solutions of partially singularly perturbed coupled NLS systems."""

__version__ = "0.1.0"
