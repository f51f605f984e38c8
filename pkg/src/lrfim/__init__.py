"""Long-range random field Ising model laboratory.

Exact contour machinery, coarse-graining, and disorder analysis for the
l1 power-law Ising model on Z^d, validated at desk scale against
brute-force enumeration and Monte Carlo.
"""

__version__ = "0.1.0"

from .params import Params

__all__ = ["Params", "__version__"]
