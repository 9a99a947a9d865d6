"""Time-fractional Cahn-Hilliard solver library.

Core pieces: Grunwald-Letnikov convolution quadrature in time
(:mod:`.quadrature`), Q1 finite elements on structured grids
(:mod:`.grid`), convex-splitting Newton time stepping for the plain,
Ohta-Kawasaki and tumor model variants (:mod:`.solver`), scalar
diagnostics (:mod:`.observables`), and variance-based Sobol sensitivity
analysis (:mod:`.sensitivity`).
"""

from .grid import ScalarField, StructuredGrid
from .observables import ObservableSet, TimeSeries
from .physics import (ConstantMobility, DegenerateMobility, FloryHuggins,
                      Landau)
from .quadrature import GLWeights, HistoryBuffer, gl_weights
from .solver import (CahnHilliard, ModelSpec, OhtaKawasaki, Tumor, run)

__all__ = [
    "CahnHilliard", "ConstantMobility", "DegenerateMobility",
    "FloryHuggins", "GLWeights", "HistoryBuffer", "Landau", "ModelSpec",
    "ObservableSet", "OhtaKawasaki", "ScalarField", "StructuredGrid",
    "TimeSeries", "Tumor", "gl_weights", "run",
]

__version__ = "0.1.0"
