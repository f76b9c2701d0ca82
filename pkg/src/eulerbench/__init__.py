"""Multi-scheme high-order solver for the 2D Euler equations with a benchmark harness."""
from .core import ConservedField, GasModel, flux, primitives, rusanov_flux
from .errors import (DegenerateInput, EulerBenchError, InvalidMesh, MalformedReference,
                     NoCenterlineRow, NonPhysicalState, UnsupportedOrder, Unstable)
from .limiting import LimiterConfig, SlopeLimiter, minmod
from .mesh import Boundary, StructuredQuadMesh, build_uniform_mesh
from .schemes import SchemeConfig, SchemeKind, make_evaluator, residual

__version__ = "0.1.0"

__all__ = [
    "Boundary", "ConservedField", "DegenerateInput", "EulerBenchError", "GasModel",
    "InvalidMesh", "LimiterConfig", "MalformedReference", "NoCenterlineRow",
    "NonPhysicalState", "SchemeConfig", "SchemeKind", "SlopeLimiter", "StructuredQuadMesh",
    "Unstable", "UnsupportedOrder", "build_uniform_mesh", "flux", "make_evaluator",
    "minmod", "primitives", "residual", "rusanov_flux",
]
