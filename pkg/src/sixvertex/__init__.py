"""Six-vertex model with domain wall boundary conditions."""

from .core import (
    Configuration,
    MonotoneTriangle,
    Phase,
    PhaseParams,
    VertexType,
    WeightTriple,
    classify_phase,
    delta,
    params_from_weights,
    weights_from_params,
)

__version__ = "0.1.0"
