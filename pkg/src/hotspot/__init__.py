"""Numerical laboratory for spike steady states of a crime hotspot reaction-diffusion model."""

from .errors import (
    ConsistencyError,
    DivergenceError,
    HotspotError,
    ParameterError,
    PositivityError,
    SeparationError,
    SingularSystemError,
)
from .model import (
    CoefficientField,
    FieldState,
    Grid1D,
    ModelParams,
    SpikePattern,
    check_params,
    isotropic_params,
    to_v,
    uniform_steady_state,
    validate_params,
)

__all__ = [
    "CoefficientField",
    "ConsistencyError",
    "DivergenceError",
    "FieldState",
    "Grid1D",
    "HotspotError",
    "ModelParams",
    "ParameterError",
    "PositivityError",
    "SeparationError",
    "SingularSystemError",
    "SpikePattern",
    "check_params",
    "isotropic_params",
    "to_v",
    "uniform_steady_state",
    "validate_params",
]
