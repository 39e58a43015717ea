"""Constrained two-stage diffusion for labeled 3D spatial graphs."""

__version__ = "0.1.0"

from .graph import GraphError, OmegaMatrix, SpatialGraph, ViolationReport, check_omega, hierarchy_omega
from .projector import InterventionLog, ProjectorConfig

__all__ = [
    "GraphError",
    "InterventionLog",
    "OmegaMatrix",
    "ProjectorConfig",
    "SpatialGraph",
    "ViolationReport",
    "check_omega",
    "hierarchy_omega",
]
