"""Three inelastic hard spheres: exact event-driven flow, the single-collision
map, the nearly-linear collapse construction and the triangular spectrum."""

__version__ = "0.1.0"

from .core import (TOL, CollapseLabError, FrameError, InvalidArgument, InvalidState, NormalTangential,
                   RelativeConfig, Restitution, SystemState, Tolerances, decompose, from_relative_frame,
                   to_relative_frame)
from .engine import CollapseCriteria, CollisionEvent, Limits, SimulationOutcome, apply_collision, next_collision, run
from .mapping import MapStep, apply_map, collision_time, iterate_map, swap_roles, zk_parameter

__all__ = [
    "TOL", "CollapseLabError", "FrameError", "InvalidArgument", "InvalidState", "NormalTangential",
    "RelativeConfig", "Restitution", "SystemState", "Tolerances", "decompose", "from_relative_frame",
    "to_relative_frame", "CollapseCriteria", "CollisionEvent", "Limits", "SimulationOutcome", "apply_collision",
    "next_collision", "run", "MapStep", "apply_map", "collision_time", "iterate_map", "swap_roles", "zk_parameter",
]
