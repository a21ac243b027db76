"""Partially observable E-maze benchmark and desk-scale baseline agents."""

from .core import (
    ACTIONS,
    Action,
    CellKind,
    EnvState,
    EpisodeOver,
    Heading,
    InvalidSpecError,
    MazeEnv,
    MazeSpec,
    Side,
    StepResult,
    legal_target,
    reset_state,
    step_state,
)
from .mapformat import (
    Diagnostic,
    EmazeParams,
    MapError,
    default_spec,
    generate_emaze,
    load_map,
    parse,
    resolve_map,
    serialize,
)
from .percept import Frame, preprocess, render, reward_visible, visible_cells

__version__ = "0.1.0"

__all__ = [
    "ACTIONS",
    "Action",
    "CellKind",
    "Diagnostic",
    "EmazeParams",
    "EnvState",
    "EpisodeOver",
    "Frame",
    "Heading",
    "InvalidSpecError",
    "MapError",
    "MazeEnv",
    "MazeSpec",
    "Side",
    "StepResult",
    "default_spec",
    "generate_emaze",
    "legal_target",
    "load_map",
    "parse",
    "preprocess",
    "render",
    "reset_state",
    "resolve_map",
    "reward_visible",
    "serialize",
    "step_state",
    "visible_cells",
]
