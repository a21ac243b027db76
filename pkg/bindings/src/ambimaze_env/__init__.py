"""Thin RL-framework-style bindings for the ambimaze environment.

Exposes the conventional `make` / `reset` / `step` / `render` surface on
top of the core package.  The wrapper adds no logic of its own: every
observation and reward is produced by the same maze core and perception
pipeline a native caller would use, which the parity test suite checks
bit for bit.

    env = ambimaze_env.make("default", obs="processed", seed=3)
    obs = env.reset()
    obs, reward, terminated, truncated = env.step(1)
"""

from __future__ import annotations

import numpy as np

from ambimaze.core import ACTIONS, Action, EpisodeOver, MazeEnv, MazeSpec
from ambimaze.mapformat import MapError, resolve_map
from ambimaze.percept import preprocess, render

__all__ = ["BoundEnv", "make", "EpisodeOver", "MapError"]

OBS_MODES = ("processed", "frame")


class BoundEnv:
    """One environment instance.

    `obs` mode "processed" yields the 84x84 grayscale float array in
    [0, 1]; "frame" yields the raw HxWx3 uint8 render.  Instances are
    single-caller; make several for parallel use."""

    def __init__(self, spec: MazeSpec, obs: str = "processed", seed: int = 0):
        if obs not in OBS_MODES:
            raise ValueError(f"obs must be one of {OBS_MODES}, got {obs!r}")
        self.spec = spec
        self.obs_mode = obs
        self._env: MazeEnv | None = MazeEnv(spec, seed=seed)
        self.action_count = len(ACTIONS)

    # -- lifecycle -------------------------------------------------------

    def close(self):
        self._env = None

    @property
    def closed(self) -> bool:
        return self._env is None

    def _require_open(self) -> MazeEnv:
        if self._env is None:
            raise RuntimeError("environment is closed")
        return self._env

    # -- standard surface --------------------------------------------------

    def reset(self, seed: int | None = None) -> np.ndarray:
        env = self._require_open()
        env.reset(seed=seed)
        return self._observation()

    def step(self, action: int) -> tuple[np.ndarray, int, bool, bool]:
        env = self._require_open()
        if action not in (0, 1, 2, 3):
            raise ValueError(f"action must be 0..3, got {action!r}")
        result = env.step(Action(action))
        return self._observation(), result.reward, result.terminated, result.truncated

    def render(self) -> np.ndarray:
        env = self._require_open()
        if env.state is None:
            raise RuntimeError("render() before reset()")
        return render(self.spec, env.state).pixels.copy()

    def _observation(self) -> np.ndarray:
        env = self._env
        frame = render(self.spec, env.state)
        if self.obs_mode == "frame":
            return frame.pixels.copy()
        return preprocess(frame)


def make(
    map_source: str = "default",
    obs: str = "processed",
    fov: float | None = None,
    max_moves: int | None = None,
    seed: int = 0,
) -> BoundEnv:
    """Build an environment from a map reference ("default" or a file
    path), with optional field-of-view and move-budget overrides."""
    try:
        spec = resolve_map(map_source)
    except FileNotFoundError:
        raise FileNotFoundError(f"map file not found: {map_source}") from None
    spec = spec.with_overrides(fov=fov, max_moves=max_moves)
    return BoundEnv(spec, obs=obs, seed=seed)
