"""Common agent contract shared by the episode loop and every policy."""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ..core import Action, Heading, Side


class Belief(IntEnum):
    """What the agent has resolved about the hidden context so far.

    Within an episode the only legal transitions are Unknown -> Left,
    Unknown -> Right, or staying put; a new episode resets to Unknown."""

    UNKNOWN = 0
    LEFT = 1
    RIGHT = 2

    @staticmethod
    def from_side(side: Side | None) -> "Belief":
        if side is None:
            return Belief.UNKNOWN
        return Belief.LEFT if side == Side.LEFT else Belief.RIGHT


@dataclass
class StepView:
    """What a policy is allowed to see at one timestep.

    `visible_side` is the context side when the reward (or a clue) is in
    view, else None.  `pixels` carries the 84x84 preprocessed observation
    and is only populated for policies that declare `needs_pixels`."""

    position: tuple[int, int]
    heading: Heading
    visible_side: Side | None
    pixels: np.ndarray | None = None


@dataclass
class Transition:
    view: StepView
    action: Action
    reward: int
    next_view: StepView
    terminated: bool
    truncated: bool


class Policy:
    """Base policy: act on a view, optionally learn from transitions."""

    needs_pixels = False

    def episode_start(self):
        pass

    def act(self, view: StepView, rng: random.Random) -> Action:
        raise NotImplementedError

    def observe(self, transition: Transition):
        pass

    def episode_end(self, episode_return: int):
        pass
