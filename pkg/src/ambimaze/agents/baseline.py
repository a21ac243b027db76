"""Non-neural baselines: uniform random, a BFS scripted solver, and
tabular Q-learning in belief-free and belief-augmented variants.

The tabular pair is the interesting one: both key their Q-table on
(position, heading), but the augmented variant appends its resolved
belief about the hidden context.  Only the latter can represent "go left
after seeing the reward on the left", which is the whole point of the
benchmark.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..core import (
    ACTIONS,
    Action,
    EnvState,
    MazeSpec,
    Side,
    step_state,
)
from ..simulate import SightIndex
from .base import Belief, Policy, StepView, Transition


def random_policy(rng: random.Random) -> Action:
    """Uniform draw over the four actions."""
    return ACTIONS[rng.randrange(4)]


class RandomPolicy(Policy):
    def act(self, view: StepView, rng: random.Random) -> Action:
        return random_policy(rng)


class PlanningError(RuntimeError):
    """The map offers no pose that reveals the context, or no path onward."""


def _pose_key(state: EnvState) -> tuple:
    return (state.position, state.heading, state.gate_closed)


def _bfs(spec: MazeSpec, start: EnvState, goal) -> list[Action]:
    """Shortest action sequence (Forward/turns, Noop excluded) from
    `start` to a state satisfying `goal`, searching over the real
    transition function so gate closings are honored.  Terminated states
    are tested against the goal but never expanded."""
    moves = (Action.FORWARD, Action.TURN_LEFT, Action.TURN_RIGHT)
    if goal(start):
        return []
    seen = {_pose_key(start)}
    queue = deque([(start, [])])
    while queue:
        state, path = queue.popleft()
        for action in moves:
            nxt, result = step_state(spec, state, action)
            nxt.steps_taken = 0  # search ignores the move budget
            nxt.truncated = False
            key = _pose_key(nxt)
            if key in seen:
                continue
            seen.add(key)
            if goal(nxt):
                return path + [action]
            if not result.terminated:
                queue.append((nxt, path + [action]))
    raise PlanningError("BFS goal unreachable")


def plan_to_reveal(spec: MazeSpec, sight: SightIndex | None = None) -> list[Action]:
    """Phase one: shortest route to a pose from which the context is
    disclosed whichever side it is (both reward sites in view, or a clue).

    The search simulates with a fixed context; movement is context-free,
    so this only matters on degenerate maps whose shortest reveal path
    runs across a reward site."""
    sight = sight or SightIndex(spec)
    start = EnvState(
        position=spec.spawn_position,
        heading=spec.spawn_heading,
        context=Side.LEFT,
        gate_closed=(False, False),
    )

    def revealed(state: EnvState) -> bool:
        return sight.reveals_both(state.position, state.heading, state.gate_closed)

    try:
        return _bfs(spec, start, revealed)
    except PlanningError:
        raise PlanningError("no pose reveals the reward side for every context")


def plan_to_reward(spec: MazeSpec, start: EnvState, side: Side) -> list[Action]:
    """Phase two: shortest route from `start` onto the `side` reward site."""
    probe = EnvState(
        position=start.position,
        heading=start.heading,
        context=side,
        gate_closed=start.gate_closed,
    )

    def at_reward(state: EnvState) -> bool:
        return state.terminated

    try:
        return _bfs(spec, probe, at_reward)
    except PlanningError:
        raise PlanningError(f"reward site {side.name} unreachable from reveal pose")


def _replay(spec: MazeSpec, actions: list[Action], context: Side) -> tuple[EnvState, int]:
    """Run `actions` from spawn; stops early if the episode terminates.
    Returns the final state and the number of actions consumed."""
    state = EnvState(
        position=spec.spawn_position,
        heading=spec.spawn_heading,
        context=context,
        gate_closed=(False, False),
    )
    for i, action in enumerate(actions):
        state, _ = step_state(spec, state, action)
        state.steps_taken = 0
        if state.terminated:
            return state, i + 1
    return state, len(actions)


def oracle_plan(spec: MazeSpec, context: Side) -> list[Action]:
    """Full scripted solution for one context: walk to a revealing pose,
    then walk to the disclosed reward site."""
    phase1 = plan_to_reveal(spec)
    mid, used = _replay(spec, phase1, context)
    if mid.terminated:
        return phase1[:used]
    phase2 = plan_to_reward(spec, mid, context)
    return phase1 + phase2


class OraclePolicy(Policy):
    """Executes the BFS plan; reads the revealed side at the end of phase
    one and switches to the matching phase-two script."""

    def __init__(self, spec: MazeSpec):
        self.spec = spec
        self._phase1 = plan_to_reveal(spec)
        # Movement is context-free, so the reveal pose is the same for
        # both contexts unless phase one itself ended the episode.
        mid, _ = _replay(spec, self._phase1, Side.LEFT)
        if mid.terminated:
            self._phase2 = {side: [] for side in Side}
        else:
            self._phase2 = {side: plan_to_reward(spec, mid, side) for side in Side}
        self._queue: list[Action] = []
        self._revealed: Side | None = None

    def episode_start(self):
        self._queue = list(self._phase1)
        self._revealed = None

    def act(self, view: StepView, rng: random.Random) -> Action:
        if not self._queue:
            if self._revealed is None:
                if view.visible_side is None:
                    raise PlanningError("reveal pose did not disclose the context")
                self._revealed = view.visible_side
                self._queue = list(self._phase2[self._revealed])
            if not self._queue:
                return Action.NOOP
        return self._queue.pop(0)


@dataclass
class TabularConfig:
    alpha: float = 0.1
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    anneal_fraction: float = 0.5  # of the total step budget


class TabularQPolicy(Policy):
    """One-step Q-learning over discrete keys.

    Belief-free keys are (position, heading); the belief-augmented
    variant appends the resolved context belief, which is updated from
    `visible_side` and never reverts within an episode.  Epsilon is
    annealed linearly over the first half of the step budget; greedy
    ties break toward the lowest action index for reproducibility."""

    def __init__(
        self,
        belief_augmented: bool,
        total_steps: int,
        config: TabularConfig | None = None,
    ):
        self.belief_augmented = belief_augmented
        self.total_steps = total_steps
        self.config = config or TabularConfig()
        self.q: dict[tuple, np.ndarray] = {}
        self.steps_done = 0
        self._belief = Belief.UNKNOWN

    def episode_start(self):
        self._belief = Belief.UNKNOWN

    @property
    def epsilon(self) -> float:
        cfg = self.config
        horizon = max(1, int(self.total_steps * cfg.anneal_fraction))
        frac = min(1.0, self.steps_done / horizon)
        return cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start)

    def _update_belief(self, view: StepView) -> Belief:
        if self._belief is Belief.UNKNOWN and view.visible_side is not None:
            self._belief = Belief.from_side(view.visible_side)
        return self._belief

    def key(self, view: StepView, belief: Belief) -> tuple:
        if self.belief_augmented:
            return (view.position, int(view.heading), int(belief))
        return (view.position, int(view.heading))

    def values(self, key: tuple) -> np.ndarray:
        row = self.q.get(key)
        if row is None:
            row = np.zeros(4)
            self.q[key] = row
        return row

    def act(self, view: StepView, rng: random.Random) -> Action:
        belief = self._update_belief(view)
        self.steps_done += 1
        if rng.random() < self.epsilon:
            return ACTIONS[rng.randrange(4)]
        row = self.q.get(self.key(view, belief))
        if row is None:
            return Action.NOOP  # all-zero values; lowest index wins
        return ACTIONS[int(np.argmax(row))]

    def observe(self, transition: Transition):
        cfg = self.config
        key = self.key(transition.view, self._belief)
        next_belief = self._update_belief(transition.next_view)
        done = transition.terminated or transition.truncated
        if done:
            target = float(transition.reward)
        else:
            nxt = self.q.get(self.key(transition.next_view, next_belief))
            bootstrap = float(nxt.max()) if nxt is not None else 0.0
            target = transition.reward + cfg.gamma * bootstrap
        row = self.values(key)
        a = int(transition.action)
        row[a] += cfg.alpha * (target - row[a])


def save_q_table(policy: TabularQPolicy, path: str):
    """Text checkpoint: one row per key, `key a0 a1 a2 a3`."""
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(policy.q):
            flat = [str(key[0][0]), str(key[0][1])] + [str(int(k)) for k in key[1:]]
            values = " ".join(repr(float(v)) for v in policy.q[key])
            fh.write(f"{','.join(flat)} {values}\n")


def load_q_table(path: str, belief_augmented: bool, total_steps: int = 1) -> TabularQPolicy:
    policy = TabularQPolicy(belief_augmented, total_steps)
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            key_txt, *values = line.split()
            parts = [int(x) for x in key_txt.split(",")]
            if belief_augmented:
                key = ((parts[0], parts[1]), parts[2], parts[3])
            else:
                key = ((parts[0], parts[1]), parts[2])
            policy.q[key] = np.array([float(v) for v in values])
    return policy
