"""Fast-path simulation helpers.

Training loops and the Monte-Carlo baseline need millions of environment
steps.  Dynamics and visibility are deterministic functions of a small
discrete state (position, heading, gate flags, context), so both can be
compiled once per spec into lookup tables built directly from
`step_state` / `reward_visible`.  An exhaustive parity test guarantees
the tables agree with the reference functions entry for entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ACTIONS,
    Action,
    CellKind,
    EnvState,
    Heading,
    MazeSpec,
    PASSABLE_KINDS,
    Side,
    step_state,
)
from .percept import visible_cells


class SightIndex:
    """Memoized answer to "what does a pose reveal about the context?".

    Visibility does not depend on the context itself, only on pose and
    gate state, so one visibility scan per pose yields a pair of flags:
    would the context be revealed if it were Left / if it were Right."""

    def __init__(self, spec: MazeSpec):
        self.spec = spec
        self._cache: dict[tuple, tuple[bool, bool]] = {}

    def flags(
        self,
        position: tuple[int, int],
        heading: Heading,
        gate_closed: tuple[bool, bool],
    ) -> tuple[bool, bool]:
        key = (position, heading, gate_closed)
        got = self._cache.get(key)
        if got is None:
            probe = EnvState(
                position=position,
                heading=heading,
                context=Side.LEFT,
                gate_closed=gate_closed,
            )
            seen = visible_cells(self.spec, probe)
            kinds = {self.spec.kind_at(p) for p in seen}
            clue = CellKind.CLUE in kinds
            got = (
                clue or CellKind.REWARD_LEFT in kinds,
                clue or CellKind.REWARD_RIGHT in kinds,
            )
            self._cache[key] = got
        return got

    def visible_side(self, state: EnvState) -> Side | None:
        """Same contract as `percept.reward_visible`, served from the cache."""
        revealed = self.flags(state.position, state.heading, state.gate_closed)
        return state.context if revealed[state.context] else None

    def reveals_both(
        self,
        position: tuple[int, int],
        heading: Heading,
        gate_closed: tuple[bool, bool] = (False, False),
    ) -> bool:
        """True when the pose discloses the context no matter which it is."""
        left, right = self.flags(position, heading, gate_closed)
        return left and right


@dataclass
class TransitionTable:
    """Dense (state, action) tables compiled from the reference dynamics.

    State index packs (cell, heading, gate bits, context); `next_state`,
    `reward` and `terminal` have shape (n_states, 4).  Truncation is not
    in the table because it depends on the step count, not the state."""

    spec: MazeSpec
    cells: list[tuple[int, int]]
    cell_index: dict[tuple[int, int], int]
    next_state: np.ndarray
    reward: np.ndarray
    terminal: np.ndarray

    @property
    def n_states(self) -> int:
        return len(self.cells) * 8 * 4 * 2

    def encode(self, state: EnvState) -> int:
        gates = int(state.gate_closed[0]) | (int(state.gate_closed[1]) << 1)
        return (
            ((self.cell_index[state.position] * 8 + int(state.heading)) * 4 + gates) * 2
            + int(state.context)
        )

    def decode(self, idx: int) -> EnvState:
        ctx = Side(idx % 2)
        idx //= 2
        gates = idx % 4
        idx //= 4
        heading = Heading(idx % 8)
        idx //= 8
        return EnvState(
            position=self.cells[idx],
            heading=heading,
            context=ctx,
            gate_closed=(bool(gates & 1), bool(gates & 2)),
        )

    def start_state(self, context: Side) -> int:
        return self.encode(
            EnvState(
                position=self.spec.spawn_position,
                heading=self.spec.spawn_heading,
                context=context,
                gate_closed=(False, False),
            )
        )


def build_transition_table(spec: MazeSpec) -> TransitionTable:
    cells = [p for p in spec.positions() if spec.kind_at(p) in PASSABLE_KINDS]
    cell_index = {p: i for i, p in enumerate(cells)}
    n = len(cells) * 8 * 4 * 2
    next_state = np.zeros((n, 4), dtype=np.int32)
    reward = np.zeros((n, 4), dtype=np.int8)
    terminal = np.zeros((n, 4), dtype=bool)

    table = TransitionTable(
        spec=spec,
        cells=cells,
        cell_index=cell_index,
        next_state=next_state,
        reward=reward,
        terminal=terminal,
    )
    for idx in range(n):
        state = table.decode(idx)
        for action in ACTIONS:
            nxt, result = step_state(spec, state, action)
            nxt.steps_taken = 0
            nxt.terminated = False
            nxt.truncated = False
            next_state[idx, action] = table.encode(nxt)
            reward[idx, action] = result.reward
            terminal[idx, action] = result.terminated
    return table


def random_agent_success_rate(
    spec: MazeSpec,
    episodes: int,
    max_moves: int | None = None,
    seed: int = 0,
) -> float:
    """Empirical success frequency of the uniform-random policy.

    Vectorizes all episodes over the compiled transition table; identical
    dynamics to stepping `MazeEnv` one action at a time, just batched."""
    if max_moves is None:
        max_moves = spec.max_moves
    table = build_transition_table(spec)
    rng = np.random.default_rng(seed)

    contexts = rng.integers(0, 2, size=episodes)
    starts = np.array([table.start_state(Side(c)) for c in (0, 1)], dtype=np.int32)
    states = starts[contexts]
    successes = 0
    alive = np.arange(episodes)

    for _ in range(max_moves):
        if alive.size == 0:
            break
        actions = rng.integers(0, 4, size=alive.size)
        rows = states[alive]
        done = table.terminal[rows, actions]
        successes += int(done.sum())
        states[alive] = table.next_state[rows, actions]
        alive = alive[~done]
    return successes / episodes
