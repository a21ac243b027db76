"""Maze environment state machine.

The environment is a cell grid with 8-way headings.  An episode hides a
context (reward on the left or on the right), lets the agent walk around
with four actions, permanently closes a branch gate behind the agent once
it commits to a branch, and pays reward 1 exactly when the agent steps
onto the reward site that matches the hidden context.

All stochasticity lives in the context draw at reset; transitions are
deterministic.  `reset_state` / `step_state` are pure functions so they
can be table-compiled and exhaustively checked; `MazeEnv` is the mutable
wrapper the training loops use.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from functools import lru_cache


class Side(IntEnum):
    LEFT = 0
    RIGHT = 1


class CellKind(Enum):
    """One kind per cell; the enum value is the map-format character."""

    FLOOR = "."
    WALL = "#"
    WINDOW = "="
    GATE_LEFT = "["
    GATE_RIGHT = "]"
    REWARD_LEFT = "L"
    REWARD_RIGHT = "R"
    CLUE = "C"
    SPAWN = "S"


# Wall and Window block movement; everything else can be stood on.
PASSABLE_KINDS = frozenset(
    {
        CellKind.FLOOR,
        CellKind.GATE_LEFT,
        CellKind.GATE_RIGHT,
        CellKind.REWARD_LEFT,
        CellKind.REWARD_RIGHT,
        CellKind.CLUE,
        CellKind.SPAWN,
    }
)

_GATE_SIDE = {CellKind.GATE_LEFT: Side.LEFT, CellKind.GATE_RIGHT: Side.RIGHT}
_REWARD_SIDE = {CellKind.REWARD_LEFT: Side.LEFT, CellKind.REWARD_RIGHT: Side.RIGHT}


def gate_side(kind: CellKind) -> Side | None:
    return _GATE_SIDE.get(kind)


def reward_side(kind: CellKind) -> Side | None:
    return _REWARD_SIDE.get(kind)


class Heading(IntEnum):
    """Eight compass directions in 45-degree steps, counterclockwise from east."""

    E = 0
    NE = 1
    N = 2
    NW = 3
    W = 4
    SW = 5
    S = 6
    SE = 7

    @property
    def offset(self) -> tuple[int, int]:
        """Grid step (dcol, drow); rows grow downward."""
        return _OFFSETS[self]

    def turned_left(self) -> "Heading":
        return Heading((self + 1) % 8)

    def turned_right(self) -> "Heading":
        return Heading((self - 1) % 8)

    @property
    def angle(self) -> float:
        """Radians, measured counterclockwise from east with y pointing up."""
        return self * (math.pi / 4.0)


_OFFSETS = {
    Heading.E: (1, 0),
    Heading.NE: (1, -1),
    Heading.N: (0, -1),
    Heading.NW: (-1, -1),
    Heading.W: (-1, 0),
    Heading.SW: (-1, 1),
    Heading.S: (0, 1),
    Heading.SE: (1, 1),
}


class Action(IntEnum):
    NOOP = 0
    FORWARD = 1
    TURN_LEFT = 2
    TURN_RIGHT = 3


ACTIONS = (Action.NOOP, Action.FORWARD, Action.TURN_LEFT, Action.TURN_RIGHT)

DEFAULT_FOV = 1.1 * math.pi
DEFAULT_MAX_MOVES = 250
DEFAULT_CELL_PX = 8
DEFAULT_SPAWN_HEADING = Heading.N


class InvalidSpecError(ValueError):
    """A maze description violates a structural invariant."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


class EpisodeOver(RuntimeError):
    """Raised when stepping an episode that already terminated or truncated."""


@dataclass(frozen=True)
class MazeSpec:
    """Static maze description.  Immutable and hashable so derived
    structures (branch membership, transition tables) can be cached."""

    width: int
    height: int
    cells: tuple[tuple[CellKind, ...], ...]
    spawn_position: tuple[int, int]
    spawn_heading: Heading
    fov: float = DEFAULT_FOV
    max_moves: int = DEFAULT_MAX_MOVES
    cell_px: int = DEFAULT_CELL_PX

    def kind_at(self, pos: tuple[int, int]) -> CellKind:
        return self.cells[pos[1]][pos[0]]

    def in_bounds(self, pos: tuple[int, int]) -> bool:
        return 0 <= pos[0] < self.width and 0 <= pos[1] < self.height

    def positions(self):
        for row in range(self.height):
            for col in range(self.width):
                yield (col, row)

    def with_overrides(self, fov: float | None = None, max_moves: int | None = None) -> "MazeSpec":
        out = self
        if fov is not None:
            out = replace(out, fov=fov)
        if max_moves is not None:
            out = replace(out, max_moves=max_moves)
        return out


@dataclass
class EnvState:
    """Dynamic episode state."""

    position: tuple[int, int]
    heading: Heading
    context: Side
    gate_closed: tuple[bool, bool]  # indexed by Side
    steps_taken: int = 0
    terminated: bool = False
    truncated: bool = False

    @property
    def done(self) -> bool:
        return self.terminated or self.truncated


@dataclass(frozen=True)
class StepResult:
    reward: int
    terminated: bool
    truncated: bool


def _passable_now(spec: MazeSpec, gate_closed: tuple[bool, bool], pos: tuple[int, int]) -> bool:
    if not spec.in_bounds(pos):
        return False
    kind = spec.kind_at(pos)
    if kind not in PASSABLE_KINDS:
        return False
    side = gate_side(kind)
    if side is not None and gate_closed[side]:
        return False
    return True


def legal_target(
    spec: MazeSpec, state: EnvState, heading: Heading
) -> tuple[int, int] | None:
    """Destination of a Forward move along `heading`, or None when blocked.

    Shared by `step_state` and the planners so movement legality has a
    single definition.  Diagonal moves require both orthogonally adjacent
    cells to be passable (no cutting corners through walls)."""
    dc, dr = heading.offset
    col, row = state.position
    target = (col + dc, row + dr)
    if not _passable_now(spec, state.gate_closed, target):
        return None
    if dc != 0 and dr != 0:
        if not _passable_now(spec, state.gate_closed, (col + dc, row)):
            return None
        if not _passable_now(spec, state.gate_closed, (col, row + dr)):
            return None
    return target


@lru_cache(maxsize=256)
def branch_cells(spec: MazeSpec, side: Side) -> frozenset[tuple[int, int]]:
    """Cells strictly inside branch `side`: everything reachable from that
    side's reward sites when the side's gates are treated as impassable."""
    blocked_gate = CellKind.GATE_LEFT if side == Side.LEFT else CellKind.GATE_RIGHT

    def passable(pos):
        if not spec.in_bounds(pos):
            return False
        kind = spec.kind_at(pos)
        return kind in PASSABLE_KINDS and kind is not blocked_gate

    seeds = [p for p in spec.positions() if reward_side(spec.kind_at(p)) == side]
    seen = set(p for p in seeds if passable(p))
    frontier = list(seen)
    while frontier:
        col, row = frontier.pop()
        for h in Heading:
            dc, dr = h.offset
            nxt = (col + dc, row + dr)
            if nxt in seen or not passable(nxt):
                continue
            if dc != 0 and dr != 0:
                if not passable((col + dc, row)) or not passable((col, row + dr)):
                    continue
            seen.add(nxt)
            frontier.append(nxt)
    return frozenset(seen)


def reachable_positions(
    spec: MazeSpec,
    start: tuple[int, int],
    gate_closed: tuple[bool, bool] = (False, False),
) -> frozenset[tuple[int, int]]:
    """Flood fill over Forward-move legality from `start` with the given
    gate state (turning is free, so position connectivity is what matters)."""
    seen = {start}
    frontier = [start]
    while frontier:
        col, row = frontier.pop()
        for h in Heading:
            dc, dr = h.offset
            nxt = (col + dc, row + dr)
            if nxt in seen or not _passable_now(spec, gate_closed, nxt):
                continue
            if dc != 0 and dr != 0:
                if not _passable_now(spec, gate_closed, (col + dc, row)):
                    continue
                if not _passable_now(spec, gate_closed, (col, row + dr)):
                    continue
            seen.add(nxt)
            frontier.append(nxt)
    return frozenset(seen)


def validate_spec(spec: MazeSpec) -> list[str]:
    """Structural invariant check; returns human-readable problems (empty if valid)."""
    problems: list[str] = []
    if spec.width < 1 or spec.height < 1:
        problems.append("grid must be at least 1x1")
        return problems
    if len(spec.cells) != spec.height or any(len(r) != spec.width for r in spec.cells):
        problems.append("cell grid does not match declared width/height")
        return problems

    spawns = [p for p in spec.positions() if spec.kind_at(p) is CellKind.SPAWN]
    if len(spawns) == 0:
        problems.append("no Spawn cell")
    elif len(spawns) > 1:
        problems.append(f"{len(spawns)} Spawn cells, expected exactly 1")
    elif spec.spawn_position != spawns[0]:
        problems.append("spawn_position does not match the Spawn cell")

    if not (0.0 < spec.fov <= 2.0 * math.pi + 1e-12):
        problems.append(f"fov must be in (0, 2*pi], got {spec.fov}")
    if spec.max_moves < 1:
        problems.append(f"max_moves must be >= 1, got {spec.max_moves}")
    if spec.cell_px < 1:
        problems.append(f"cell_px must be >= 1, got {spec.cell_px}")

    for side in Side:
        rewards = [p for p in spec.positions() if reward_side(spec.kind_at(p)) == side]
        if not rewards:
            problems.append(f"no RewardSite for side {side.name}")
            continue
        if len(spawns) != 1:
            continue  # reachability is meaningless without a unique spawn
        open_reach = reachable_positions(spec, spawns[0])
        gated_reach = reachable_positions(
            spec,
            spawns[0],
            gate_closed=(side == Side.LEFT, side == Side.RIGHT),
        )
        for p in rewards:
            if p not in open_reach:
                problems.append(f"RewardSite {side.name} at {p} unreachable from spawn")
            elif p in gated_reach:
                problems.append(
                    f"RewardSite {side.name} at {p} reachable without crossing a"
                    f" {side.name} gate (unguarded reward region)"
                )
    return problems


def check_spec(spec: MazeSpec) -> MazeSpec:
    problems = validate_spec(spec)
    if problems:
        raise InvalidSpecError(problems)
    return spec


def reset_state(spec: MazeSpec, seed: int) -> EnvState:
    """Fresh episode state; the hidden context is drawn uniformly from the seed."""
    check_spec(spec)
    rng = random.Random(seed)
    context = Side.LEFT if rng.random() < 0.5 else Side.RIGHT
    return EnvState(
        position=spec.spawn_position,
        heading=spec.spawn_heading,
        context=context,
        gate_closed=(False, False),
    )


def step_state(spec: MazeSpec, state: EnvState, action: Action) -> tuple[EnvState, StepResult]:
    """Apply one action.  Every call costs one step from the move budget,
    including Noop and blocked Forward moves."""
    if state.terminated or state.truncated:
        raise EpisodeOver("step() called on a finished episode")

    position = state.position
    heading = state.heading
    gate_closed = state.gate_closed
    reward = 0
    terminated = False

    if action == Action.TURN_LEFT:
        heading = heading.turned_left()
    elif action == Action.TURN_RIGHT:
        heading = heading.turned_right()
    elif action == Action.FORWARD:
        target = legal_target(spec, state, heading)
        if target is not None:
            old_kind = spec.kind_at(position)
            new_kind = spec.kind_at(target)
            side = gate_side(old_kind)
            if (
                side is not None
                and gate_side(new_kind) is None
                and target in branch_cells(spec, side)
            ):
                closed = list(gate_closed)
                closed[side] = True
                gate_closed = (closed[0], closed[1])
            position = target
            if reward_side(new_kind) == state.context:
                reward = 1
                terminated = True
    elif action != Action.NOOP:
        raise ValueError(f"unknown action {action!r}")

    steps_taken = state.steps_taken + 1
    truncated = (not terminated) and steps_taken >= spec.max_moves
    new_state = EnvState(
        position=position,
        heading=heading,
        context=state.context,
        gate_closed=gate_closed,
        steps_taken=steps_taken,
        terminated=terminated,
        truncated=truncated,
    )
    return new_state, StepResult(reward=reward, terminated=terminated, truncated=truncated)


class MazeEnv:
    """Mutable single-writer wrapper around the pure transition functions.

    Owns its random generator: `reset()` without an explicit seed draws the
    next episode seed from the instance generator, so a whole training run
    is a deterministic function of the construction seed."""

    def __init__(self, spec: MazeSpec, seed: int = 0):
        self.spec = check_spec(spec)
        self._rng = random.Random(seed)
        self.state: EnvState | None = None

    def reset(self, seed: int | None = None) -> EnvState:
        if seed is None:
            seed = self._rng.randrange(2**63)
        self.state = reset_state(self.spec, seed)
        return self.state

    def step(self, action: Action) -> StepResult:
        if self.state is None:
            raise EpisodeOver("step() before reset()")
        self.state, result = step_state(self.spec, self.state, action)
        return result
