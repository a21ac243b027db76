"""Visibility, rendering, and preprocessing tests."""

import math
import random

import numpy as np
import pytest

from ambimaze.core import (
    CellKind,
    EnvState,
    Heading,
    MazeSpec,
    Side,
)
from ambimaze.mapformat import default_spec, generate_emaze
from ambimaze.percept import (
    COLOR_REWARD,
    Frame,
    frame_to_ppm,
    preprocess,
    render,
    resize_area,
    reward_visible,
    supercover_between,
    visible_cells,
)


def open_room(size, fov=2 * math.pi, walls=()):
    """Borderless all-floor room for geometry tests (validation bypassed)."""
    cells = [[CellKind.FLOOR] * size for _ in range(size)]
    for (c, r) in walls:
        cells[r][c] = CellKind.WALL
    return MazeSpec(
        width=size,
        height=size,
        cells=tuple(tuple(row) for row in cells),
        spawn_position=(size // 2, size // 2),
        spawn_heading=Heading.N,
        fov=fov,
    )


def state_at(spec, pos, heading, context=Side.LEFT, gates=(False, False)):
    return EnvState(position=pos, heading=heading, context=context, gate_closed=gates)


# --- supercover geometry -----------------------------------------------------


def test_supercover_straight_lines():
    assert supercover_between((0, 0), (3, 0)) == [(1, 0), (2, 0)]
    assert supercover_between((0, 0), (0, 3)) == [(0, 1), (0, 2)]
    assert supercover_between((2, 2), (2, 2)) == []
    assert supercover_between((0, 0), (1, 1)) == []  # adjacent diagonal


def test_supercover_diagonal_skips_corner_cells():
    # Exact 45-degree line passes through lattice corners only.
    assert supercover_between((0, 0), (3, 3)) == [(1, 1), (2, 2)]


def test_supercover_knight_line():
    # (0,0) -> (2,1): crosses x=1 boundary at y=0.5 exactly? No: the segment
    # from (0.5,0.5) to (2.5,1.5) crosses x=1.0 at y=0.75 and x=2.0 at y=1.25.
    assert supercover_between((0, 0), (2, 1)) == [(1, 0), (1, 1)]


def test_supercover_symmetric():
    rng = random.Random(3)
    for _ in range(200):
        a = (rng.randrange(10), rng.randrange(10))
        b = (rng.randrange(10), rng.randrange(10))
        fwd = supercover_between(a, b)
        rev = supercover_between(b, a)
        assert set(fwd) == set(rev)


# --- visibility --------------------------------------------------------------


def test_own_cell_always_visible():
    spec = open_room(7, fov=0.1)
    state = state_at(spec, (3, 3), Heading.N)
    assert (3, 3) in visible_cells(spec, state)


def test_cell_behind_wall_hidden():
    spec = open_room(7, walls=[(3, 2)])
    state = state_at(spec, (3, 3), Heading.N)
    seen = visible_cells(spec, state)
    assert (3, 2) in seen  # the wall itself is visible
    assert (3, 1) not in seen and (3, 0) not in seen


def test_window_never_blocks_sight():
    spec = open_room(7, walls=[(3, 2)])
    cells = [list(row) for row in spec.cells]
    cells[2][3] = CellKind.WINDOW
    spec = MazeSpec(
        width=7, height=7, cells=tuple(tuple(r) for r in cells),
        spawn_position=(3, 3), spawn_heading=Heading.N,
    )
    state = state_at(spec, (3, 3), Heading.N)
    seen = visible_cells(spec, state)
    assert (3, 2) in seen and (3, 1) in seen and (3, 0) in seen


def test_closed_gate_blocks_sight_like_wall():
    spec = open_room(7)
    cells = [list(row) for row in spec.cells]
    cells[2][3] = CellKind.GATE_LEFT
    spec = MazeSpec(
        width=7, height=7, cells=tuple(tuple(r) for r in cells),
        spawn_position=(3, 3), spawn_heading=Heading.N,
    )
    open_state = state_at(spec, (3, 3), Heading.N)
    closed_state = state_at(spec, (3, 3), Heading.N, gates=(True, False))
    assert (3, 1) in visible_cells(spec, open_state)
    assert (3, 1) not in visible_cells(spec, closed_state)
    assert (3, 2) in visible_cells(spec, closed_state)  # gate cell itself seen


def test_fov_half_angle_boundary():
    # fov = 1.1*pi gives a half-angle of 0.55*pi.  Cells engineered at
    # angular offsets 0.54*pi (inside) and 0.56*pi (outside).
    size = 41
    spec = open_room(size, fov=1.1 * math.pi)
    center = (size // 2, size // 2)
    state = state_at(spec, center, Heading.E)
    seen = visible_cells(spec, state)
    inside = hidden = 0
    for pos in spec.positions():
        if pos == center:
            continue
        dc = pos[0] - center[0]
        dr = pos[1] - center[1]
        ang = math.acos(dc / math.hypot(dc, dr))
        if ang <= 0.54 * math.pi:
            assert pos in seen, (pos, ang)
            inside += 1
        elif ang >= 0.56 * math.pi:
            assert pos not in seen, (pos, ang)
            hidden += 1
    assert inside > 100 and hidden > 100


def test_fov_monotonicity_random_rooms():
    rng = random.Random(11)
    for _ in range(60):
        size = rng.randrange(5, 11)
        walls = {
            (rng.randrange(size), rng.randrange(size)) for _ in range(rng.randrange(0, 10))
        }
        pos = (rng.randrange(size), rng.randrange(size))
        walls.discard(pos)
        fov_small = rng.uniform(0.2, 1.8) * math.pi
        fov_big = min(2 * math.pi, fov_small + rng.uniform(0.0, 0.5) * math.pi)
        heading = Heading(rng.randrange(8))
        spec_small = open_room(size, fov_small, walls)
        spec_big = open_room(size, fov_big, walls)
        seen_small = visible_cells(spec_small, state_at(spec_small, pos, heading))
        seen_big = visible_cells(spec_big, state_at(spec_big, pos, heading))
        assert seen_small <= seen_big


def test_occlusion_monotonicity_random_rooms():
    rng = random.Random(12)
    for _ in range(60):
        size = rng.randrange(5, 11)
        walls = {
            (rng.randrange(size), rng.randrange(size)) for _ in range(rng.randrange(0, 8))
        }
        pos = (rng.randrange(size), rng.randrange(size))
        walls.discard(pos)
        extra = (rng.randrange(size), rng.randrange(size))
        if extra == pos:
            continue
        heading = Heading(rng.randrange(8))
        fov = rng.uniform(0.3, 2.0) * math.pi
        base = open_room(size, fov, walls)
        more = open_room(size, fov, set(walls) | {extra})
        seen_base = visible_cells(base, state_at(base, pos, heading))
        seen_more = visible_cells(more, state_at(more, pos, heading))
        assert seen_more - {extra} <= seen_base


# --- reward_visible ----------------------------------------------------------


def test_reward_visible_nothing_at_spawn():
    spec = default_spec()
    state = state_at(spec, spec.spawn_position, spec.spawn_heading)
    assert reward_visible(spec, state) is None
    state.context = Side.RIGHT
    assert reward_visible(spec, state) is None


def test_reward_visible_through_window():
    spec = default_spec()
    # Top of the middle prong, looking north: both sites in the 198-degree cone.
    mid_top = (spec.spawn_position[0], 1)
    for side in Side:
        state = state_at(spec, mid_top, Heading.N, context=side)
        assert reward_visible(spec, state) == side


def test_clue_reveals_context():
    rows = [
        "#######",
        "#..C..#",
        "#L...R#",
        "#[.S.]#",
        "#######",
    ]
    kinds = {k.value: k for k in CellKind}
    spec = MazeSpec(
        width=7,
        height=5,
        cells=tuple(tuple(kinds[ch] for ch in row) for row in rows),
        spawn_position=(3, 3),
        spawn_heading=Heading.N,
    )
    state = state_at(spec, (3, 3), Heading.N, context=Side.RIGHT)
    assert reward_visible(spec, state) == Side.RIGHT
    state.context = Side.LEFT
    assert reward_visible(spec, state) == Side.LEFT


# --- render ------------------------------------------------------------------


def test_render_deterministic():
    spec = default_spec()
    state = state_at(spec, spec.spawn_position, spec.spawn_heading)
    f1 = render(spec, state)
    f2 = render(spec, state)
    assert np.array_equal(f1.pixels, f2.pixels)
    assert frame_to_ppm(f1) == frame_to_ppm(f2)


def test_render_full_fov_no_black():
    spec = open_room(5)
    state = state_at(spec, (2, 2), Heading.N)
    frame = render(spec, state)
    assert not np.any(np.all(frame.pixels == 0, axis=2))


def test_render_no_reward_pixels_at_spawn():
    spec = default_spec()
    for seed in range(4):
        from ambimaze.core import reset_state

        state = reset_state(spec, seed)
        frame = render(spec, state)
        yellow = np.all(frame.pixels == COLOR_REWARD, axis=2)
        assert not yellow.any()


def test_render_reward_disc_when_visible():
    spec = default_spec()
    mid_top = (spec.spawn_position[0], 1)
    state = state_at(spec, mid_top, Heading.N, context=Side.LEFT)
    frame = render(spec, state)
    yellow = np.all(frame.pixels == COLOR_REWARD, axis=2)
    assert yellow.any()
    # All yellow pixels live inside the left reward cell.
    ys, xs = np.nonzero(yellow)
    cp = spec.cell_px
    assert set(zip(xs // cp, ys // cp)) == {(1, 1)}


def test_render_nonblack_only_within_visible_cells():
    spec = default_spec()
    rng = random.Random(5)
    from ambimaze.core import Action, MazeEnv

    env = MazeEnv(spec, seed=3)
    env.reset()
    for _ in range(40):
        env.step(Action(rng.randrange(4)))
        if env.state.done:
            env.reset()
    state = env.state
    frame = render(spec, state)
    seen = visible_cells(spec, state)
    cp = spec.cell_px
    nonblack = np.any(frame.pixels != 0, axis=2)
    ys, xs = np.nonzero(nonblack)
    for x, y in zip(xs, ys):
        assert (x // cp, y // cp) in seen


def test_reward_visible_consistent_with_render():
    spec = default_spec()
    rng = random.Random(8)
    from ambimaze.core import Action, MazeEnv

    env = MazeEnv(spec, seed=9)
    env.reset()
    for _ in range(300):
        env.step(Action(rng.randrange(4)))
        if env.state.done:
            env.reset()
        state = env.state
        frame = render(spec, state)
        yellow = np.all(frame.pixels == COLOR_REWARD, axis=2).any()
        assert yellow == (reward_visible(spec, state) is not None)


# --- preprocessing -----------------------------------------------------------


def test_preprocess_all_black():
    frame = Frame(40, 40, np.zeros((40, 40, 3), dtype=np.uint8))
    obs = preprocess(frame)
    assert obs.shape == (84, 84)
    assert np.all(obs == 0.0)


def test_preprocess_all_white():
    frame = Frame(40, 40, np.full((40, 40, 3), 255, dtype=np.uint8))
    obs = preprocess(frame)
    assert np.allclose(obs, 1.0, atol=1e-6)


def test_preprocess_half_black_half_white():
    pixels = np.zeros((50, 100, 3), dtype=np.uint8)
    pixels[:, 50:] = 255
    obs = preprocess(Frame(100, 50, pixels))
    assert abs(obs.mean() - 0.5) < 0.01


def test_preprocess_range_and_shape():
    spec = default_spec()
    state = state_at(spec, spec.spawn_position, spec.spawn_heading)
    obs = preprocess(render(spec, state))
    assert obs.shape == (84, 84)
    assert obs.min() >= 0.0 and obs.max() <= 1.0


def test_resize_area_preserves_mean():
    rng = np.random.default_rng(0)
    img = rng.random((30, 70))
    out = resize_area(img, 84, 84)
    assert abs(out.mean() - img.mean()) < 1e-9


def test_resize_area_exact_block_mean():
    img = np.arange(16.0).reshape(4, 4)
    out = resize_area(img, 2, 2)
    expected = np.array([[img[:2, :2].mean(), img[:2, 2:].mean()],
                         [img[2:, :2].mean(), img[2:, 2:].mean()]])
    assert np.allclose(out, expected)
