"""Visibility, top-down rendering, and observation preprocessing.

A cell is visible when it sits inside the agent's view cone and the
straight segment between cell centers crosses no wall and no closed
gate.  Windows block movement but never sight.  Rendering paints the
spec's fixed palette onto a pixel raster and blacks out everything the
agent cannot see; preprocessing reproduces the usual
grayscale-and-rescale pipeline at 84x84.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CellKind, EnvState, Heading, MazeSpec, Side, gate_side, reward_side

COLOR_BLACK = (0, 0, 0)
COLOR_WALL = (200, 0, 0)
COLOR_WINDOW = (0, 0, 220)
COLOR_FLOOR = (230, 230, 230)
COLOR_CLUE_LEFT = (0, 0, 220)
COLOR_CLUE_RIGHT = (0, 200, 0)
COLOR_REWARD = (255, 220, 0)
COLOR_AGENT = (128, 128, 128)

OBS_SIZE = 84


@dataclass
class Frame:
    """Rendered RGB raster; `pixels` is row-major uint8 with shape (h, w, 3)."""

    width_px: int
    height_px: int
    pixels: np.ndarray


def supercover_between(
    a: tuple[int, int], b: tuple[int, int]
) -> list[tuple[int, int]]:
    """Cells whose interior the open segment between the centers of `a`
    and `b` crosses, excluding both endpoints.

    Integer-exact grid walk.  When the segment passes exactly through a
    cell corner the walk steps diagonally, so the two cells that only
    touch the segment at that corner are skipped (corner-grazing does not
    block sight).
    """
    (c1, r1), (c2, r2) = a, b
    nx = abs(c2 - c1)
    ny = abs(r2 - r1)
    sx = 1 if c2 > c1 else -1
    sy = 1 if r2 > r1 else -1
    x, y = c1, r1
    ix = iy = 0
    cells: list[tuple[int, int]] = []
    while ix < nx or iy < ny:
        # Next boundary crossing: compare t_x=(ix+0.5)/nx with t_y=(iy+0.5)/ny
        # by cross-multiplication; equality is an exact corner pass.
        tx = (2 * ix + 1) * ny
        ty = (2 * iy + 1) * nx
        if tx == ty:
            x += sx
            y += sy
            ix += 1
            iy += 1
        elif nx == 0 or (ny != 0 and tx > ty):
            y += sy
            iy += 1
        else:
            x += sx
            ix += 1
        if (x, y) != a and (x, y) != b:
            cells.append((x, y))
    return cells


def _blocks_sight(spec: MazeSpec, state: EnvState, pos: tuple[int, int]) -> bool:
    kind = spec.kind_at(pos)
    if kind is CellKind.WALL:
        return True
    side = gate_side(kind)
    return side is not None and state.gate_closed[side]


def visible_cells(spec: MazeSpec, state: EnvState) -> set[tuple[int, int]]:
    """All cells the agent currently sees.

    Both tests run per candidate cell: the angle between the heading and
    the center-to-center ray must be at most fov/2, and the ray's
    supercover walk must hit no wall or closed gate (the candidate itself
    may be one; that is how walls get seen)."""
    ac, ar = state.position
    hc, hr = state.heading.offset
    hnorm = math.hypot(hc, hr)
    cos_limit = math.cos(min(spec.fov / 2.0, math.pi))
    out = {state.position}
    for pos in spec.positions():
        if pos == state.position:
            continue
        dc = pos[0] - ac
        dr = pos[1] - ar
        dot = hc * dc + hr * dr
        cosang = dot / (hnorm * math.hypot(dc, dr))
        if cosang < cos_limit - 1e-12:
            continue
        if any(_blocks_sight(spec, state, cell) for cell in supercover_between(state.position, pos)):
            continue
        out.add(pos)
    return out


def reward_visible(spec: MazeSpec, state: EnvState) -> Side | None:
    """The context side when the agent can currently tell where the reward
    is: either the active reward site itself or a clue cell is in view."""
    seen = visible_cells(spec, state)
    for pos in seen:
        kind = spec.kind_at(pos)
        if kind is CellKind.CLUE or reward_side(kind) == state.context:
            return state.context
    return None


def _cell_color(kind: CellKind, state: EnvState) -> tuple[int, int, int]:
    if kind is CellKind.WALL:
        return COLOR_WALL
    if kind is CellKind.WINDOW:
        return COLOR_WINDOW
    if kind is CellKind.CLUE:
        return COLOR_CLUE_LEFT if state.context == Side.LEFT else COLOR_CLUE_RIGHT
    side = gate_side(kind)
    if side is not None and state.gate_closed[side]:
        return COLOR_WALL
    return COLOR_FLOOR


def render(spec: MazeSpec, state: EnvState) -> Frame:
    """Deterministic top-down raster of what the agent sees.

    Unseen cells stay black; the active reward site (when visible) gets a
    centered yellow disc, and the agent is drawn as a grey triangle whose
    apex points along its heading."""
    cp = spec.cell_px
    h_px = spec.height * cp
    w_px = spec.width * cp
    pixels = np.zeros((h_px, w_px, 3), dtype=np.uint8)
    seen = visible_cells(spec, state)

    for (col, row) in seen:
        kind = spec.kind_at((col, row))
        pixels[row * cp : (row + 1) * cp, col * cp : (col + 1) * cp] = _cell_color(kind, state)
        if reward_side(kind) == state.context:
            _draw_disc(pixels, col, row, cp)

    _draw_agent(pixels, state.position, state.heading, cp)
    return Frame(width_px=w_px, height_px=h_px, pixels=pixels)


def _draw_disc(pixels: np.ndarray, col: int, row: int, cp: int):
    cx = (col + 0.5) * cp
    cy = (row + 0.5) * cp
    radius = 0.375 * cp  # disc diameter is 0.75 of the cell
    ys = np.arange(row * cp, (row + 1) * cp) + 0.5
    xs = np.arange(col * cp, (col + 1) * cp) + 0.5
    dist2 = (ys[:, None] - cy) ** 2 + (xs[None, :] - cx) ** 2
    mask = dist2 <= radius * radius
    region = pixels[row * cp : (row + 1) * cp, col * cp : (col + 1) * cp]
    region[mask] = COLOR_REWARD


def _draw_agent(pixels: np.ndarray, position: tuple[int, int], heading: Heading, cp: int):
    col, row = position
    cx = (col + 0.5) * cp
    cy = (row + 0.5) * cp
    radius = 0.45 * cp
    theta = heading.angle
    # Screen y grows downward, so the world angle's sine flips sign.
    apex = (cx + radius * math.cos(theta), cy - radius * math.sin(theta))
    base1 = (
        cx + radius * math.cos(theta + math.radians(140)),
        cy - radius * math.sin(theta + math.radians(140)),
    )
    base2 = (
        cx + radius * math.cos(theta - math.radians(140)),
        cy - radius * math.sin(theta - math.radians(140)),
    )
    ys = np.arange(row * cp, (row + 1) * cp) + 0.5
    xs = np.arange(col * cp, (col + 1) * cp) + 0.5
    px = np.broadcast_to(xs[None, :], (cp, cp))
    py = np.broadcast_to(ys[:, None], (cp, cp))

    def edge(p, q):
        return (q[0] - p[0]) * (py - p[1]) - (q[1] - p[1]) * (px - p[0])

    e0 = edge(apex, base1)
    e1 = edge(base1, base2)
    e2 = edge(base2, apex)
    eps = 1e-9
    inside = ((e0 >= -eps) & (e1 >= -eps) & (e2 >= -eps)) | (
        (e0 <= eps) & (e1 <= eps) & (e2 <= eps)
    )
    region = pixels[row * cp : (row + 1) * cp, col * cp : (col + 1) * cp]
    region[inside] = COLOR_AGENT


def _resize_weights(n_src: int, n_out: int) -> np.ndarray:
    """Row-stochastic matrix whose (i, j) entry is the fraction of output
    bin i covered by source bin j (exact area averaging)."""
    w = np.zeros((n_out, n_src))
    scale = n_src / n_out
    for i in range(n_out):
        lo = i * scale
        hi = (i + 1) * scale
        j0 = int(math.floor(lo))
        j1 = min(int(math.ceil(hi)), n_src)
        for j in range(j0, j1):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                w[i, j] = overlap
    return w / scale


def resize_area(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Area-average resize of a 2-D array (each output pixel is the mean
    over its source rectangle); exact for both up- and downscaling."""
    wy = _resize_weights(img.shape[0], out_h)
    wx = _resize_weights(img.shape[1], out_w)
    return wy @ img @ wx.T


def preprocess(frame: Frame) -> np.ndarray:
    """84x84 grayscale observation in [0, 1] (luminance then area resize)."""
    rgb = frame.pixels.astype(np.float64)
    gray = (0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]) / 255.0
    return resize_area(gray, OBS_SIZE, OBS_SIZE)


def frame_to_ppm(frame: Frame) -> bytes:
    header = f"P6\n{frame.width_px} {frame.height_px}\n255\n".encode("ascii")
    return header + frame.pixels.tobytes()


def write_ppm(frame: Frame, path: str):
    with open(path, "wb") as fh:
        fh.write(frame_to_ppm(frame))


class FrameCache:
    """Memoized render->preprocess pipeline.

    Frames depend only on (position, heading, gate state, context), so a
    training run touches a few thousand distinct observations at most."""

    def __init__(self, spec: MazeSpec):
        self.spec = spec
        self._cache: dict[tuple, np.ndarray] = {}

    def obs84(self, state: EnvState) -> np.ndarray:
        key = (state.position, state.heading, state.gate_closed, state.context)
        obs = self._cache.get(key)
        if obs is None:
            obs = preprocess(render(self.spec, state))
            obs.setflags(write=False)
            self._cache[key] = obs
        return obs
