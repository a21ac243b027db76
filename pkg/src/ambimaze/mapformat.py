"""Text format for maze layouts, plus the parametric E-maze generator.

Format: optional header lines ``key: value`` (keys: cell_px, fov,
max_moves, spawn_heading), then a blank separator line, then a
rectangular grid of single-character cell codes:

    ``#`` wall, ``.`` floor, ``=`` window, ``[`` left gate, ``]`` right
    gate, ``L``/``R`` reward sites, ``C`` clue, ``S`` spawn.

Files are UTF-8 with LF line endings.  The canonical form written by
`serialize` sorts header keys and omits keys whose value equals the
default; `parse(serialize(spec))` reproduces the spec exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

from .core import (
    DEFAULT_CELL_PX,
    DEFAULT_FOV,
    DEFAULT_MAX_MOVES,
    DEFAULT_SPAWN_HEADING,
    CellKind,
    Heading,
    MazeSpec,
    Side,
    reward_side,
    validate_spec,
)

_CODE_TO_KIND = {k.value: k for k in CellKind}

_HEADER_KEYS = ("cell_px", "fov", "max_moves", "spawn_heading")


@dataclass(frozen=True)
class Diagnostic:
    """A parse or validation problem anchored to a 1-based line/column."""

    line: int
    col: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.message}"


class MapError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass
class MapDocument:
    """Raw split of a map file: header entries plus the grid block."""

    header: dict[str, str] = field(default_factory=dict)
    grid: list[str] = field(default_factory=list)
    header_lines: dict[str, int] = field(default_factory=dict)
    grid_start_line: int = 1  # 1-based line number of the first grid row


def _split_document(text: str) -> tuple[MapDocument, list[Diagnostic]]:
    doc = MapDocument()
    diags: list[Diagnostic] = []
    lines = text.split("\n")
    i = 0
    # Header: maximal leading run of lines containing ':' (the grid
    # alphabet has no colon, so this is unambiguous).
    while i < len(lines) and ":" in lines[i]:
        raw = lines[i]
        key, _, value = raw.partition(":")
        key = key.strip()
        value = value.strip()
        if key in doc.header:
            diags.append(Diagnostic(i + 1, 1, f"duplicate header key '{key}'"))
        elif key not in _HEADER_KEYS:
            diags.append(Diagnostic(i + 1, 1, f"unknown header key '{key}'"))
        else:
            doc.header[key] = value
            doc.header_lines[key] = i + 1
        i += 1
    # Separator and surrounding blank lines.
    while i < len(lines) and lines[i].strip() == "":
        i += 1
    doc.grid_start_line = i + 1
    while i < len(lines):
        line = lines[i]
        if line.strip() == "":
            # Tolerate trailing blank lines; reject gaps inside the grid.
            j = i
            while j < len(lines) and lines[j].strip() == "":
                j += 1
            if j < len(lines):
                diags.append(Diagnostic(i + 1, 1, "blank line inside grid"))
            i = j
            continue
        doc.grid.append(line)
        i += 1
    return doc, diags


def _parse_header(doc: MapDocument, diags: list[Diagnostic]):
    fov = DEFAULT_FOV
    max_moves = DEFAULT_MAX_MOVES
    cell_px = DEFAULT_CELL_PX
    spawn_heading = DEFAULT_SPAWN_HEADING

    def line_of(key):
        return doc.header_lines.get(key, 1)

    if "fov" in doc.header:
        try:
            fov = float(doc.header["fov"])
        except ValueError:
            diags.append(Diagnostic(line_of("fov"), 1, f"fov is not a number: '{doc.header['fov']}'"))
    if "max_moves" in doc.header:
        try:
            max_moves = int(doc.header["max_moves"])
        except ValueError:
            diags.append(
                Diagnostic(line_of("max_moves"), 1, f"max_moves is not an integer: '{doc.header['max_moves']}'")
            )
    if "cell_px" in doc.header:
        try:
            cell_px = int(doc.header["cell_px"])
        except ValueError:
            diags.append(
                Diagnostic(line_of("cell_px"), 1, f"cell_px is not an integer: '{doc.header['cell_px']}'")
            )
    if "spawn_heading" in doc.header:
        name = doc.header["spawn_heading"]
        if name in Heading.__members__:
            spawn_heading = Heading[name]
        else:
            diags.append(Diagnostic(line_of("spawn_heading"), 1, f"unknown spawn_heading '{name}'"))
    return fov, max_moves, cell_px, spawn_heading


def parse(text: str | bytes) -> MazeSpec:
    """Parse and validate a map document.

    Raises `MapError` carrying every diagnostic found (positions are
    1-based line:col); never raises anything else, even on garbage input.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    doc, diags = _split_document(text)
    fov, max_moves, cell_px, spawn_heading = _parse_header(doc, diags)

    if not doc.grid:
        diags.append(Diagnostic(doc.grid_start_line, 1, "empty grid"))
        raise MapError(diags)

    width = len(doc.grid[0])
    rows: list[tuple[CellKind, ...]] = []
    spawn_positions: list[tuple[int, int]] = []
    for r, line in enumerate(doc.grid):
        line_no = doc.grid_start_line + r
        if len(line) != width:
            diags.append(
                Diagnostic(line_no, len(line) + 1, f"ragged grid: row has {len(line)} cells, expected {width}")
            )
            continue
        row: list[CellKind] = []
        for c, ch in enumerate(line):
            kind = _CODE_TO_KIND.get(ch)
            if kind is None:
                diags.append(Diagnostic(line_no, c + 1, f"unknown cell code '{ch}'"))
                kind = CellKind.WALL  # placeholder so later checks can continue
            if kind is CellKind.SPAWN:
                spawn_positions.append((c, r))
            row.append(kind)
        rows.append(tuple(row))

    if len(rows) != len(doc.grid):
        raise MapError(diags)

    if len(spawn_positions) == 0:
        diags.append(Diagnostic(doc.grid_start_line, 1, "no Spawn cell"))
    elif len(spawn_positions) > 1:
        for c, r in spawn_positions[1:]:
            diags.append(Diagnostic(doc.grid_start_line + r, c + 1, "multiple Spawn cells"))
    if diags:
        raise MapError(diags)

    spec = MazeSpec(
        width=width,
        height=len(rows),
        cells=tuple(rows),
        spawn_position=spawn_positions[0],
        spawn_heading=spawn_heading,
        fov=fov,
        max_moves=max_moves,
        cell_px=cell_px,
    )
    for problem in validate_spec(spec):
        pos = _problem_anchor(spec, problem)
        line = doc.grid_start_line + pos[1]
        diags.append(Diagnostic(line, pos[0] + 1, problem))
    if diags:
        raise MapError(diags)
    return spec


def _problem_anchor(spec: MazeSpec, problem: str) -> tuple[int, int]:
    # Anchor semantic problems to the cell they mention when one is named.
    for p in spec.positions():
        if str(p) in problem:
            return p
    return (0, 0)


def serialize(spec: MazeSpec) -> str:
    """Canonical text form: sorted header keys (defaults omitted), blank
    line, then the grid.  Runtime state (context, gates) is not part of a
    MazeSpec and therefore never appears."""
    header: dict[str, str] = {}
    if spec.cell_px != DEFAULT_CELL_PX:
        header["cell_px"] = str(spec.cell_px)
    if spec.fov != DEFAULT_FOV:
        header["fov"] = repr(spec.fov)
    if spec.max_moves != DEFAULT_MAX_MOVES:
        header["max_moves"] = str(spec.max_moves)
    if spec.spawn_heading != DEFAULT_SPAWN_HEADING:
        header["spawn_heading"] = spec.spawn_heading.name

    lines = [f"{k}: {header[k]}" for k in sorted(header)]
    if lines:
        lines.append("")
    for row in spec.cells:
        lines.append("".join(kind.value for kind in row))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class EmazeParams:
    """Knobs for the generated E layout.

    `prong_length` is the corridor length of each prong, `spine_length`
    the width of the connecting corridor (odd, so the middle prong is
    centered), `corridor_width` the thickness of every corridor (odd, to
    preserve mirror symmetry).  The defaults are frozen so the scripted
    solver needs 49 actions on the generated maze (the calibration
    anchor is an optimum of about 50 moves).
    """

    prong_length: int = 14
    spine_length: int = 7
    corridor_width: int = 1

    def check(self):
        problems = []
        if self.prong_length < 3:
            problems.append(f"prong_length must be >= 3, got {self.prong_length}")
        if self.spine_length < 5 or self.spine_length % 2 == 0:
            problems.append(f"spine_length must be odd and >= 5, got {self.spine_length}")
        if self.corridor_width < 1 or self.corridor_width % 2 == 0:
            problems.append(f"corridor_width must be odd and >= 1, got {self.corridor_width}")
        if self.spine_length < 3 * self.corridor_width + 2:
            problems.append("spine too short for three separated prongs")
        if problems:
            raise ValueError("; ".join(problems))


DEFAULT_EMAZE_PARAMS = EmazeParams()


def generate_emaze(params: EmazeParams = DEFAULT_EMAZE_PARAMS) -> MazeSpec:
    """Build the standard layout: three parallel prongs rising from a
    spine, reward sites at the far ends of the side prongs behind gates,
    and window bands near the far end of the middle prong through which
    both reward sites can be seen.

    The spawn sits mid-way along the middle prong facing the spine, so
    the rewards are out of view until the agent walks to the windows.
    """
    params.check()
    w = params.corridor_width
    width = params.spine_length + 2
    height = params.prong_length + w + 2

    grid = [[CellKind.WALL] * width for _ in range(height)]

    def carve(cols, rows):
        for r in rows:
            for c in cols:
                grid[r][c] = CellKind.FLOOR

    spine_rows = range(height - 1 - w, height - 1)
    carve(range(1, width - 1), spine_rows)

    left_cols = range(1, 1 + w)
    mid_first = 1 + (params.spine_length - w) // 2
    mid_cols = range(mid_first, mid_first + w)
    right_cols = range(width - 1 - w, width - 1)
    prong_rows = range(1, 1 + params.prong_length)
    for cols in (left_cols, mid_cols, right_cols):
        carve(cols, prong_rows)

    # Reward sites at the far (top) end of each side prong.
    grid[1][1 + w // 2] = CellKind.REWARD_LEFT
    grid[1][width - 1 - w + w // 2] = CellKind.REWARD_RIGHT

    # Gates span the full corridor where each side prong meets the spine.
    gate_row = params.prong_length
    for c in left_cols:
        grid[gate_row][c] = CellKind.GATE_LEFT
    for c in right_cols:
        grid[gate_row][c] = CellKind.GATE_RIGHT

    # Window bands in the top rows between the middle prong and each side
    # prong, so the sight line from the middle prong's far end crosses
    # nothing but glass on its way to the reward sites.
    for r in range(1, 1 + w):
        for c in range(1 + w, mid_first):
            grid[r][c] = CellKind.WINDOW
        for c in range(mid_first + w, width - 1 - w):
            grid[r][c] = CellKind.WINDOW

    spawn = (mid_first + w // 2, (1 + params.prong_length) // 2)
    grid[spawn[1]][spawn[0]] = CellKind.SPAWN

    spec = MazeSpec(
        width=width,
        height=height,
        cells=tuple(tuple(row) for row in grid),
        spawn_position=spawn,
        spawn_heading=Heading.S,
    )
    problems = validate_spec(spec)
    if problems:  # construction bug, not a user error
        raise AssertionError(f"generated maze failed validation: {problems}")
    return spec


def load_map(path: str) -> MazeSpec:
    with open(path, "rb") as fh:
        return parse(fh.read())


def default_spec() -> MazeSpec:
    """The frozen default E-maze shipped with the package."""
    data = resources.files("ambimaze.data").joinpath("default.map").read_bytes()
    return parse(data)


def resolve_map(source: str) -> MazeSpec:
    """Map a CLI/config map reference ('default' or a path) to a spec."""
    if source == "default":
        return default_spec()
    return load_map(source)
