"""Command line interface.

Subcommands: `run` (experiment from a config file), `map check`
(parse/validate), `render` (PPM frame per step of an action script),
`oracle` (plan lengths + verification), `play` (interactive ASCII
debugger), `baseline-random` (Monte-Carlo success rate).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .agents.baseline import PlanningError, oracle_plan
from .core import Action, EnvState, MazeEnv, Side, step_state
from .harness import parse_config, run_experiment
from .mapformat import MapError, resolve_map
from .percept import render, visible_cells, write_ppm
from .simulate import SightIndex, random_agent_success_rate


def _load_map(source: str):
    try:
        return resolve_map(source)
    except FileNotFoundError:
        print(f"error: map file not found: {source}", file=sys.stderr)
        raise SystemExit(2)
    except MapError as err:
        for diag in err.diagnostics:
            print(f"{source}:{diag}", file=sys.stderr)
        raise SystemExit(2)


def cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    try:
        config = parse_config(text)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    result = run_experiment(config)
    final = [s.final_rolling for s in result.series]
    print(f"wrote {result.out_path}")
    print(f"final rolling average per seed: {final}")
    for event in result.events:
        print(event)
    return 0


def cmd_map_check(args) -> int:
    try:
        spec = resolve_map(args.path)
    except FileNotFoundError:
        print(f"error: map file not found: {args.path}", file=sys.stderr)
        return 2
    except MapError as err:
        for diag in err.diagnostics:
            print(f"{args.path}:{diag}", file=sys.stderr)
        return 2
    print(f"ok: {spec.width}x{spec.height} cells, fov={spec.fov:.4f}, max_moves={spec.max_moves}")
    return 0


def cmd_render(args) -> int:
    spec = _load_map(args.map)
    try:
        actions = [Action(int(a)) for a in args.actions.split(",") if a.strip() != ""]
    except ValueError:
        print("error: actions must be a comma-separated list of 0-3", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    env = MazeEnv(spec, seed=args.seed)
    env.reset(seed=args.seed)
    write_ppm(render(spec, env.state), str(out / "step_000.ppm"))
    frames = 1
    for i, action in enumerate(actions, 1):
        result = env.step(action)
        write_ppm(render(spec, env.state), str(out / f"step_{i:03d}.ppm"))
        frames += 1
        if result.terminated or result.truncated:
            break
    print(f"wrote {frames} frames to {out}")
    return 0


def cmd_oracle(args) -> int:
    spec = _load_map(args.map)
    ok = True
    for side in Side:
        try:
            plan = oracle_plan(spec, side)
        except PlanningError as err:
            print(f"{side.name}: planning failed: {err}", file=sys.stderr)
            ok = False
            continue
        state = EnvState(
            position=spec.spawn_position,
            heading=spec.spawn_heading,
            context=side,
            gate_closed=(False, False),
        )
        reward = 0
        for action in plan:
            state, result = step_state(spec, state, action)
            reward += result.reward
            if state.terminated or state.truncated:
                break
        success = state.terminated and reward == 1
        print(f"{side.name}: plan length {len(plan)}, success {success}")
        ok = ok and success
    return 0 if ok else 1


_GLYPHS = {
    "WALL": "#",
    "WINDOW": "=",
    "FLOOR": ".",
    "SPAWN": ".",
    "CLUE": "C",
    "GATE_LEFT": "[",
    "GATE_RIGHT": "]",
}


def _ascii_view(spec, state) -> str:
    seen = visible_cells(spec, state)
    rows = []
    for r in range(spec.height):
        row = []
        for c in range(spec.width):
            pos = (c, r)
            if pos == state.position:
                row.append("@")
                continue
            if pos not in seen:
                row.append(" ")
                continue
            kind = spec.kind_at(pos)
            name = kind.name
            if name.startswith("REWARD"):
                side = Side.LEFT if name.endswith("LEFT") else Side.RIGHT
                row.append("*" if side == state.context else ".")
            elif name.startswith("GATE") and state.gate_closed[
                Side.LEFT if name.endswith("LEFT") else Side.RIGHT
            ]:
                row.append("#")
            else:
                row.append(_GLYPHS[name])
        rows.append("".join(row))
    return "\n".join(rows)


def cmd_play(args) -> int:
    spec = _load_map(args.map)
    env = MazeEnv(spec, seed=args.seed)
    env.reset()
    keys = {"s": Action.NOOP, "w": Action.FORWARD, "a": Action.TURN_LEFT, "d": Action.TURN_RIGHT}
    print("keys: w=forward a=left d=right s=noop q=quit")
    while True:
        print(_ascii_view(spec, env.state))
        print(f"steps {env.state.steps_taken}/{spec.max_moves} heading {env.state.heading.name}")
        try:
            key = input("> ").strip().lower()[:1]
        except EOFError:
            return 0
        if key == "q":
            return 0
        if key not in keys:
            print("unknown key")
            continue
        result = env.step(keys[key])
        if result.terminated:
            print(_ascii_view(spec, env.state))
            print("reward! episode over")
            return 0
        if result.truncated:
            print("out of moves")
            return 0


def cmd_baseline_random(args) -> int:
    spec = _load_map(args.map)
    rate = random_agent_success_rate(
        spec, episodes=args.episodes, max_moves=args.max_moves, seed=args.seed
    )
    print(f"success rate: {rate:.4f} over {args.episodes} episodes "
          f"(max_moves={args.max_moves or spec.max_moves})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ambimaze", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("map", help="map utilities")
    map_sub = p.add_subparsers(dest="map_command", required=True)
    pc = map_sub.add_parser("check", help="parse and validate a map file")
    pc.add_argument("path")
    pc.set_defaults(func=cmd_map_check)

    p = sub.add_parser("render", help="write one PPM frame per action")
    p.add_argument("--map", default="default")
    p.add_argument("--actions", default="")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("oracle", help="plan lengths and success per context")
    p.add_argument("--map", default="default")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("play", help="interactive ASCII session")
    p.add_argument("--map", default="default")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("baseline-random", help="Monte-Carlo random-agent success rate")
    p.add_argument("--map", default="default")
    p.add_argument("--episodes", type=int, default=10_000)
    p.add_argument("--max-moves", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_baseline_random)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
