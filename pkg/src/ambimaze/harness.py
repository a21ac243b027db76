"""Experiment orchestration: seeding, episode loops, rolling-average
metrics, multi-seed aggregation, and artifact persistence.

A run is a pure function of its configuration: per-seed environments and
agents derive every random stream from `base_seed + k`, so re-running a
config reproduces the output files byte for byte.  Reported performance
is the trailing mean of episode returns over a 100-episode window,
averaged (with min/max bands) across 10 seeds by default.
"""

from __future__ import annotations

import os
import random
import time
from dataclasses import dataclass, field
from pathlib import Path

from .agents.base import Policy, StepView, Transition
from .agents.baseline import OraclePolicy, RandomPolicy, TabularConfig, TabularQPolicy
from .agents.deep import DqnAgent, DqnConfig, PpoConfig, ppo_training_run
from .agents.tabular_fast import train_tabular
from .core import MazeEnv, MazeSpec
from .mapformat import resolve_map
from .percept import FrameCache
from .simulate import SightIndex

AGENT_KINDS = (
    "random",
    "oracle",
    "tabular",
    "tabular-belief",
    "dqn",
    "ppo",
    "ppo-rnd",
    "ppo-icm",
)


def rolling_average(returns: list, window: int = 100) -> list[float]:
    """Trailing mean over `window` episodes; before a full window exists,
    the mean over everything so far (so the series starts at episode 1)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    out = []
    acc = 0.0
    for i, r in enumerate(returns):
        acc += r
        if i >= window:
            acc -= returns[i - window]
            out.append(acc / window)
        else:
            out.append(acc / (i + 1))
    return out


@dataclass
class MetricSeries:
    returns: list[int] = field(default_factory=list)
    steps: list[int] = field(default_factory=list)
    rolling: list[float] = field(default_factory=list)
    timestamps: list[float] = field(default_factory=list)
    intrinsic_off_episode: int | None = None

    @property
    def final_rolling(self) -> float:
        return self.rolling[-1] if self.rolling else 0.0

    def to_csv(self) -> str:
        lines = ["episode,return,steps,rolling_avg"]
        for i, (r, s, avg) in enumerate(zip(self.returns, self.steps, self.rolling), 1):
            lines.append(f"{i},{r},{s},{avg!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "MetricSeries":
        series = cls()
        lines = text.strip().split("\n")
        if lines and lines[0] != "episode,return,steps,rolling_avg":
            raise ValueError("unexpected CSV header")
        for line in lines[1:]:
            _, r, s, avg = line.split(",")
            series.returns.append(int(r))
            series.steps.append(int(s))
            series.rolling.append(float(avg))
        return series


def run_policy_episodes(
    spec: MazeSpec,
    policy: Policy,
    *,
    total_steps: int | None = None,
    episodes: int | None = None,
    seed: int = 0,
    window: int = 100,
) -> MetricSeries:
    """Generic sequential training/evaluation loop.

    Budgets: stops before the first episode that would start beyond
    `total_steps`, or once `episodes` episodes completed (whichever is
    given; both may be).  Episode contexts come from the environment's
    own seeded generator; the policy sees a `random.Random` derived from
    the same seed."""
    if total_steps is None and episodes is None:
        raise ValueError("need a step or episode budget")
    env = MazeEnv(spec, seed=seed)
    agent_rng = random.Random(f"agent-{seed}")
    sight = SightIndex(spec)
    frames = FrameCache(spec) if policy.needs_pixels else None
    series = MetricSeries()
    steps_done = 0

    def make_view() -> StepView:
        state = env.state
        return StepView(
            position=state.position,
            heading=state.heading,
            visible_side=sight.visible_side(state),
            pixels=frames.obs84(state) if frames is not None else None,
        )

    while (episodes is None or len(series.returns) < episodes) and (
        total_steps is None or steps_done < total_steps
    ):
        env.reset()
        policy.episode_start()
        view = make_view()
        ep_return = 0
        ep_steps = 0
        while True:
            action = policy.act(view, agent_rng)
            result = env.step(action)
            steps_done += 1
            ep_steps += 1
            next_view = make_view()
            policy.observe(
                Transition(view, action, result.reward, next_view,
                           result.terminated, result.truncated)
            )
            view = next_view
            ep_return += result.reward
            if result.terminated or result.truncated:
                break
        policy.episode_end(ep_return)
        series.returns.append(ep_return)
        series.steps.append(ep_steps)
        series.timestamps.append(time.time())
    series.rolling = rolling_average(series.returns, window)
    return series


# --- experiment configuration ---------------------------------------------------

_CONFIG_DEFAULTS = {
    "name": "",
    "map": "default",
    "agent": "random",
    "seeds": "10",
    "episodes": "",
    "total_steps": "",
    "updates": "",
    "window": "100",
    "out": "runs",
    "base_seed": "0",
    "paper_scale": "false",
    # agent knobs (only the ones the chosen agent reads are used)
    "alpha": "0.1",
    "gamma": "0.99",
    "epsilon_start": "1.0",
    "epsilon_end": "0.05",
    "lr": "",
    "encoder": "compact",
    "orthogonal": "false",
    "ortho_gain_out": "3.0",
    "beta": "0.1",
    "off_threshold": "0.2",
}


@dataclass
class ExperimentConfig:
    name: str
    map_source: str
    agent: str
    seeds: int
    episodes: int | None
    total_steps: int | None
    updates: int | None
    window: int
    out_dir: str
    base_seed: int
    paper_scale: bool
    params: dict[str, str]

    def resolved_text(self) -> str:
        entries = dict(self.params)
        entries.update(
            {
                "name": self.name,
                "map": self.map_source,
                "agent": self.agent,
                "seeds": str(self.seeds),
                "episodes": "" if self.episodes is None else str(self.episodes),
                "total_steps": "" if self.total_steps is None else str(self.total_steps),
                "updates": "" if self.updates is None else str(self.updates),
                "window": str(self.window),
                "out": self.out_dir,
                "base_seed": str(self.base_seed),
                "paper_scale": "true" if self.paper_scale else "false",
            }
        )
        return "".join(f"{k} = {entries[k]}\n" for k in sorted(entries))


def parse_config(text: str) -> ExperimentConfig:
    """Flat `key = value` format; unknown keys are an error."""
    values = dict(_CONFIG_DEFAULTS)
    for lineno, raw in enumerate(text.split("\n"), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in values:
            raise ValueError(f"config line {lineno}: unknown key '{key}'")
        values[key] = value.strip()

    def opt_int(key):
        return int(values[key]) if values[key] else None

    config = ExperimentConfig(
        name=values["name"] or values["agent"],
        map_source=values["map"],
        agent=values["agent"],
        seeds=int(values["seeds"]),
        episodes=opt_int("episodes"),
        total_steps=opt_int("total_steps"),
        updates=opt_int("updates"),
        window=int(values["window"]),
        out_dir=values["out"],
        base_seed=int(values["base_seed"]),
        paper_scale=values["paper_scale"].lower() == "true",
        params={
            k: values[k]
            for k in (
                "alpha", "gamma", "epsilon_start", "epsilon_end", "lr",
                "encoder", "orthogonal", "ortho_gain_out", "beta", "off_threshold",
            )
        },
    )
    if config.agent not in AGENT_KINDS:
        raise ValueError(f"unknown agent '{config.agent}'")
    if config.seeds < 1:
        raise ValueError("seeds must be >= 1")
    if config.window < 1:
        raise ValueError("window must be >= 1")
    if config.agent.startswith("ppo"):
        if config.updates is None:
            raise ValueError("ppo agents need an 'updates' budget")
    elif config.episodes is None and config.total_steps is None:
        raise ValueError("need an 'episodes' or 'total_steps' budget")
    return config


def _tabular_config(params: dict) -> TabularConfig:
    return TabularConfig(
        alpha=float(params["alpha"]),
        gamma=float(params["gamma"]),
        epsilon_start=float(params["epsilon_start"]),
        epsilon_end=float(params["epsilon_end"]),
    )


def _ppo_config(config: ExperimentConfig) -> PpoConfig:
    p = config.params
    intrinsic = {"ppo": None, "ppo-rnd": "rnd", "ppo-icm": "icm"}[config.agent]
    return PpoConfig(
        lr=float(p["lr"]) if p["lr"] else 2.5e-4,
        gamma=float(p["gamma"]),
        encoder=p["encoder"],
        orthogonal=p["orthogonal"].lower() == "true",
        ortho_gain_out=float(p["ortho_gain_out"]),
        intrinsic=intrinsic,
        beta=float(p["beta"]),
        off_threshold=float(p["off_threshold"]),
    )


def run_seed(config: ExperimentConfig, spec: MazeSpec, seed: int) -> tuple[MetricSeries, list[dict]]:
    """One training run; returns its metric series and loss rows (deep only)."""
    kind = config.agent
    if kind in ("tabular", "tabular-belief"):
        returns, steps = train_tabular(
            spec,
            belief_augmented=kind == "tabular-belief",
            total_steps=config.total_steps or (config.episodes or 0) * spec.max_moves,
            seed=seed,
            config=_tabular_config(config.params),
        )
        series = MetricSeries(returns=returns, steps=steps)
        series.rolling = rolling_average(returns, config.window)
        return series, []
    if kind.startswith("ppo"):
        result = ppo_training_run(
            spec, _ppo_config(config), seed=seed, n_updates=config.updates,
            window=config.window,
        )
        series = MetricSeries(
            returns=result.returns,
            steps=result.steps,
            intrinsic_off_episode=result.intrinsic_off_episode,
        )
        series.rolling = rolling_average(result.returns, config.window)
        return series, result.losses
    if kind == "random":
        policy: Policy = RandomPolicy()
    elif kind == "oracle":
        policy = OraclePolicy(spec)
    elif kind == "dqn":
        dqn_cfg = DqnConfig(encoder=config.params["encoder"])
        if config.paper_scale:
            dqn_cfg = dqn_cfg.paper_scale()
        budget = config.total_steps or (config.episodes or 0) * spec.max_moves
        policy = DqnAgent(spec, dqn_cfg, total_steps=budget, seed=seed)
    else:
        raise ValueError(f"unknown agent '{kind}'")
    series = run_policy_episodes(
        spec, policy,
        total_steps=config.total_steps,
        episodes=config.episodes,
        seed=seed,
        window=config.window,
    )
    return series, []


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    series: list[MetricSeries]
    aggregate: list[tuple[float, float, float]]  # (mean, min, max) per episode
    events: list[str]
    out_path: Path | None = None


def aggregate_rolling(series: list[MetricSeries]) -> list[tuple[float, float, float]]:
    """Pointwise mean/min/max of the rolling averages, truncated to the
    shortest series so every row aggregates all seeds."""
    if not series:
        return []
    n = min(len(s.rolling) for s in series)
    out = []
    for i in range(n):
        vals = [s.rolling[i] for s in series]
        out.append((sum(vals) / len(vals), min(vals), max(vals)))
    return out


def aggregate_to_csv(rows: list[tuple[float, float, float]]) -> str:
    lines = ["episode,mean,min,max"]
    for i, (mean, lo, hi) in enumerate(rows, 1):
        lines.append(f"{i},{mean!r},{lo!r},{hi!r}")
    return "\n".join(lines) + "\n"


def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Train every seed, aggregate, and (by default) persist artifacts to
    `<out>/<name>/`: per-seed CSVs, the aggregate CSV, the resolved
    config, per-update loss CSVs for deep agents, and an events log."""
    spec = resolve_map(config.map_source)
    series_list: list[MetricSeries] = []
    losses_list: list[list[dict]] = []
    events: list[str] = []
    for k in range(config.seeds):
        seed = config.base_seed + k
        series, losses = run_seed(config, spec, seed)
        series_list.append(series)
        losses_list.append(losses)
        if series.intrinsic_off_episode is not None:
            events.append(
                f"seed={seed} intrinsic_off_episode={series.intrinsic_off_episode}"
            )
    rows = aggregate_rolling(series_list)
    result = ExperimentResult(config=config, series=series_list, aggregate=rows, events=events)
    if write:
        out_root = os.environ.get("AMBIMAZE_OUT", config.out_dir)
        out = Path(out_root) / config.name
        out.mkdir(parents=True, exist_ok=True)
        for k, series in enumerate(series_list):
            (out / f"seed_{config.base_seed + k}.csv").write_text(series.to_csv())
        (out / "aggregate.csv").write_text(aggregate_to_csv(rows))
        (out / "config.resolved").write_text(config.resolved_text())
        if events:
            (out / "events.txt").write_text("".join(e + "\n" for e in events))
        for k, losses in enumerate(losses_list):
            if losses:
                lines = ["update,policy_loss,value_loss,entropy,intrinsic_mean"]
                for u, row in enumerate(losses, 1):
                    lines.append(
                        f"{u},{row['policy_loss']!r},{row['value_loss']!r},"
                        f"{row['entropy']!r},{row['intrinsic_mean']!r}"
                    )
                (out / f"losses_seed_{config.base_seed + k}.csv").write_text(
                    "\n".join(lines) + "\n"
                )
        result.out_path = out
    return result
