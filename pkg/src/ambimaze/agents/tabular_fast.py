"""Table-compiled tabular Q-learning loop.

Criterion-scale tabular runs need millions of environment steps, which
the object-based episode loop cannot deliver in the time budget.  This
trainer walks the compiled transition table with plain integers while
consuming randomness in exactly the same order as `TabularQPolicy`
driven by `harness.run_episodes`, so a small-budget parity test can
assert the two produce identical episode returns.
"""

from __future__ import annotations

import random

from ..core import MazeSpec, Side
from ..mapformat import DEFAULT_EMAZE_PARAMS  # noqa: F401  (re-export convenience)
from ..simulate import SightIndex, TransitionTable, build_transition_table
from .baseline import TabularConfig


def _revealed_vector(table: TransitionTable, sight: SightIndex) -> list[bool]:
    """revealed[s] = does state s disclose its own context?"""
    out = []
    for idx in range(table.n_states):
        state = table.decode(idx)
        flags = sight.flags(state.position, state.heading, state.gate_closed)
        out.append(flags[state.context])
    return out


def train_tabular(
    spec: MazeSpec,
    belief_augmented: bool,
    total_steps: int,
    seed: int,
    config: TabularConfig | None = None,
    table: TransitionTable | None = None,
    sight: SightIndex | None = None,
) -> tuple[list[int], list[int]]:
    """One tabular training run; returns (episode returns, episode lengths).

    Matches the generic loop step for step: the environment generator is
    `random.Random(seed)` (one `randrange(2**63)` draw per reset) and the
    agent generator is `random.Random(f"agent-{seed}")` (one `random()`
    draw per act, plus one `randrange(4)` when exploring).
    """
    cfg = config or TabularConfig()
    table = table or build_transition_table(spec)
    sight = sight or SightIndex(spec)
    revealed = _revealed_vector(table, sight)

    env_rng = random.Random(seed)
    agent_rng = random.Random(f"agent-{seed}")

    # Plain nested lists: element access is several times faster than
    # scalar indexing into numpy arrays, which dominates this loop.
    next_s = table.next_state.tolist()
    rew = table.reward.tolist()
    term = table.terminal.tolist()
    starts = (table.start_state(Side.LEFT), table.start_state(Side.RIGHT))

    n_q = len(table.cells) * 8 * (3 if belief_augmented else 1)
    q: list[list[float]] = [[0.0, 0.0, 0.0, 0.0] for _ in range(n_q)]

    alpha = cfg.alpha
    gamma = cfg.gamma
    eps0 = cfg.epsilon_start
    eps1 = cfg.epsilon_end
    horizon = max(1, int(total_steps * cfg.anneal_fraction))
    max_moves = spec.max_moves

    returns: list[int] = []
    lengths: list[int] = []
    steps_done = 0

    while steps_done < total_steps:
        episode_seed = env_rng.randrange(2**63)
        context = 0 if random.Random(episode_seed).random() < 0.5 else 1
        s = starts[context]
        belief = 0  # Unknown
        if belief_augmented and revealed[s]:
            belief = 1 + context
        ep_return = 0
        for t in range(max_moves):
            pose = s >> 3  # strips gate and context bits: cell*8 + heading
            qi = pose * 3 + belief if belief_augmented else pose
            row = q[qi]
            steps_done += 1
            frac = steps_done / horizon
            eps = eps0 + (1.0 if frac > 1.0 else frac) * (eps1 - eps0)
            if agent_rng.random() < eps:
                a = agent_rng.randrange(4)
            else:
                a = row.index(max(row))
            r = rew[s][a]
            done_terminal = term[s][a]
            s2 = next_s[s][a]
            truncated = (not done_terminal) and (t + 1 >= max_moves)

            belief2 = belief
            if belief_augmented and belief2 == 0 and revealed[s2]:
                belief2 = 1 + context
            if done_terminal or truncated:
                target = float(r)
            else:
                pose2 = s2 >> 3
                qi2 = pose2 * 3 + belief2 if belief_augmented else pose2
                nrow = q[qi2]
                target = r + gamma * max(nrow)
            row[a] += alpha * (target - row[a])

            s = s2
            belief = belief2
            ep_return += r
            if done_terminal or truncated:
                lengths.append(t + 1)
                break
        returns.append(ep_return)
    return returns, lengths
