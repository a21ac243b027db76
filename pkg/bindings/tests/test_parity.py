"""Cross-boundary parity: driving the environment through the bindings
must reproduce the native pipeline exactly, observation bits included."""

import random

import numpy as np

from ambimaze.core import Action, MazeEnv
from ambimaze.mapformat import default_spec
from ambimaze.percept import preprocess, render

from ambimaze_env import make


def native_rollout(spec, episode_seeds, actions, obs_mode):
    env = MazeEnv(spec, seed=0)
    rewards, terms, truncs, obs = [], [], [], []
    it = iter(actions)
    for seed in episode_seeds:
        env.reset(seed=seed)
        while True:
            try:
                action = next(it)
            except StopIteration:
                return rewards, terms, truncs, obs
            result = env.step(Action(action))
            frame = render(spec, env.state)
            obs.append(frame.pixels.copy() if obs_mode == "frame" else preprocess(frame))
            rewards.append(result.reward)
            terms.append(result.terminated)
            truncs.append(result.truncated)
            if result.terminated or result.truncated:
                break
    return rewards, terms, truncs, obs


def bound_rollout(spec_source, episode_seeds, actions, obs_mode):
    env = make(spec_source, obs=obs_mode, seed=0)
    rewards, terms, truncs, obs = [], [], [], []
    it = iter(actions)
    for seed in episode_seeds:
        env.reset(seed=seed)
        while True:
            try:
                action = next(it)
            except StopIteration:
                return rewards, terms, truncs, obs
            o, r, terminated, truncated = env.step(action)
            obs.append(o)
            rewards.append(r)
            terms.append(terminated)
            truncs.append(truncated)
            if terminated or truncated:
                break
    return rewards, terms, truncs, obs


def test_thousand_step_parity_processed():
    spec = default_spec()
    rng = random.Random(31)
    actions = [rng.randrange(4) for _ in range(1_000)]
    episode_seeds = list(range(100, 160))
    native = native_rollout(spec, episode_seeds, list(actions), "processed")
    bound = bound_rollout("default", episode_seeds, list(actions), "processed")
    assert native[0] == bound[0]  # rewards
    assert native[1] == bound[1]  # terminated flags
    assert native[2] == bound[2]  # truncated flags
    assert len(native[3]) == len(bound[3]) > 900
    for a, b in zip(native[3], bound[3]):
        assert np.max(np.abs(a - b)) <= 1e-6


def test_thousand_step_parity_raw_frames_bit_exact():
    spec = default_spec()
    rng = random.Random(77)
    actions = [rng.randrange(4) for _ in range(1_000)]
    episode_seeds = list(range(500, 560))
    native = native_rollout(spec, episode_seeds, list(actions), "frame")
    bound = bound_rollout("default", episode_seeds, list(actions), "frame")
    assert native[0] == bound[0]
    assert native[1] == bound[1]
    assert native[2] == bound[2]
    for a, b in zip(native[3], bound[3]):
        assert np.array_equal(a, b)  # integer pixels: max abs diff 0
