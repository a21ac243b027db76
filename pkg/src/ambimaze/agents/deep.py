"""Desk-scale deep agents: DQN with a replay buffer and target network,
PPO with the clipped ratio objective, and ICM/RND intrinsic bonuses with
a performance-triggered switch-off.

Networks are the small MLPs from `ambimaze.nn`; observations come from
an encoder that is either a flattened 21x21 downscale of the 84x84
preprocessed frame or a compact one-hot of (position, heading, reveal
flag).  Hyperparameter defaults follow the benchmark table: RMSProp at
2.5e-4 / batch 32 for DQN; Adam at 2.5e-4, ratio clip 0.1, value
coefficient 0.5, entropy 0.001, 8 parallel rollouts of 250 steps and 8
minibatches for PPO.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

import numpy as np

from ..core import ACTIONS, Action, MazeEnv, MazeSpec
from ..nn import (
    Mlp,
    backward,
    flat_grads,
    forward,
    init_mlp,
    make_optimizer,
    optimizer_step,
)
from ..percept import FrameCache, resize_area
from ..simulate import SightIndex
from .base import Policy, StepView, Transition


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class ObsEncoder:
    """Turns a StepView into a flat feature vector.

    mode "pixel21": 84x84 preprocessed frame area-averaged to 21x21 and
    flattened (441 features).  mode "compact": one-hot cell position,
    one-hot heading, and a 3-way flag for what reward_visible returned.
    """

    def __init__(self, spec: MazeSpec, mode: str = "compact"):
        if mode not in ("compact", "pixel21"):
            raise ValueError(f"unknown encoder mode {mode!r}")
        self.spec = spec
        self.mode = mode
        self.needs_pixels = mode == "pixel21"
        if mode == "pixel21":
            self.dim = 441
        else:
            self.dim = spec.width * spec.height + 8 + 3
        self._cache: dict = {}

    def encode(self, view: StepView) -> np.ndarray:
        if self.mode == "pixel21":
            if view.pixels is None:
                raise ValueError("pixel21 encoder needs view.pixels")
            key = id(view.pixels)
            hit = self._cache.get(key)
            if hit is None:
                small = resize_area(view.pixels, 21, 21).reshape(-1)
                small.setflags(write=False)
                hit = (view.pixels, small)  # keep the source alive so ids stay unique
                self._cache[key] = hit
            return hit[1]
        key = (view.position, int(view.heading), view.visible_side)
        vec = self._cache.get(key)
        if vec is None:
            vec = np.zeros(self.dim)
            c, r = view.position
            vec[r * self.spec.width + c] = 1.0
            vec[self.spec.width * self.spec.height + int(view.heading)] = 1.0
            flag = 0 if view.visible_side is None else 1 + int(view.visible_side)
            vec[self.spec.width * self.spec.height + 8 + flag] = 1.0
            vec.setflags(write=False)
            self._cache[key] = vec
        return vec


class ReplayBuffer:
    """Uniform-sampling ring buffer of encoded transitions."""

    def __init__(self, capacity: int, min_history: int, obs_dim: int):
        if min_history > capacity:
            raise ValueError("min_history cannot exceed capacity")
        self.capacity = capacity
        self.min_history = min_history
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.actions = np.zeros(capacity, dtype=np.int8)
        self.rewards = np.zeros(capacity, dtype=np.float32)
        self.dones = np.zeros(capacity, dtype=bool)
        self._size = 0
        self._head = 0

    def __len__(self) -> int:
        return self._size

    def add(self, obs, action, reward, next_obs, done):
        i = self._head
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.dones[i] = done
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int):
        if self._size < self.min_history:
            raise RuntimeError(
                f"sampling before min_history ({self._size} < {self.min_history})"
            )
        idx = rng.integers(0, self._size, size=batch_size)
        return (
            self.obs[idx].astype(np.float64),
            self.actions[idx].astype(np.int64),
            self.rewards[idx].astype(np.float64),
            self.next_obs[idx].astype(np.float64),
            self.dones[idx],
        )


# --- DQN ----------------------------------------------------------------------


@dataclass
class DqnConfig:
    lr: float = 2.5e-4
    optimizer: str = "rmsprop"
    batch_size: int = 32
    capacity: int = 20_000
    min_history: int = 2_000
    target_sync: int = 500  # gradient steps between target refreshes
    gamma: float = 0.99
    eps_start: float = 1.0
    eps_end: float = 0.1
    eps_anneal_frac: float = 0.4
    steps_per_phase: int = 250  # env steps collected between training phases
    updates_per_phase: int = 62
    hidden: tuple[int, ...] = (64, 64)
    encoder: str = "compact"

    def paper_scale(self) -> "DqnConfig":
        """The original benchmark constants instead of the desk-scale ones."""
        return replace(
            self,
            capacity=100_000,
            min_history=20_000,
            steps_per_phase=2_500,
            updates_per_phase=625,
        )


class DqnAgent(Policy):
    def __init__(self, spec: MazeSpec, config: DqnConfig, total_steps: int, seed: int = 0):
        self.config = config
        self.total_steps = total_steps
        self.encoder = ObsEncoder(spec, config.encoder)
        self.needs_pixels = self.encoder.needs_pixels
        sizes = [self.encoder.dim, *config.hidden, 4]
        self.online = init_mlp(sizes, "relu", seed=seed)
        self.target = init_mlp(sizes, "relu", seed=seed)
        self.sync_target()
        self.opt = make_optimizer(config.optimizer, config.lr, self.online.params)
        self.np_rng = np.random.default_rng(seed)
        self.steps_done = 0
        self.grad_steps = 0
        self.buffer = ReplayBuffer(config.capacity, config.min_history, self.encoder.dim)
        self.last_loss = float("nan")

    def sync_target(self):
        self.target.weights = [w.copy() for w in self.online.weights]
        self.target.biases = [b.copy() for b in self.online.biases]

    @property
    def epsilon(self) -> float:
        cfg = self.config
        horizon = max(1, int(self.total_steps * cfg.eps_anneal_frac))
        frac = min(1.0, self.steps_done / horizon)
        return cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start)

    def act(self, view: StepView, rng: random.Random) -> Action:
        self.steps_done += 1
        if rng.random() < self.epsilon:
            return ACTIONS[rng.randrange(4)]
        q, _ = forward(self.online, self.encoder.encode(view))
        return ACTIONS[int(np.argmax(q))]

    def observe(self, transition: Transition):
        done = transition.terminated or transition.truncated
        self.buffer.add(
            self.encoder.encode(transition.view),
            int(transition.action),
            float(transition.reward),
            self.encoder.encode(transition.next_view),
            done,
        )
        cfg = self.config
        if self.steps_done % cfg.steps_per_phase == 0 and len(self.buffer) >= cfg.min_history:
            for _ in range(cfg.updates_per_phase):
                self.last_loss = dqn_train_step(self)


def dqn_train_step(agent: DqnAgent) -> float:
    """One gradient step on a uniform batch; refreshes the target network
    every `target_sync` gradient steps."""
    cfg = agent.config
    obs, actions, rewards, next_obs, dones = agent.buffer.sample(agent.np_rng, cfg.batch_size)
    q, cache = forward(agent.online, obs)
    q_next, _ = forward(agent.target, next_obs)
    targets = rewards + cfg.gamma * (~dones) * q_next.max(axis=1)
    batch = np.arange(cfg.batch_size)
    taken = q[batch, actions]
    err = taken - targets
    loss = float(np.mean(err**2))
    dq = np.zeros_like(q)
    dq[batch, actions] = 2.0 * err / cfg.batch_size
    grads, _ = backward(agent.online, cache, dq)
    optimizer_step(agent.online.params, flat_grads(grads), agent.opt)
    agent.grad_steps += 1
    if agent.grad_steps % cfg.target_sync == 0:
        agent.sync_target()
    return loss


# --- intrinsic bonus modules ---------------------------------------------------


class IntrinsicModule:
    """Shared contract: a non-negative per-transition bonus plus a
    learning pass over rollout data.  Once deactivated (the trainer flips
    the switch when rolling success crosses the threshold) the bonus is
    exactly zero for the rest of the run.

    `train_epochs` is how many passes over each rollout the trainer gives
    the module; prediction errors must decay on frequented transitions or
    the leftover bonus becomes a standing reward for loops."""

    kind = "none"
    train_epochs = 1

    def __init__(self):
        self.active = True

    def deactivate(self):
        self.active = False

    def bonus(self, obs: np.ndarray, action: int, next_obs: np.ndarray) -> float:
        raise NotImplementedError

    def learn(self, obs: np.ndarray, actions: np.ndarray, next_obs: np.ndarray):
        raise NotImplementedError


class RndModule(IntrinsicModule):
    """Random network distillation: the bonus is the prediction error of
    a trained network against a frozen randomly initialized target."""

    kind = "rnd"

    def __init__(self, obs_dim: int, feat_dim: int = 16, hidden: int = 64,
                 lr: float = 1e-3, seed: int = 0):
        super().__init__()
        self.target = init_mlp(
            [obs_dim, hidden, feat_dim], "tanh", seed=seed,
            scheme="orthogonal", gains=[math.sqrt(2.0), math.sqrt(2.0)],
        )
        self.predictor = init_mlp([obs_dim, hidden, feat_dim], "tanh", seed=seed + 1)
        self.opt = make_optimizer("adam", lr, self.predictor.params)

    def bonus(self, obs, action, next_obs) -> float:
        if not self.active:
            return 0.0
        t, _ = forward(self.target, next_obs)
        p, _ = forward(self.predictor, next_obs)
        return float(np.mean((p - t) ** 2))

    def learn(self, obs, actions, next_obs):
        if not self.active:
            return
        t, _ = forward(self.target, next_obs)
        p, cache = forward(self.predictor, next_obs)
        diff = p - t
        dpred = 2.0 * diff / diff.size
        grads, _ = backward(self.predictor, cache, dpred)
        optimizer_step(self.predictor.params, flat_grads(grads), self.opt)


class IcmModule(IntrinsicModule):
    """Intrinsic curiosity: features from an inverse-dynamics encoder;
    the bonus is the forward model's prediction error in feature space.

    The encoder trains on the inverse (action-prediction) loss only; the
    forward model trains against detached feature targets.  It gets
    several passes per rollout: the features keep moving while the
    inverse head trains, so the forward model needs the extra budget to
    keep visited transitions near zero bonus."""

    kind = "icm"
    train_epochs = 4

    def __init__(self, obs_dim: int, feat_dim: int = 16, hidden: int = 64,
                 lr: float = 1e-3, seed: int = 0):
        super().__init__()
        self.feat_dim = feat_dim
        # tanh output keeps the feature space bounded; otherwise inverse
        # training inflates features faster than the forward model can fit.
        self.encoder = init_mlp([obs_dim, hidden, feat_dim], ["tanh", "tanh"], seed=seed)
        self.inverse = init_mlp([2 * feat_dim, hidden, 4], "tanh", seed=seed + 1)
        self.forward_model = init_mlp([feat_dim + 4, hidden, feat_dim], "tanh", seed=seed + 2)
        params = self.encoder.params + self.inverse.params + self.forward_model.params
        self.opt = make_optimizer("adam", lr, params)

    def _features(self, obs):
        return forward(self.encoder, obs)

    def bonus(self, obs, action, next_obs) -> float:
        if not self.active:
            return 0.0
        phi, _ = self._features(obs)
        phi2, _ = self._features(next_obs)
        onehot = np.zeros(4)
        onehot[action] = 1.0
        pred, _ = forward(self.forward_model, np.concatenate([phi, onehot]))
        return float(np.mean((pred - phi2) ** 2))

    def learn(self, obs, actions, next_obs):
        if not self.active:
            return
        n = len(actions)
        phi, cache_s = self._features(obs)
        phi2, cache_s2 = self._features(next_obs)
        onehot = np.zeros((n, 4))
        onehot[np.arange(n), actions] = 1.0

        # Inverse head: cross-entropy on the taken action; its gradient is
        # the only one that reaches the encoder.
        inv_in = np.concatenate([phi, phi2], axis=1)
        logits, cache_inv = forward(self.inverse, inv_in)
        probs = softmax(logits)
        dlogits = (probs - onehot) / n
        inv_grads, dinv_in = backward(self.inverse, cache_inv, dlogits)
        enc_grads_a, _ = backward(self.encoder, cache_s, dinv_in[:, : self.feat_dim])
        enc_grads_b, _ = backward(self.encoder, cache_s2, dinv_in[:, self.feat_dim :])
        enc_grads = [
            (ga[0] + gb[0], ga[1] + gb[1]) for ga, gb in zip(enc_grads_a, enc_grads_b)
        ]

        # Forward model on detached features.
        fwd_in = np.concatenate([phi, onehot], axis=1)
        pred, cache_fwd = forward(self.forward_model, fwd_in)
        diff = pred - phi2
        dpred = 2.0 * diff / diff.size
        fwd_grads, _ = backward(self.forward_model, cache_fwd, dpred)

        grads = flat_grads(enc_grads) + flat_grads(inv_grads) + flat_grads(fwd_grads)
        params = self.encoder.params + self.inverse.params + self.forward_model.params
        optimizer_step(params, grads, self.opt)


def make_intrinsic(kind: str | None, obs_dim: int, seed: int) -> IntrinsicModule | None:
    if kind in (None, "none"):
        return None
    if kind == "rnd":
        return RndModule(obs_dim, seed=seed)
    if kind == "icm":
        return IcmModule(obs_dim, seed=seed)
    raise ValueError(f"unknown intrinsic module {kind!r}")


# --- PPO ------------------------------------------------------------------------


@dataclass
class PpoConfig:
    lr: float = 2.5e-4
    clip: float = 0.1
    vf_coef: float = 0.5
    ent_coef: float = 0.001
    n_envs: int = 8
    rollout_steps: int = 250
    minibatches: int = 8
    epochs: int = 4
    gamma: float = 0.99
    hidden: tuple[int, ...] = (64, 64)
    encoder: str = "compact"
    orthogonal: bool = False
    ortho_gain_hidden: float = math.sqrt(2.0)
    ortho_gain_out: float = 3.0
    intrinsic: str | None = None
    beta: float = 0.1  # intrinsic bonus scale
    off_threshold: float = 0.2  # rolling success that switches exploration off

    def __post_init__(self):
        if (self.n_envs * self.rollout_steps) % self.minibatches != 0:
            raise ValueError("minibatches must divide the rollout size")


class PpoAgent:
    """Policy/value pair with the clipped-ratio update."""

    def __init__(self, obs_dim: int, config: PpoConfig, seed: int = 0):
        self.config = config
        sizes_pi = [obs_dim, *config.hidden, 4]
        sizes_v = [obs_dim, *config.hidden, 1]
        if config.orthogonal:
            # The large-orthogonal option applies to the policy network;
            # the value head keeps the default scheme in both arms.
            gains = [config.ortho_gain_hidden] * (len(sizes_pi) - 2) + [config.ortho_gain_out]
            self.policy = init_mlp(sizes_pi, "tanh", seed=seed, scheme="orthogonal", gains=gains)
        else:
            self.policy = init_mlp(sizes_pi, "tanh", seed=seed)
        self.value = init_mlp(sizes_v, "tanh", seed=seed + 1)
        self.opt_pi = make_optimizer("adam", config.lr, self.policy.params)
        self.opt_v = make_optimizer("adam", config.lr, self.value.params)

    def action_probs(self, obs: np.ndarray) -> np.ndarray:
        logits, _ = forward(self.policy, obs)
        return softmax(logits)

    def state_values(self, obs: np.ndarray) -> np.ndarray:
        v, _ = forward(self.value, obs)
        return v[..., 0]


@dataclass
class Rollout:
    obs: np.ndarray        # (N, dim)
    actions: np.ndarray    # (N,)
    old_probs: np.ndarray  # (N,) probability of the taken action at collection
    returns: np.ndarray    # (N,) discounted returns (bootstrapped at the cut)
    advantages: np.ndarray # (N,) returns minus collection-time values
    next_obs: np.ndarray | None = None  # (N, dim), for intrinsic learning


def ppo_update(agent: PpoAgent, rollout: Rollout, rng: np.random.Generator) -> dict:
    """Minibatched clipped-surrogate update.

    Loss = policy term + vf_coef * value MSE - ent_coef * entropy; the
    advantage is the rollout return minus the rollout value estimate (no
    generalized advantage weighting)."""
    cfg = agent.config
    n = len(rollout.actions)
    mb = n // cfg.minibatches
    lo_clip, hi_clip = 1.0 - cfg.clip, 1.0 + cfg.clip
    stats = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0}
    count = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, mb):
            idx = order[start : start + mb]
            obs = rollout.obs[idx]
            acts = rollout.actions[idx]
            adv = rollout.advantages[idx]
            rets = rollout.returns[idx]
            oldp = rollout.old_probs[idx]
            b = len(idx)
            rows = np.arange(b)

            logits, cache_pi = forward(agent.policy, obs)
            probs = softmax(logits)
            taken = probs[rows, acts]
            ratio = taken / oldp
            unclipped = ratio * adv
            clipped = np.clip(ratio, lo_clip, hi_clip) * adv
            policy_loss = -float(np.mean(np.minimum(unclipped, clipped)))

            logp = np.log(np.clip(probs, 1e-12, None))
            entropy_each = -(probs * logp).sum(axis=1)
            entropy = float(entropy_each.mean())

            # d(-min)/dratio is -adv where the unclipped branch is active.
            active = (unclipped <= clipped).astype(np.float64)
            dratio = -(adv * active) / b
            onehot = np.zeros_like(probs)
            onehot[rows, acts] = 1.0
            dlogits = (dratio * ratio)[:, None] * (onehot - probs)
            # entropy regularizer: loss term is -ent_coef * H
            dlogits += cfg.ent_coef * (probs * (logp + entropy_each[:, None])) / b
            pi_grads, _ = backward(agent.policy, cache_pi, dlogits)
            optimizer_step(agent.policy.params, flat_grads(pi_grads), agent.opt_pi)

            v, cache_v = forward(agent.value, obs)
            verr = v[:, 0] - rets
            value_loss = float(np.mean(verr**2))
            dv = (cfg.vf_coef * 2.0 * verr / b)[:, None]
            v_grads, _ = backward(agent.value, cache_v, dv)
            optimizer_step(agent.value.params, flat_grads(v_grads), agent.opt_v)

            stats["policy_loss"] += policy_loss
            stats["value_loss"] += value_loss
            stats["entropy"] += entropy
            count += 1
    return {k: v / count for k, v in stats.items()}


@dataclass
class PpoRunResult:
    returns: list[int]
    steps: list[int]
    losses: list[dict]
    intrinsic_off_episode: int | None = None


def ppo_training_run(
    spec: MazeSpec,
    config: PpoConfig,
    seed: int,
    n_updates: int,
    window: int = 100,
) -> PpoRunResult:
    """Synchronous PPO loop: collect `rollout_steps` from `n_envs`
    environments, compute bootstrapped returns, update.  Episode returns
    are extrinsic only; when the trailing-`window` success rate reaches
    `off_threshold` the intrinsic module (if any) is switched off for the
    rest of the run and the episode index is recorded."""
    encoder = ObsEncoder(spec, config.encoder)
    agent = PpoAgent(encoder.dim, config, seed=seed * 7919 + 11)
    np_rng = np.random.default_rng(seed)
    seeder = random.Random(f"ppo-envs-{seed}")
    envs = [MazeEnv(spec, seed=seeder.randrange(2**63)) for _ in range(config.n_envs)]
    sight = SightIndex(spec)
    frames = FrameCache(spec) if encoder.needs_pixels else None
    intrinsic = make_intrinsic(config.intrinsic, encoder.dim, seed=seed * 31 + 5)

    def view_of(env):
        state = env.state
        return StepView(
            position=state.position,
            heading=state.heading,
            visible_side=sight.visible_side(state),
            pixels=frames.obs84(state) if frames is not None else None,
        )

    for env in envs:
        env.reset()
    obs = np.stack([encoder.encode(view_of(e)) for e in envs])
    ep_returns = [0 for _ in envs]
    ep_steps = [0 for _ in envs]
    returns: list[int] = []
    steps: list[int] = []
    losses: list[dict] = []
    off_episode: int | None = None

    n_envs, horizon = config.n_envs, config.rollout_steps
    dim = encoder.dim

    for update in range(n_updates):
        r_obs = np.zeros((horizon, n_envs, dim))
        r_next = np.zeros((horizon, n_envs, dim))
        r_actions = np.zeros((horizon, n_envs), dtype=np.int64)
        r_rewards = np.zeros((horizon, n_envs))
        r_dones = np.zeros((horizon, n_envs), dtype=bool)
        r_probs = np.zeros((horizon, n_envs))
        r_values = np.zeros((horizon, n_envs))
        bonus_sum = 0.0

        for t in range(horizon):
            probs = agent.action_probs(obs)
            values = agent.state_values(obs)
            u = np_rng.random(n_envs)
            actions = (probs.cumsum(axis=1) < u[:, None]).sum(axis=1)
            actions = np.minimum(actions, 3)
            r_obs[t] = obs
            r_probs[t] = probs[np.arange(n_envs), actions]
            r_values[t] = values
            r_actions[t] = actions

            for i, env in enumerate(envs):
                result = env.step(Action(int(actions[i])))
                ep_returns[i] += result.reward
                ep_steps[i] += 1
                done = result.terminated or result.truncated
                next_view = view_of(env)
                next_enc = encoder.encode(next_view)
                r_next[t, i] = next_enc
                reward = float(result.reward)
                if intrinsic is not None and intrinsic.active:
                    b = intrinsic.bonus(r_obs[t, i], int(actions[i]), next_enc)
                    bonus_sum += b
                    reward += config.beta * b
                r_rewards[t, i] = reward
                r_dones[t, i] = done
                if done:
                    returns.append(ep_returns[i])
                    steps.append(ep_steps[i])
                    ep_returns[i] = 0
                    ep_steps[i] = 0
                    # Switch exploration off once a full window of episodes
                    # averages at or above the threshold.
                    if (
                        intrinsic is not None
                        and intrinsic.active
                        and len(returns) >= window
                        and sum(returns[-window:]) / window >= config.off_threshold
                    ):
                        intrinsic.deactivate()
                        off_episode = len(returns)
                    env.reset()
                    next_view = view_of(env)
                    next_enc = encoder.encode(next_view)
                obs[i] = next_enc

        # Discounted returns; bootstrap the cut with the value estimate.
        boot = agent.state_values(obs)
        rets = np.zeros_like(r_rewards)
        running = boot.copy()
        for t in range(horizon - 1, -1, -1):
            running = r_rewards[t] + config.gamma * running * (~r_dones[t])
            rets[t] = running
        adv = rets - r_values

        rollout = Rollout(
            obs=r_obs.reshape(-1, dim),
            actions=r_actions.reshape(-1),
            old_probs=r_probs.reshape(-1),
            returns=rets.reshape(-1),
            advantages=adv.reshape(-1),
            next_obs=r_next.reshape(-1, dim),
        )
        if intrinsic is not None and intrinsic.active:
            for _ in range(intrinsic.train_epochs):
                order = np_rng.permutation(len(rollout.actions))
                mb = len(order) // config.minibatches
                for start in range(0, len(order), mb):
                    idx = order[start : start + mb]
                    intrinsic.learn(
                        rollout.obs[idx], rollout.actions[idx], rollout.next_obs[idx]
                    )
        stats = ppo_update(agent, rollout, np_rng)
        stats["intrinsic_mean"] = bonus_sum / (horizon * n_envs)
        losses.append(stats)
    return PpoRunResult(
        returns=returns, steps=steps, losses=losses, intrinsic_off_episode=off_episode
    )
