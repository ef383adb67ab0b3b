"""Explorer contract, the collection loop, and helpers shared by the learning explorers."""
from __future__ import annotations

import dataclasses

import numpy as np

from ..dataset import DatasetBuilder, LabeledBatch, Transition
from ..errors import ConfigError, UsageError


class Explorer:
    """Task-agnostic behaviour policy.

    ``collect`` calls ``begin_episode`` after every reset, ``act`` once per
    step, ``observe`` with the resulting transition, and ``end_episode`` when
    the episode finishes. Learning explorers update inside ``observe``.
    """

    method = ""

    def __init__(self, spec, rng):
        self.spec = spec
        self.rng = rng

    def begin_episode(self, obs):
        pass

    def act(self, obs):
        raise NotImplementedError

    def observe(self, transition):
        pass

    def end_episode(self):
        pass


class Replay:
    """Growable float64 transition store used by the learning explorers."""

    def __init__(self, obs_dim, act_dim, capacity=4096):
        self.obs = np.empty((capacity, obs_dim))
        self.action = np.empty((capacity, act_dim))
        self.next_obs = np.empty((capacity, obs_dim))
        self.failure = np.empty(capacity, dtype=bool)
        self.tag = np.zeros(capacity, dtype=np.int64)
        self.n = 0

    def __len__(self):
        return self.n

    def add(self, transition, tag=0):
        if self.n == self.obs.shape[0]:
            for name in ("obs", "action", "next_obs", "failure", "tag"):
                arr = getattr(self, name)
                setattr(self, name, np.concatenate([arr, np.empty_like(arr)]))
        i = self.n
        self.obs[i] = transition.obs
        self.action[i] = transition.action
        self.next_obs[i] = transition.next_obs
        self.failure[i] = transition.done and not transition.timeout
        self.tag[i] = tag
        self.n += 1

    def sample(self, batch_size, rng):
        idx = rng.integers(0, self.n, size=batch_size)
        return self.batch(idx), self.tag[idx]

    def batch(self, idx):
        return LabeledBatch(
            self.obs[idx],
            self.action[idx],
            np.zeros(len(idx)),
            self.next_obs[idx],
            (~self.failure[idx]).astype(np.float64),
        )


def apply_overrides(config, overrides):
    """Return a copy of dataclass ``config`` with known keys replaced; unknown keys are errors."""
    if not overrides:
        return config
    known = {f.name for f in dataclasses.fields(config)}
    unknown = set(overrides) - known
    if unknown:
        raise ConfigError(f"unknown hyperparameters for {type(config).__name__}: {sorted(unknown)}")
    values = {k: (tuple(v) if isinstance(v, list) else v) for k, v in overrides.items()}
    return dataclasses.replace(config, **values)


def discounted_return(rewards, dones, gamma):
    """``sum_t gamma**t * (1 - D_t) * r_t``."""
    if not 0.0 <= gamma < 1.0:
        raise ConfigError(f"discount must lie in [0, 1), got {gamma}")
    rewards = np.asarray(rewards, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    if rewards.shape != dones.shape:
        raise ConfigError("rewards and dones must have the same length")
    discounts = gamma ** np.arange(rewards.shape[0], dtype=np.float64)
    return float(np.sum(discounts * (1.0 - dones) * rewards))


def collect(explorer, env, total_steps, seed, metadata=None):
    """Run ``explorer`` in ``env`` for exactly ``total_steps`` transitions and return a Dataset."""
    if total_steps < 1:
        raise UsageError("total_steps must be at least 1")
    spec = env.spec
    builder = DatasetBuilder(spec.obs_dim, spec.act_dim, capacity=total_steps)
    state, obs = env.reset(seed)
    explorer.begin_episode(obs)
    for _ in range(total_steps):
        action = np.asarray(explorer.act(obs), dtype=np.float64)
        action = np.clip(action, spec.action_low, spec.action_high)
        state, next_obs, done, timeout = env.step(state, action)
        builder.append(obs, action, next_obs, done, timeout)
        explorer.observe(Transition(obs, action, next_obs, done, timeout))
        if done:
            explorer.end_episode()
            state, obs = env.reset(seed)
            explorer.begin_episode(obs)
        else:
            obs = next_obs
    meta = {"env": spec.name, "method": explorer.method, "seed": seed, "steps": total_steps}
    meta.update(metadata or {})
    return builder.build(meta)
