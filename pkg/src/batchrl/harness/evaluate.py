"""Policy evaluation with deterministic actions and closest-approach tracking."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..envs import PlanarArm, forward_kinematics
from ..errors import ConfigError
from ..explore.policies import LinearPolicy


@dataclass
class EvalReport:
    returns: list
    closest_distances: list | None = None
    trajectories: list | None = field(default=None, repr=False)

    @property
    def mean(self):
        return float(np.mean(self.returns))

    @property
    def std(self):
        return float(np.std(self.returns))

    def rows(self):
        dists = self.closest_distances or [None] * len(self.returns)
        return [(i, r, d) for i, (r, d) in enumerate(zip(self.returns, dists))]


class RandomLinearBaseline:
    """A fresh random linear policy every episode."""

    def __init__(self, spec, sigma=1.0):
        self.spec = spec
        self.sigma = sigma
        self.policy = None

    def begin_episode(self, rng):
        s = self.spec
        self.policy = LinearPolicy.random(s.obs_dim, s.act_dim, s.action_low, s.action_high, rng, self.sigma)

    def act(self, obs, rng=None):
        return self.policy.act(obs)


class ConstantPolicy:
    def __init__(self, action):
        self.action = np.asarray(action, dtype=np.float64)

    def act(self, obs, rng=None):
        return self.action


def evaluate(policy, env, episodes, seed, reward, target=None, record=False):
    """Roll out ``policy`` for ``episodes`` episodes and score them with ``reward``.

    Returns are sums of ``reward(next_obs)``. On the planar arm the closest
    tooltip distance to ``target`` (default: the reward's target) is recorded.
    """
    spec = env.spec
    if reward.env is not None and reward.env != spec.name:
        raise ConfigError(f"reward {reward.name!r} does not apply to environment {spec.name!r}")
    policy_obs_dim = getattr(policy, "obs_dim", spec.obs_dim)
    if policy_obs_dim != spec.obs_dim:
        raise ConfigError(f"policy expects observations of width {policy_obs_dim}, env emits {spec.obs_dim}")
    track = isinstance(env, PlanarArm)
    if track and target is None:
        if reward.name != "tooltip-reach":
            raise ConfigError("closest-distance tracking needs a tooltip target")
        target = reward.target
    rng = np.random.default_rng(seed)
    returns, closest, trajectories = [], [] if track else None, [] if record else None
    for _ in range(episodes):
        state, obs = env.reset(seed)
        if hasattr(policy, "begin_episode"):
            policy.begin_episode(rng)
        visited = [obs]
        total = 0.0
        done = False
        while not done:
            action = policy.act(obs, rng)
            state, obs, done, _timeout = env.step(state, action)
            total += float(reward(obs))
            visited.append(obs)
        returns.append(total)
        if track:
            tips = forward_kinematics(np.asarray(visited)[:, : env.n_joints], env.link_length)
            closest.append(float(np.min(np.linalg.norm(tips - target, axis=1))))
        if record:
            trajectories.append(np.asarray(visited))
    return EvalReport(returns, closest, trajectories)
