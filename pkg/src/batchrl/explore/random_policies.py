"""Random linear policies (one fresh policy per episode) and an i.i.d. action-noise baseline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Explorer, apply_overrides
from .policies import LinearPolicy


@dataclass
class RandomPolicyConfig:
    init_sigma: float = 1.0


def random_policy_act(policy, x):
    return policy.act(x)


class RandomPolicyExplorer(Explorer):
    method = "random"

    def __init__(self, spec, rng, **overrides):
        super().__init__(spec, rng)
        self.config = apply_overrides(RandomPolicyConfig(), overrides)
        self.policy = None
        self.episodes = 0

    def begin_episode(self, obs):
        self.policy = LinearPolicy.random(
            self.spec.obs_dim, self.spec.act_dim, self.spec.action_low, self.spec.action_high,
            self.rng, self.config.init_sigma,
        )
        self.episodes += 1

    def act(self, obs):
        return random_policy_act(self.policy, obs)


class UniformNoiseExplorer(Explorer):
    """Independent uniform actions every step; the coverage reference point."""

    method = "uniform-noise"

    def __init__(self, spec, rng, **overrides):
        super().__init__(spec, rng)
        apply_overrides(RandomPolicyConfig(), overrides)

    def act(self, obs):
        return self.rng.uniform(self.spec.action_low, self.spec.action_high)
