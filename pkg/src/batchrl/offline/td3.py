"""Twin delayed deterministic policy gradient on fixed data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..nn import Adam, Mlp, minimize
from ..tensor import Tensor, concat


@dataclass
class Td3Config:
    gamma: float = 0.99
    tau: float = 0.005
    policy_noise: float = 0.2
    noise_clip: float = 0.5
    policy_delay: int = 2
    batch_size: int = 256
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    hidden: tuple = (64, 64)

    def __post_init__(self):
        if self.policy_delay < 1:
            raise ConfigError("policy_delay must be >= 1")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError("tau must lie in (0, 1]")
        if self.policy_noise < 0 or self.noise_clip < 0:
            raise ConfigError("policy_noise and noise_clip must be non-negative")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")


class DeterministicActor:
    """tanh-headed MLP rescaled into the action box."""

    def __init__(self, obs_dim, act_dim, low, high, hidden=(64, 64), rng=None, net=None):
        self.low = np.asarray(low, dtype=np.float64)
        self.high = np.asarray(high, dtype=np.float64)
        self.center = 0.5 * (self.high + self.low)
        self.scale = 0.5 * (self.high - self.low)
        self.net = net if net is not None else Mlp([obs_dim, *hidden, act_dim], "tanh", rng)

    def forward(self, obs, frozen=False):
        return self.net.forward(obs, frozen=frozen) * self.scale + self.center

    def predict(self, obs):
        return self.net.predict(obs) * self.scale + self.center

    def copy(self):
        return DeterministicActor(0, 0, self.low, self.high, net=self.net.copy())


def td3_target(batch, actor_target, critic1_target, critic2_target, config, rng):
    """``r + gamma * not_done * min(Q1', Q2')(x', a')`` with clipped target-policy noise.

    Noise scale and clip are expressed in units of the half action range.
    """
    a_next = actor_target.predict(batch.next_obs)
    if config.policy_noise > 0:
        half = actor_target.scale
        noise = rng.standard_normal(a_next.shape) * (config.policy_noise * half)
        a_next = a_next + np.clip(noise, -config.noise_clip * half, config.noise_clip * half)
    a_next = np.clip(a_next, actor_target.low, actor_target.high)
    sa = np.concatenate([batch.next_obs, a_next], axis=1)
    q_min = np.minimum(critic1_target.predict(sa)[:, 0], critic2_target.predict(sa)[:, 0])
    return batch.reward + config.gamma * batch.not_done * q_min


class Td3Learner:
    algorithm = "td3"

    def __init__(self, obs_dim, act_dim, low, high, config=None, rng=None):
        self.config = config or Td3Config()
        hidden = tuple(self.config.hidden)
        self.actor = DeterministicActor(obs_dim, act_dim, low, high, hidden, rng)
        self.critic1 = Mlp([obs_dim + act_dim, *hidden, 1], "identity", rng)
        self.critic2 = Mlp([obs_dim + act_dim, *hidden, 1], "identity", rng)
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        self.actor_opt = Adam(self.actor.net, self.config.actor_lr)
        self.critic1_opt = Adam(self.critic1, self.config.critic_lr)
        self.critic2_opt = Adam(self.critic2, self.config.critic_lr)
        self.step_counter = 0
        self.actor_updates = 0

    def networks(self):
        return {
            "actor": self.actor.net,
            "critic1": self.critic1,
            "critic2": self.critic2,
            "actor_target": self.actor_target.net,
            "critic1_target": self.critic1_target,
            "critic2_target": self.critic2_target,
        }

    def act(self, obs):
        return self.actor.predict(np.asarray(obs, dtype=np.float64))

    def update(self, batch, rng):
        return td3_update(self, batch, rng)


def td3_update(learner, batch, rng):
    """Critic regression every call; actor and target updates every ``policy_delay`` calls."""
    cfg = learner.config
    learner.step_counter += 1
    step = learner.step_counter
    target = Tensor(td3_target(batch, learner.actor_target, learner.critic1_target, learner.critic2_target, cfg, rng)[:, None])
    sa = np.concatenate([batch.obs, batch.action], axis=1)
    critic_loss = (learner.critic1(sa) - target).square().mean() + (learner.critic2(sa) - target).square().mean()
    critic_value = minimize(critic_loss, [learner.critic1, learner.critic2], [learner.critic1_opt, learner.critic2_opt], step)

    actor_value = None
    if step % cfg.policy_delay == 0:
        obs = Tensor(batch.obs)
        q = learner.critic1.forward(concat([obs, learner.actor.forward(obs)], axis=1), frozen=True)
        actor_value = minimize(-q.mean(), [learner.actor.net], [learner.actor_opt], step)
        learner.actor_updates += 1
        learner.actor_target.net.polyak_update(learner.actor.net, cfg.tau)
        learner.critic1_target.polyak_update(learner.critic1, cfg.tau)
        learner.critic2_target.polyak_update(learner.critic2, cfg.tau)
    return {"critic_loss": critic_value, "actor_loss": actor_value, "aux_loss": None}
