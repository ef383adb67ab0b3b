"""Shared maximum-entropy actor-critic learner for the RND and DIAYN explorers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import Adam, Mlp, minimize
from ..tensor import Tensor, concat, minimum
from .policies import StochasticPolicy


@dataclass
class SacConfig:
    gamma: float = 0.99
    tau: float = 0.005
    alpha: float = 0.2
    lr: float = 3e-4
    hidden: tuple = (64, 64)


def make_critic(obs_dim, act_dim, hidden, rng):
    return Mlp([obs_dim + act_dim, *hidden, 1], "identity", rng)


class SacAgent:
    def __init__(self, obs_dim, act_dim, low, high, config=None, rng=None):
        self.config = config or SacConfig()
        hidden = tuple(self.config.hidden)
        self.policy = StochasticPolicy(obs_dim, act_dim, low, high, hidden, rng)
        self.q1 = make_critic(obs_dim, act_dim, hidden, rng)
        self.q2 = make_critic(obs_dim, act_dim, hidden, rng)
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        lr = self.config.lr
        self.policy_opt = Adam(self.policy.net, lr)
        self.q1_opt = Adam(self.q1, lr)
        self.q2_opt = Adam(self.q2, lr)
        self.updates = 0

    @property
    def networks(self):
        return [self.policy.net, self.q1, self.q2, self.q1_target, self.q2_target]


def sac_critic_target(agent, batch, rng):
    """``r + gamma * not_done * (min(Q1', Q2')(x', a') - alpha * log pi(a'|x'))`` with ``a' ~ pi(x')``."""
    cfg = agent.config
    next_action, next_logp = agent.policy.sample(batch.next_obs, rng, frozen=True)
    sa = np.concatenate([batch.next_obs, next_action.data], axis=1)
    q_next = np.minimum(agent.q1_target.predict(sa)[:, 0], agent.q2_target.predict(sa)[:, 0])
    soft = q_next - cfg.alpha * next_logp.data
    return batch.reward + cfg.gamma * batch.not_done * soft


def sac_update(agent, batch, rng, step=None):
    """One critic step and one policy step on a batch whose rewards are already filled in."""
    cfg = agent.config
    target = Tensor(sac_critic_target(agent, batch, rng)[:, None])

    sa = np.concatenate([batch.obs, batch.action], axis=1)
    q1 = agent.q1(sa)
    q2 = agent.q2(sa)
    critic_loss = (q1 - target).square().mean() + (q2 - target).square().mean()
    critic_value = minimize(critic_loss, [agent.q1, agent.q2], [agent.q1_opt, agent.q2_opt], step)

    obs = Tensor(batch.obs)
    action, logp = agent.policy.sample(obs, rng)
    sa_pi = concat([obs, action], axis=1)
    q_pi = minimum(agent.q1.forward(sa_pi, frozen=True), agent.q2.forward(sa_pi, frozen=True))[:, 0]
    actor_loss = (logp * cfg.alpha - q_pi).mean()
    actor_value = minimize(actor_loss, [agent.policy.net], [agent.policy_opt], step)

    agent.q1_target.polyak_update(agent.q1, cfg.tau)
    agent.q2_target.polyak_update(agent.q2, cfg.tau)
    agent.updates += 1
    return {"critic_loss": critic_value, "actor_loss": actor_value}
