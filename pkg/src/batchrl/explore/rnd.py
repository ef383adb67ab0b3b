"""Random network distillation: novelty as a student's error against a frozen random teacher."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import Adam, Mlp, minimize
from .base import Explorer, Replay, apply_overrides
from .sac import SacAgent, SacConfig, sac_update


@dataclass
class RndConfig:
    embed_dim: int = 32
    hidden: tuple = (64, 64)
    lr: float = 1e-3
    warmup: int = 256
    batch_size: int = 128
    update_every: int = 1
    sac_lr: float = 3e-4
    gamma: float = 0.99
    alpha: float = 0.2


class RndModule:
    def __init__(self, obs_dim, embed_dim=32, hidden=(64, 64), lr=1e-3, rng=None):
        self.teacher = Mlp([obs_dim, *hidden, embed_dim], "identity", rng)
        self.student = Mlp([obs_dim, *hidden, embed_dim], "identity", rng)
        self.optimizer = Adam(self.student, lr)
        self.updates = 0


def rnd_reward(module, x):
    """``||teacher(x) - student(x)||`` for one observation or a batch."""
    x = np.asarray(x, dtype=np.float64)
    diff = module.teacher.predict(x) - module.student.predict(x)
    return np.sqrt(np.sum(diff * diff, axis=-1))


def rnd_update(module, observations):
    """One Adam step on the mean squared embedding error; returns the pre-step loss."""
    observations = np.atleast_2d(np.asarray(observations, dtype=np.float64))
    target = module.teacher.predict(observations)
    loss = (module.student(observations) - target).square().sum(axis=1).mean()
    module.updates += 1
    return minimize(loss, [module.student], [module.optimizer], module.updates)


class RndExplorer(Explorer):
    method = "rnd"

    def __init__(self, spec, rng, **overrides):
        super().__init__(spec, rng)
        cfg = self.config = apply_overrides(RndConfig(), overrides)
        self.module = RndModule(spec.obs_dim, cfg.embed_dim, cfg.hidden, cfg.lr, rng)
        sac_cfg = SacConfig(gamma=cfg.gamma, alpha=cfg.alpha, lr=cfg.sac_lr, hidden=tuple(cfg.hidden))
        self.agent = SacAgent(spec.obs_dim, spec.act_dim, spec.action_low, spec.action_high, sac_cfg, rng)
        self.replay = Replay(spec.obs_dim, spec.act_dim)
        self.steps = 0

    def act(self, obs):
        return self.agent.policy.act(obs, self.rng)

    def observe(self, transition):
        self.replay.add(transition)
        self.steps += 1
        cfg = self.config
        if len(self.replay) >= cfg.warmup and self.steps % cfg.update_every == 0:
            batch, _ = self.replay.sample(cfg.batch_size, self.rng)
            # intrinsic rewards are recomputed from the current networks on every update
            batch.reward = rnd_reward(self.module, batch.next_obs)
            sac_update(self.agent, batch, self.rng, self.steps)
            rnd_update(self.module, batch.next_obs)
