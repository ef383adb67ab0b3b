"""Skill discovery: per-skill max-entropy agents rewarded by a skill discriminator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import Adam, Mlp, minimize
from .base import Explorer, Replay, apply_overrides
from .sac import SacAgent, SacConfig, sac_update


@dataclass
class DiaynConfig:
    n_skills: int = 8
    hidden: tuple = (64, 64)
    disc_lr: float = 1e-3
    warmup: int = 256
    batch_size: int = 128
    update_every: int = 1
    sac_lr: float = 3e-4
    gamma: float = 0.99
    alpha: float = 0.2


class SkillEnsemble:
    def __init__(self, obs_dim, act_dim, low, high, n_skills=8, hidden=(64, 64), disc_lr=1e-3,
                 sac_config=None, rng=None):
        self.n_skills = n_skills
        sac_config = sac_config or SacConfig(hidden=tuple(hidden))
        self.agents = [SacAgent(obs_dim, act_dim, low, high, sac_config, rng) for _ in range(n_skills)]
        self.discriminator = Mlp([obs_dim, *hidden, n_skills], "softmax", rng)
        self.disc_optimizer = Adam(self.discriminator, disc_lr)
        self.disc_updates = 0

    def skill_probabilities(self, x):
        return self.discriminator.predict(x)

    def log_probabilities(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        z = self.discriminator.predict(x, raw_output=True)
        z = z - z.max(axis=1, keepdims=True)
        return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def diayn_reward(ensemble, skill, x):
    """``log P(skill | x)`` from the discriminator; ``skill`` may be an int or per-row array."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    logp = ensemble.log_probabilities(x)
    skill = np.broadcast_to(np.asarray(skill), (logp.shape[0],))
    if np.any(skill < 0) or np.any(skill >= ensemble.n_skills):
        raise IndexError(f"skill index out of range for {ensemble.n_skills} skills")
    out = logp[np.arange(logp.shape[0]), skill]
    return float(out[0]) if single else out


def discriminator_loss(ensemble, observations, skills):
    logits = ensemble.discriminator(np.atleast_2d(observations), raw_output=True)
    logp = logits.log_softmax()
    picked = logp[np.arange(len(skills)), np.asarray(skills)]
    return -picked.mean()


def diayn_discriminator_update(ensemble, observations, skills):
    """One cross-entropy step on labelled observations; returns the pre-step loss."""
    ensemble.disc_updates += 1
    loss = discriminator_loss(ensemble, observations, skills)
    return minimize(loss, [ensemble.discriminator], [ensemble.disc_optimizer], ensemble.disc_updates)


def diayn_update(ensemble, batch, skills, rng, step=None):
    """Discriminator step on the whole batch, then one actor-critic step per skill present.

    Each skill's agent only ever sees the rows labelled with that skill.
    """
    skills = np.asarray(skills)
    rewards = diayn_reward(ensemble, skills, batch.next_obs)
    disc_loss = diayn_discriminator_update(ensemble, batch.next_obs, skills)
    policy_losses = {}
    for skill in np.unique(skills):
        rows = np.flatnonzero(skills == skill)
        sub = batch.take(rows)
        sub.reward = rewards[rows]
        policy_losses[int(skill)] = sac_update(ensemble.agents[skill], sub, rng, step)
    return disc_loss, policy_losses


class DiaynExplorer(Explorer):
    method = "diayn"

    def __init__(self, spec, rng, **overrides):
        super().__init__(spec, rng)
        cfg = self.config = apply_overrides(DiaynConfig(), overrides)
        sac_cfg = SacConfig(gamma=cfg.gamma, alpha=cfg.alpha, lr=cfg.sac_lr, hidden=tuple(cfg.hidden))
        self.ensemble = SkillEnsemble(
            spec.obs_dim, spec.act_dim, spec.action_low, spec.action_high,
            cfg.n_skills, cfg.hidden, cfg.disc_lr, sac_cfg, rng,
        )
        self.replay = Replay(spec.obs_dim, spec.act_dim)
        self.skill = 0
        self.steps = 0

    def begin_episode(self, obs):
        self.skill = int(self.rng.integers(self.config.n_skills))

    def act(self, obs):
        return self.ensemble.agents[self.skill].policy.act(obs, self.rng)

    def observe(self, transition):
        self.replay.add(transition, tag=self.skill)
        self.steps += 1
        cfg = self.config
        if len(self.replay) >= cfg.warmup and self.steps % cfg.update_every == 0:
            batch, skills = self.replay.sample(cfg.batch_size, self.rng)
            diayn_update(self.ensemble, batch, skills, self.rng, self.steps)
