"""Batch-constrained Q-learning for continuous actions.

A conditional VAE models the dataset's actions per state; a small
perturbation network nudges generated actions within +-phi; the critic
bootstraps from the best perturbed candidate under a soft clipped double-Q.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..nn import Adam, Mlp, minimize
from ..tensor import Tensor, concat

LOG_STD_MIN = -4.0
LOG_STD_MAX = 15.0


@dataclass
class BcqConfig:
    gamma: float = 0.99
    tau: float = 0.005
    n_candidates: int = 10
    phi_fraction: float = 0.05  # perturbation range as a fraction of the action span
    lam: float = 0.75
    latent_dim: int | None = None  # defaults to 2 * act_dim
    latent_clip: float = 2.5
    batch_size: int = 256
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    vae_lr: float = 1e-3
    hidden: tuple = (64, 64)

    def __post_init__(self):
        if self.n_candidates < 1:
            raise ConfigError("n_candidates must be >= 1")
        if self.phi_fraction < 0:
            raise ConfigError("phi_fraction must be non-negative")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("lam must lie in [0, 1]")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError("tau must lie in (0, 1]")


class ActionGenerator:
    """State-conditional VAE over actions; decoded actions are squashed into the bounds."""

    def __init__(self, obs_dim, act_dim, latent_dim, low, high, hidden=(64, 64), latent_clip=2.5, rng=None):
        self.obs_dim, self.act_dim, self.latent_dim = obs_dim, act_dim, latent_dim
        self.low = np.asarray(low, dtype=np.float64)
        self.high = np.asarray(high, dtype=np.float64)
        self.center = 0.5 * (self.high + self.low)
        self.scale = 0.5 * (self.high - self.low)
        self.latent_clip = latent_clip
        self.encoder = Mlp([obs_dim + act_dim, *hidden, 2 * latent_dim], "identity", rng)
        self.decoder = Mlp([obs_dim + latent_dim, *hidden, act_dim], "tanh", rng)

    def encode(self, obs, action):
        out = self.encoder(np.concatenate([obs, action], axis=1))
        L = self.latent_dim
        return out[:, :L], out[:, L:].clip(LOG_STD_MIN, LOG_STD_MAX)

    def decode(self, obs, z):
        """Differentiable decode of given latents."""
        return self.decoder(concat([Tensor(obs), z], axis=1)) * self.scale + self.center

    def sample_latent(self, n, rng):
        z = rng.standard_normal((n, self.latent_dim))
        return np.clip(z, -self.latent_clip, self.latent_clip)

    def sample(self, obs, rng):
        """Generator actions for each row of ``obs`` (numpy, no graph)."""
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        z = self.sample_latent(obs.shape[0], rng)
        return self.decoder.predict(np.concatenate([obs, z], axis=1)) * self.scale + self.center

    def loss(self, obs, action, rng):
        mean, log_std = self.encode(obs, action)
        std = log_std.exp()
        z = mean + std * rng.standard_normal(mean.shape)
        recon = (self.decode(obs, z) - Tensor(action)).square().mean()
        kl = ((log_std * 2.0 + 1.0) - mean.square() - std.square()).mean() * -0.5
        return recon + kl * 0.5, recon, kl


def kl_to_standard_normal(mean, log_std):
    mean = np.asarray(mean, dtype=np.float64)
    log_std = np.asarray(log_std, dtype=np.float64)
    return float(np.mean(-0.5 * (1.0 + 2.0 * log_std - mean**2 - np.exp(2.0 * log_std))))


class Perturbation:
    """``clip(a + phi * tanh(net([x, a])), low, high)``."""

    def __init__(self, obs_dim, act_dim, low, high, phi, hidden=(64, 64), rng=None, net=None):
        self.low = np.asarray(low, dtype=np.float64)
        self.high = np.asarray(high, dtype=np.float64)
        self.phi = np.broadcast_to(np.asarray(phi, dtype=np.float64), self.low.shape).copy()
        self.net = net if net is not None else Mlp([obs_dim + act_dim, *hidden, act_dim], "tanh", rng)

    def forward(self, obs, action, frozen=False):
        action = Tensor(action) if not isinstance(action, Tensor) else action
        out = action + self.net.forward(concat([Tensor(obs), action], axis=1), frozen=frozen) * self.phi
        return out.clip(self.low, self.high)

    def predict(self, obs, action):
        xi = self.phi * self.net.predict(np.concatenate([obs, action], axis=1))
        return np.clip(action + xi, self.low, self.high)

    def copy(self):
        return Perturbation(0, 0, self.low, self.high, self.phi, net=self.net.copy())


class BcqLearner:
    algorithm = "bcq"

    def __init__(self, obs_dim, act_dim, low, high, config=None, rng=None):
        self.config = cfg = config or BcqConfig()
        hidden = tuple(cfg.hidden)
        low = np.asarray(low, dtype=np.float64)
        high = np.asarray(high, dtype=np.float64)
        latent = cfg.latent_dim or 2 * act_dim
        self.generator = ActionGenerator(obs_dim, act_dim, latent, low, high, hidden, cfg.latent_clip, rng)
        self.actor = Perturbation(obs_dim, act_dim, low, high, cfg.phi_fraction * (high - low), hidden, rng)
        self.critic1 = Mlp([obs_dim + act_dim, *hidden, 1], "identity", rng)
        self.critic2 = Mlp([obs_dim + act_dim, *hidden, 1], "identity", rng)
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        self.actor_opt = Adam(self.actor.net, cfg.actor_lr)
        self.critic1_opt = Adam(self.critic1, cfg.critic_lr)
        self.critic2_opt = Adam(self.critic2, cfg.critic_lr)
        self.vae_opt_enc = Adam(self.generator.encoder, cfg.vae_lr)
        self.vae_opt_dec = Adam(self.generator.decoder, cfg.vae_lr)
        self.step_counter = 0

    def networks(self):
        return {
            "encoder": self.generator.encoder,
            "decoder": self.generator.decoder,
            "actor": self.actor.net,
            "critic1": self.critic1,
            "critic2": self.critic2,
            "actor_target": self.actor_target.net,
            "critic1_target": self.critic1_target,
            "critic2_target": self.critic2_target,
        }

    def act(self, obs, rng):
        return bcq_select_action(self, obs, rng)

    def update(self, batch, rng):
        return bcq_update(self, batch, rng)


def bcq_generator_update(learner, batch, rng, step=None):
    gen = learner.generator
    loss, _, _ = gen.loss(batch.obs, batch.action, rng)
    return minimize(loss, [gen.encoder, gen.decoder], [learner.vae_opt_enc, learner.vae_opt_dec], step)


def soft_clipped_q(q1, q2, lam):
    return lam * np.minimum(q1, q2) + (1.0 - lam) * np.maximum(q1, q2)


def bcq_target(batch, learner, rng):
    """Best-of-n soft clipped double-Q target at perturbed generator samples for the next states."""
    cfg = learner.config
    n = cfg.n_candidates
    next_obs = np.repeat(batch.next_obs, n, axis=0)
    candidates = learner.actor_target.predict(next_obs, learner.generator.sample(next_obs, rng))
    sa = np.concatenate([next_obs, candidates], axis=1)
    q = soft_clipped_q(learner.critic1_target.predict(sa)[:, 0], learner.critic2_target.predict(sa)[:, 0], cfg.lam)
    q_best = q.reshape(-1, n).max(axis=1)
    return batch.reward + cfg.gamma * batch.not_done * q_best


def bcq_select_action(learner, x, rng):
    """Sample candidates from the generator, perturb, and return the one with the highest Q1."""
    n = learner.config.n_candidates
    x = np.asarray(x, dtype=np.float64)
    obs = np.repeat(x[None, :], n, axis=0)
    candidates = learner.actor.predict(obs, learner.generator.sample(obs, rng))
    q = learner.critic1.predict(np.concatenate([obs, candidates], axis=1))[:, 0]
    return candidates[int(np.argmax(q))]


def bcq_update(learner, batch, rng):
    cfg = learner.config
    learner.step_counter += 1
    step = learner.step_counter
    aux = bcq_generator_update(learner, batch, rng, step)

    target = Tensor(bcq_target(batch, learner, rng)[:, None])
    sa = np.concatenate([batch.obs, batch.action], axis=1)
    critic_loss = (learner.critic1(sa) - target).square().mean() + (learner.critic2(sa) - target).square().mean()
    critic_value = minimize(critic_loss, [learner.critic1, learner.critic2], [learner.critic1_opt, learner.critic2_opt], step)

    sampled = learner.generator.sample(batch.obs, rng)
    perturbed = learner.actor.forward(batch.obs, sampled)
    q = learner.critic1.forward(concat([Tensor(batch.obs), perturbed], axis=1), frozen=True)
    actor_value = minimize(-q.mean(), [learner.actor.net], [learner.actor_opt], step)

    learner.critic1_target.polyak_update(learner.critic1, cfg.tau)
    learner.critic2_target.polyak_update(learner.critic2, cfg.tau)
    learner.actor_target.net.polyak_update(learner.actor.net, cfg.tau)
    return {"critic_loss": critic_value, "actor_loss": actor_value, "aux_loss": aux}
