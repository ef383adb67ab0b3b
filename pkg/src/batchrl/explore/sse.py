"""Self-supervised exploration through forward-model disagreement.

Two forward models are fitted on disjoint halves of each minibatch; their
disagreement is the novelty signal. The policy is trained by differentiating
the discounted, survival-weighted sum of disagreement and entropy along
short imagined rollouts of the mean model.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TrainingDivergenceError
from ..nn import Adam, Mlp, minimize
from ..tensor import Tensor, as_tensor, concat
from .base import Explorer, Replay, apply_overrides
from .policies import StochasticPolicy

_BCE_CLIP = 1e-12


@dataclass
class SseConfig:
    hidden: tuple = (64, 64)
    horizon: int = 5
    gamma: float = 0.99
    entropy_weight: float = 1.0
    model_lr: float = 1e-3
    policy_lr: float = 3e-4
    warmup: int = 256
    batch_size: int = 128
    update_every: int = 1


class SseModels:
    """Forward models predict the next observation as ``x + net([x, a])``."""

    def __init__(self, obs_dim, act_dim, low, high, hidden=(64, 64), horizon=5, gamma=0.99,
                 entropy_weight=1.0, model_lr=1e-3, policy_lr=3e-4, rng=None):
        self.obs_dim, self.act_dim = obs_dim, act_dim
        self.f1 = Mlp([obs_dim + act_dim, *hidden, obs_dim], "identity", rng)
        self.f2 = Mlp([obs_dim + act_dim, *hidden, obs_dim], "identity", rng)
        self.f_done = Mlp([obs_dim, *hidden, 1], "sigmoid", rng)
        self.policy = StochasticPolicy(obs_dim, act_dim, low, high, hidden, rng)
        self.horizon = horizon
        self.gamma = gamma
        self.entropy_weight = entropy_weight
        self.f1_opt = Adam(self.f1, model_lr)
        self.f2_opt = Adam(self.f2, model_lr)
        self.done_opt = Adam(self.f_done, model_lr)
        self.policy_opt = Adam(self.policy.net, policy_lr)
        self.updates = 0


def predict_next(model, x, a, frozen=False):
    x = as_tensor(x)
    return x + model.forward(concat([x, as_tensor(a)], axis=1), frozen=frozen)


def sse_reward(models, x, a):
    """``||f1(x, a) - f2(x, a)||`` per row (numpy)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    xa = np.concatenate([x, a], axis=1)
    diff = models.f1.predict(xa) - models.f2.predict(xa)
    return np.sqrt(np.sum(diff * diff, axis=1))


def intrinsic_pred_error_reward(model, x_t, a_t, x_next):
    """One-step prediction error ``||x_next - model(x_t, a_t)||`` for a single residual forward model."""
    x_t = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
    a_t = np.atleast_2d(np.asarray(a_t, dtype=np.float64))
    pred = x_t + model.predict(np.concatenate([x_t, a_t], axis=1))
    diff = np.atleast_2d(x_next) - pred
    out = np.sqrt(np.sum(diff * diff, axis=1))
    return float(out[0]) if out.shape[0] == 1 else out


def sse_rollout_value(models, start_obs, rng, horizon=None, gamma=None):
    """Differentiable rollout objective averaged over start states.

    For ``t < H``: ``a_t ~ pi(x_t)`` (reparameterized), reward
    ``||f1 - f2||`` at ``(x_t, a_t)``, survival ``prod_{k<=t} (1 - f_done(x_k))``,
    and ``x_{t+1}`` the mean of both model predictions. Models are held fixed;
    only the policy receives gradient.
    """
    horizon = models.horizon if horizon is None else horizon
    gamma = models.gamma if gamma is None else gamma
    x = Tensor(np.atleast_2d(np.asarray(start_obs, dtype=np.float64)))
    survival = Tensor(np.ones(x.shape[0]))
    total = Tensor(np.zeros(x.shape[0]))
    for t in range(horizon):
        action, logp = models.policy.sample(x, rng)
        p1 = predict_next(models.f1, x, action, frozen=True)
        p2 = predict_next(models.f2, x, action, frozen=True)
        reward = (p1 - p2).norm(axis=1)
        done_prob = models.f_done.forward(x, frozen=True)[:, 0]
        survival = survival * (1.0 - done_prob)
        total = total + survival * (reward - logp * models.entropy_weight) * (gamma**t)
        x = (p1 + p2) * 0.5
    value = total.mean()
    if not np.isfinite(value.data):
        raise TrainingDivergenceError("non-finite rollout value")
    return value


def forward_model_loss(model, obs, action, next_obs):
    pred = predict_next(model, obs, action)
    return (pred - Tensor(next_obs)).square().mean()


def done_loss(models, next_obs, failure):
    p = models.f_done(next_obs)[:, 0].clip(_BCE_CLIP, 1.0 - _BCE_CLIP)
    y = np.asarray(failure, dtype=np.float64)
    return -(p.log() * y + (1.0 - p).log() * (1.0 - y)).mean()


def sse_update(models, batch, rng, step=None):
    """Fit f1/f2 on disjoint halves, f_done on failure labels, then one policy ascent step."""
    models.updates += 1
    step = models.updates if step is None else step
    n = len(batch)
    half = max(1, n // 2)
    first, second = slice(0, half), slice(half, n) if n > 1 else slice(0, n)
    f1_loss = minimize(
        forward_model_loss(models.f1, batch.obs[first], batch.action[first], batch.next_obs[first]),
        [models.f1], [models.f1_opt], step,
    )
    f2_loss = minimize(
        forward_model_loss(models.f2, batch.obs[second], batch.action[second], batch.next_obs[second]),
        [models.f2], [models.f2_opt], step,
    )
    bce = minimize(done_loss(models, batch.next_obs, 1.0 - batch.not_done), [models.f_done], [models.done_opt], step)
    value = sse_rollout_value(models, batch.obs, rng)
    neg_value = minimize(-value, [models.policy.net], [models.policy_opt], step)
    return {"f1_loss": f1_loss, "f2_loss": f2_loss, "done_loss": bce, "value": -neg_value}


class SseExplorer(Explorer):
    method = "sse"

    def __init__(self, spec, rng, **overrides):
        super().__init__(spec, rng)
        cfg = self.config = apply_overrides(SseConfig(), overrides)
        self.models = SseModels(
            spec.obs_dim, spec.act_dim, spec.action_low, spec.action_high, cfg.hidden, cfg.horizon,
            cfg.gamma, cfg.entropy_weight, cfg.model_lr, cfg.policy_lr, rng,
        )
        self.replay = Replay(spec.obs_dim, spec.act_dim)
        self.steps = 0

    def act(self, obs):
        return self.models.policy.act(obs, self.rng)

    def observe(self, transition):
        self.replay.add(transition)
        self.steps += 1
        cfg = self.config
        if len(self.replay) >= cfg.warmup and self.steps % cfg.update_every == 0:
            batch, _ = self.replay.sample(cfg.batch_size, self.rng)
            sse_update(self.models, batch, self.rng, self.steps)
