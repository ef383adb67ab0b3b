"""Linear and tanh-squashed Gaussian policies."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..nn import Mlp
from ..tensor import Tensor, as_tensor

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_LOG2 = math.log(2.0)


@dataclass
class LinearPolicy:
    """``action = clip(W @ x + b, low, high)`` with W of shape (act_dim, obs_dim)."""

    W: np.ndarray
    b: np.ndarray
    low: np.ndarray
    high: np.ndarray

    def act(self, x):
        return np.clip(self.W @ np.asarray(x, dtype=np.float64) + self.b, self.low, self.high)

    __call__ = act

    def copy(self):
        return LinearPolicy(self.W.copy(), self.b.copy(), self.low, self.high)

    def perturbed(self, rng, sigma):
        return LinearPolicy(
            self.W + rng.normal(0.0, sigma, size=self.W.shape),
            self.b + rng.normal(0.0, sigma, size=self.b.shape),
            self.low,
            self.high,
        )

    @classmethod
    def random(cls, obs_dim, act_dim, low, high, rng, sigma=1.0):
        W = rng.normal(0.0, sigma, size=(act_dim, obs_dim))
        b = rng.normal(0.0, sigma, size=act_dim)
        return cls(W, b, np.asarray(low, dtype=np.float64), np.asarray(high, dtype=np.float64))


class StochasticPolicy:
    """Gaussian policy squashed by tanh into the action box.

    The network emits per-dimension mean and log-std; log-std is clamped to
    [-5, 2]. ``sample`` is reparameterized, so gradients flow from actions and
    log-probabilities back into the network.
    """

    def __init__(self, obs_dim, act_dim, low, high, hidden=(64, 64), rng=None):
        self.obs_dim, self.act_dim = obs_dim, act_dim
        self.low = np.asarray(low, dtype=np.float64)
        self.high = np.asarray(high, dtype=np.float64)
        self.center = 0.5 * (self.high + self.low)
        self.scale = 0.5 * (self.high - self.low)
        self._log_scale_sum = float(np.log(self.scale).sum())
        self.net = Mlp([obs_dim, *hidden, 2 * act_dim], "identity", rng)

    def _heads(self, obs, frozen):
        out = self.net.forward(obs, frozen=frozen)
        A = self.act_dim
        return out[:, :A], out[:, A:].clip(LOG_STD_MIN, LOG_STD_MAX)

    def sample(self, obs, rng, frozen=False):
        """Reparameterized draw. Returns ``(action, log_prob)`` tensors of shape (B, A) and (B,)."""
        obs = as_tensor(obs)
        if obs.data.ndim == 1:
            obs = obs.reshape(1, -1)
        mean, log_std = self._heads(obs, frozen)
        eps = rng.standard_normal(mean.shape)
        u = mean + log_std.exp() * eps
        action = u.tanh() * self.scale + self.center
        log_gauss = (Tensor(-0.5 * eps * eps - _HALF_LOG_2PI) - log_std).sum(axis=1)
        # log|d tanh(u)/du| = 2 * (log 2 - u - softplus(-2u))
        log_det = ((Tensor(_LOG2) - u - (u * -2.0).softplus()) * 2.0).sum(axis=1)
        return action, log_gauss - log_det - self._log_scale_sum

    def act(self, obs, rng=None, deterministic=False):
        """Single-observation action as a numpy vector."""
        out = self.net.predict(np.asarray(obs, dtype=np.float64))
        mean = out[: self.act_dim]
        if deterministic or rng is None:
            return np.tanh(mean) * self.scale + self.center
        log_std = np.clip(out[self.act_dim :], LOG_STD_MIN, LOG_STD_MAX)
        u = mean + np.exp(log_std) * rng.standard_normal(self.act_dim)
        return np.tanh(u) * self.scale + self.center

    def log_prob(self, obs, action):
        """Log-density of ``action`` given ``obs`` (numpy, batched)."""
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        action = np.atleast_2d(np.asarray(action, dtype=np.float64))
        out = self.net.predict(obs)
        mean = out[:, : self.act_dim]
        log_std = np.clip(out[:, self.act_dim :], LOG_STD_MIN, LOG_STD_MAX)
        t = np.clip((action - self.center) / self.scale, -1.0 + 1e-12, 1.0 - 1e-12)
        u = np.arctanh(t)
        eps = (u - mean) / np.exp(log_std)
        log_gauss = (-0.5 * eps * eps - _HALF_LOG_2PI - log_std).sum(axis=1)
        log_det = (2.0 * (_LOG2 - u - np.logaddexp(0.0, -2.0 * u))).sum(axis=1)
        return log_gauss - log_det - self._log_scale_sum
