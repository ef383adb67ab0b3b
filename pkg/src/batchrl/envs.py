"""Deterministic desk-scale continuous-control environments and task rewards.

Environments are stateless objects describing dynamics; the evolving state
lives in immutable :class:`EnvState` values, so ``step`` is a pure function
of (state, action).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError, InputShapeError


@dataclass(frozen=True)
class EnvSpec:
    name: str
    obs_dim: int
    act_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    max_episode_steps: int
    dt: float
    # nominal observation range, used as default coverage bounds
    obs_low: np.ndarray = field(repr=False, default=None)
    obs_high: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if not np.all(self.action_low < self.action_high):
            raise ConfigError(f"{self.name}: action_low must be < action_high elementwise")
        if self.max_episode_steps <= 0:
            raise ConfigError("max_episode_steps must be positive")

    @property
    def action_span(self):
        return self.action_high - self.action_low


@dataclass(frozen=True)
class EnvState:
    x: np.ndarray
    step_count: int = 0


class Env:
    name = ""

    def __init__(self, max_episode_steps=200):
        self.spec = self._make_spec(int(max_episode_steps))

    def _make_spec(self, max_episode_steps):
        raise NotImplementedError

    def reset(self, seed=None):
        """Return ``(state, observation)``. Starts are deterministic; ``seed`` is accepted for API symmetry."""
        x = self._initial_state()
        return EnvState(x, 0), self.observe(x)

    def step(self, state, action):
        """Advance one step.

        Returns ``(next_state, observation, done, timeout)``; ``timeout`` is set
        when the episode limit (not a failure) ended the episode.
        """
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.shape[0] != self.spec.act_dim:
            raise InputShapeError(f"{self.name}: expected action of length {self.spec.act_dim}, got {action.shape[0]}")
        if not np.all(np.isfinite(action)):
            raise InputError(f"{self.name}: non-finite action {action}")
        action = np.clip(action, self.spec.action_low, self.spec.action_high)
        x = self._dynamics(state.x, action)
        count = state.step_count + 1
        failed = self._failed(x)
        timeout = (not failed) and count >= self.spec.max_episode_steps
        return EnvState(x, count), self.observe(x), failed or timeout, timeout

    def observe(self, x):
        return x.copy()

    def _initial_state(self):
        raise NotImplementedError

    def _dynamics(self, x, action):
        raise NotImplementedError

    def _failed(self, x):
        return False


class PointMass2D(Env):
    """State (px, py, vx, vy); action is a bounded acceleration."""

    name = "pointmass"
    dt = 0.05
    wall = 2.0
    max_speed = 1.0

    def _make_spec(self, max_episode_steps):
        return EnvSpec(
            self.name, 4, 2, np.full(2, -1.0), np.full(2, 1.0), max_episode_steps, self.dt,
            obs_low=np.array([-self.wall, -self.wall, -self.max_speed, -self.max_speed]),
            obs_high=np.array([self.wall, self.wall, self.max_speed, self.max_speed]),
        )

    def _initial_state(self):
        return np.zeros(4)

    def _dynamics(self, x, action):
        v = np.clip(x[2:] + action * self.dt, -self.max_speed, self.max_speed)
        p = x[:2] + v * self.dt
        hit = np.abs(p) > self.wall
        p = np.clip(p, -self.wall, self.wall)
        v = np.where(hit, 0.0, v)
        return np.concatenate([p, v])


class Pendulum(Env):
    """Angle measured from upright; observation (cos th, sin th, th_dot)."""

    name = "pendulum"
    dt = 0.05
    g = 9.8
    length = 1.0
    mass = 1.0
    max_speed = 8.0

    def _make_spec(self, max_episode_steps):
        return EnvSpec(
            self.name, 3, 1, np.array([-2.0]), np.array([2.0]), max_episode_steps, self.dt,
            obs_low=np.array([-1.0, -1.0, -self.max_speed]),
            obs_high=np.array([1.0, 1.0, self.max_speed]),
        )

    def _initial_state(self):
        return np.array([np.pi, 0.0])

    def _dynamics(self, x, action):
        theta, theta_dot = x
        # theta = 0 is upright (unstable), theta = pi hangs down (stable)
        accel = (self.g / self.length) * np.sin(theta) + action[0] / (self.mass * self.length**2)
        theta_dot = float(np.clip(theta_dot + accel * self.dt, -self.max_speed, self.max_speed))
        theta = theta + theta_dot * self.dt
        return np.array([theta, theta_dot])

    def observe(self, x):
        return np.array([np.cos(x[0]), np.sin(x[0]), x[1]])

    def energy(self, x):
        theta, theta_dot = x
        return 0.5 * self.mass * self.length**2 * theta_dot**2 + self.mass * self.g * self.length * np.cos(theta)


class PlanarArm(Env):
    """N-joint planar arm under exact joint-velocity control.

    Observation is [angles, commanded velocities]; leaving the joint limit
    ends the episode as a failure.
    """

    name = "planar-arm"
    dt = 0.05
    link_length = 0.2
    joint_limit = 2.8
    max_velocity = 0.5

    def __init__(self, max_episode_steps=200, n_joints=7):
        self.n_joints = int(n_joints)
        super().__init__(max_episode_steps)

    def _make_spec(self, max_episode_steps):
        n = self.n_joints
        return EnvSpec(
            self.name, 2 * n, n,
            np.full(n, -self.max_velocity), np.full(n, self.max_velocity),
            max_episode_steps, self.dt,
            obs_low=np.concatenate([np.full(n, -self.joint_limit), np.full(n, -self.max_velocity)]),
            obs_high=np.concatenate([np.full(n, self.joint_limit), np.full(n, self.max_velocity)]),
        )

    def _initial_state(self):
        return np.zeros(2 * self.n_joints)

    def _dynamics(self, x, action):
        angles = x[: self.n_joints] + action * self.dt
        return np.concatenate([angles, action])

    def _failed(self, x):
        return bool(np.any(np.abs(x[: self.n_joints]) > self.joint_limit))

    def tooltip(self, obs):
        return forward_kinematics(np.asarray(obs)[..., : self.n_joints], self.link_length)


ENVIRONMENTS = {cls.name: cls for cls in (PointMass2D, Pendulum, PlanarArm)}


def make_env(name, **params):
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise ConfigError(f"unknown environment {name!r}; expected one of {sorted(ENVIRONMENTS)}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name}: {exc}") from None


def env_reset(env, seed=None):
    if isinstance(env, str):
        env = make_env(env)
    return env.reset(seed)


def env_step(env, state, action):
    return env.step(state, action)


def forward_kinematics(angles, link_length=0.2):
    """Tooltip position of a planar chain; accepts (N,) or (..., N) angle arrays."""
    angles = np.asarray(angles, dtype=np.float64)
    cumulative = np.cumsum(angles, axis=-1)
    x = link_length * np.cos(cumulative).sum(axis=-1)
    y = link_length * np.sin(cumulative).sum(axis=-1)
    return np.stack([x, y], axis=-1)


# -- task rewards ---------------------------------------------------------------


@dataclass(frozen=True)
class TaskReward:
    """Stateless reward on observations. ``env`` is None for env-agnostic rewards."""

    name: str
    env: str | None
    params: tuple = ()
    obs_dim: int | None = None

    def __call__(self, obs):
        obs = np.asarray(obs, dtype=np.float64)
        if self.obs_dim is not None and obs.shape[-1] != self.obs_dim:
            raise InputShapeError(f"reward {self.name} expects observations of width {self.obs_dim}")
        return _REWARD_FUNCS[self.name](self, obs)

    @property
    def spec_string(self):
        if not self.params:
            return self.name
        return f"{self.name}:" + ",".join(repr(float(p)) for p in self.params)

    @property
    def target(self):
        return np.asarray(self.params, dtype=np.float64)


def _point_goal(reward, obs):
    return -np.linalg.norm(obs[..., :2] - reward.target, axis=-1)


def _velocity(reward, obs):
    return obs[..., 2].copy()


def _upright(reward, obs):
    return obs[..., 0].copy()


def _tooltip_reach(reward, obs):
    n = obs.shape[-1] // 2
    tip = forward_kinematics(obs[..., :n], PlanarArm.link_length)
    return -np.linalg.norm(tip - reward.target, axis=-1)


def _zero(reward, obs):
    return np.zeros(obs.shape[:-1])


_REWARD_FUNCS = {
    "point-goal": _point_goal,
    "velocity": _velocity,
    "upright": _upright,
    "tooltip-reach": _tooltip_reach,
    "zero": _zero,
}

# name -> (env, number of parameters, obs_dim)
_REWARD_SIGNATURES = {
    "point-goal": ("pointmass", 2, 4),
    "velocity": ("pointmass", 0, 4),
    "upright": ("pendulum", 0, 3),
    "tooltip-reach": ("planar-arm", 2, 14),
    "zero": (None, 0, None),
}


def make_reward(name, params=()):
    if name not in _REWARD_SIGNATURES:
        raise ConfigError(f"unknown reward {name!r}; expected one of {sorted(_REWARD_SIGNATURES)}")
    env, n_params, obs_dim = _REWARD_SIGNATURES[name]
    params = tuple(float(p) for p in params)
    if len(params) != n_params:
        raise ConfigError(f"reward {name} takes {n_params} parameters, got {len(params)}")
    if not all(np.isfinite(params)):
        raise ConfigError(f"reward {name} parameters must be finite")
    return TaskReward(name, env, params, obs_dim)


def parse_reward(text):
    """Parse the ``name:p1,p2`` syntax, e.g. ``point-goal:0,0``."""
    name, _, rest = text.partition(":")
    params = []
    if rest.strip():
        try:
            params = [float(p) for p in rest.split(",")]
        except ValueError:
            raise ConfigError(f"could not parse reward parameters in {text!r}") from None
    return make_reward(name.strip(), params)


def task_reward(reward, observation):
    if isinstance(reward, str):
        reward = parse_reward(reward)
    return reward(observation)
