"""Goal exploration with linear policies and trajectory-mean descriptors."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import PhaseError
from .base import Explorer, apply_overrides
from .policies import LinearPolicy


@dataclass
class GepConfig:
    bootstrap_target: int = 50
    init_sigma: float = 1.0
    perturb_sigma: float = 0.1


@dataclass
class GepMemory:
    policies: list = field(default_factory=list)
    descriptors: list = field(default_factory=list)
    bootstrap_target: int = 50

    def __len__(self):
        return len(self.policies)

    def add(self, policy, descriptor):
        self.policies.append(policy)
        self.descriptors.append(np.asarray(descriptor, dtype=np.float64))

    @property
    def bootstrapped(self):
        return len(self) >= self.bootstrap_target

    def nearest(self, goal):
        """Index of the descriptor closest to ``goal``; ties go to the lowest index."""
        if not self.descriptors:
            raise PhaseError("GEP memory is empty")
        diff = np.asarray(self.descriptors) - np.asarray(goal, dtype=np.float64)
        return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))


def gep_select_and_perturb(memory, goal, rng, sigma=0.1):
    if not memory.bootstrapped:
        raise PhaseError(
            f"GEP memory holds {len(memory)} entries; goal-directed selection needs {memory.bootstrap_target}"
        )
    parent = memory.policies[memory.nearest(goal)]
    return parent.perturbed(rng, sigma)


def gep_sample_goal(low, high, rng):
    low = np.asarray(low, dtype=np.float64)
    high = np.asarray(high, dtype=np.float64)
    return rng.uniform(low, high)


class GepExplorer(Explorer):
    method = "gep"

    def __init__(self, spec, rng, **overrides):
        super().__init__(spec, rng)
        self.config = apply_overrides(GepConfig(), overrides)
        self.memory = GepMemory(bootstrap_target=self.config.bootstrap_target)
        self.low = None
        self.high = None
        self.policy = None
        self._states = []

    def _track(self, obs):
        obs = np.asarray(obs, dtype=np.float64)
        self._states.append(obs)
        if self.low is None:
            self.low, self.high = obs.copy(), obs.copy()
        else:
            np.minimum(self.low, obs, out=self.low)
            np.maximum(self.high, obs, out=self.high)

    def begin_episode(self, obs):
        self._states = []
        self._track(obs)
        if self.memory.bootstrapped:
            goal = gep_sample_goal(self.low, self.high, self.rng)
            self.policy = gep_select_and_perturb(self.memory, goal, self.rng, self.config.perturb_sigma)
        else:
            spec = self.spec
            self.policy = LinearPolicy.random(
                spec.obs_dim, spec.act_dim, spec.action_low, spec.action_high, self.rng, self.config.init_sigma
            )

    def act(self, obs):
        return self.policy.act(obs)

    def observe(self, transition):
        self._track(transition.next_obs)

    def end_episode(self):
        self.memory.add(self.policy, np.mean(self._states, axis=0))
