"""Offline training driver and policy checkpoints.

Training consumes only relabeled dataset batches; nothing in this module
constructs or steps an environment.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os

import numpy as np

from ..dataset import relabel, sample_batch
from ..envs import make_env
from ..errors import ConfigError, TrainingDivergenceError
from ..explore.base import apply_overrides
from ..nn import encode_networks, load_networks
from .bcq import BcqConfig, BcqLearner
from .td3 import Td3Config, Td3Learner

LOG_COLUMNS = ("step", "critic_loss", "actor_loss", "aux_loss")

ALGORITHMS = {"td3": (Td3Learner, Td3Config), "bcq": (BcqLearner, BcqConfig)}


def make_learner(algo, obs_dim, act_dim, low, high, overrides=None, rng=None):
    try:
        cls, config_cls = ALGORITHMS[algo]
    except KeyError:
        raise ConfigError(f"unknown offline algorithm {algo!r}; expected one of {sorted(ALGORITHMS)}") from None
    config = apply_overrides(config_cls(), overrides or {})
    return cls(obs_dim, act_dim, low, high, config, rng)


class OfflinePolicy:
    """A trained learner plus what is needed to act with it."""

    def __init__(self, learner, env, obs_dim, action_low, action_high, metadata=None, rng=None):
        self.learner = learner
        self.algorithm = learner.algorithm
        self.env = env
        self.obs_dim = int(obs_dim)
        self.action_low = np.asarray(action_low, dtype=np.float64)
        self.action_high = np.asarray(action_high, dtype=np.float64)
        self.metadata = dict(metadata or {})
        self.rng = rng if rng is not None else np.random.default_rng(0)

    @property
    def step_counter(self):
        return self.learner.step_counter

    def networks(self):
        return self.learner.networks()

    def act(self, obs, rng=None):
        """Evaluation action: deterministic actor for TD3, candidate argmax for BCQ."""
        if self.algorithm == "td3":
            return self.learner.act(obs)
        return self.learner.act(obs, rng if rng is not None else self.rng)

    def param_hash(self):
        return hashlib.sha256(encode_networks(list(self.networks().values()))).hexdigest()


def _window_mean(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else float("nan")


def train_offline(dataset, reward, algo, steps, seed, overrides=None, log_every=1000, metadata=None):
    """Train ``algo`` for ``steps`` updates on ``dataset`` relabeled with ``reward``.

    Returns ``(policy, log_rows)`` where each row is
    ``(step, critic_loss, actor_loss, aux_loss)`` averaged over the preceding window.
    """
    if steps < 0:
        raise ConfigError("steps must be non-negative")
    labeled = relabel(dataset, reward)
    init_seq, train_seq = np.random.SeedSequence(seed).spawn(2)
    init_rng = np.random.default_rng(init_seq)
    rng = np.random.default_rng(train_seq)
    low = dataset.metadata.get("action_low")
    high = dataset.metadata.get("action_high")
    if low is None or high is None:
        # bounds are static properties of the environment class; no stepping happens
        spec = make_env(dataset.env).spec
        low, high = spec.action_low, spec.action_high
    learner = make_learner(algo, dataset.obs_dim, dataset.act_dim, low, high, overrides, init_rng)
    batch_size = learner.config.batch_size

    rows = []
    window = {"critic_loss": [], "actor_loss": [], "aux_loss": []}
    for step in range(1, steps + 1):
        batch = labeled.take(sample_batch(len(labeled), batch_size, rng))
        try:
            losses = learner.update(batch, rng)
        except TrainingDivergenceError as exc:
            raise TrainingDivergenceError(f"{algo} training diverged: {exc}", step) from exc
        for key in window:
            window[key].append(losses.get(key))
        if step % log_every == 0 or step == steps:
            rows.append((step, *(_window_mean(window[k]) for k in ("critic_loss", "actor_loss", "aux_loss"))))
            for key in window:
                window[key].clear()
            for name, net in learner.networks().items():
                if not np.all(np.isfinite(net.params.values)):
                    raise TrainingDivergenceError(f"{algo} network {name} has non-finite parameters", step)

    meta = {
        "algorithm": algo,
        "env": dataset.env,
        "reward": reward.spec_string,
        "dataset_hash": dataset.content_hash(),
        "steps": steps,
        "seed": seed,
        "config": _jsonable(dataclasses.asdict(learner.config)),
    }
    meta.update(metadata or {})
    policy = OfflinePolicy(learner, dataset.env, dataset.obs_dim, low, high, meta, np.random.default_rng(rng.integers(2**63)))
    return policy, rows


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def save_policy(policy, path):
    """Write the network records (BRLP) plus a JSON sidecar at ``path + '.json'``."""
    nets = policy.networks()
    with open(path, "wb") as fh:
        fh.write(encode_networks(list(nets.values())))
    sidecar = dict(policy.metadata)
    sidecar.update(
        {
            "algorithm": policy.algorithm,
            "env": policy.env,
            "networks": list(nets),
            "obs_dim": policy.obs_dim,
            "act_dim": len(policy.action_low),
            "action_low": policy.action_low.tolist(),
            "action_high": policy.action_high.tolist(),
        }
    )
    with open(os.fspath(path) + ".json", "w") as fh:
        json.dump(_jsonable(sidecar), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_policy(path, rng=None):
    with open(os.fspath(path) + ".json") as fh:
        meta = json.load(fh)
    algo = meta["algorithm"]
    config = dict(meta.get("config", {}))
    learner = make_learner(algo, meta["obs_dim"], meta["act_dim"], meta["action_low"], meta["action_high"], config)
    loaded = load_networks(path)
    names = meta["networks"]
    targets = learner.networks()
    if len(loaded) != len(names) or set(names) != set(targets):
        raise ConfigError(f"checkpoint networks {names} do not match a {algo} learner")
    for name, net in zip(names, loaded):
        targets[name].load_from(net)
    return OfflinePolicy(learner, meta["env"], meta["obs_dim"], meta["action_low"], meta["action_high"], meta, rng)
