"""Immutable transition datasets: binary format, sampling, relabeling, coverage.

File layout (little-endian)::

    "BRL1" | version u16 | obs_dim u16 | act_dim u16 | reserved u16 | n u64
    n x [obs f32*obs_dim | action f32*act_dim | next_obs f32*obs_dim | flags u8]

flags bit0 = done, bit1 = timeout. A JSON sidecar sits at ``path + ".json"``.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import os
import struct
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import ConfigError, CorruptionError, FormatError, UsageError

MAGIC = b"BRL1"
VERSION = 1
HEADER = struct.Struct("<4sHHHHQ")
HEADER_SIZE = HEADER.size  # 20

DONE = 1
TIMEOUT = 2


def record_dtype(obs_dim, act_dim):
    return np.dtype(
        [
            ("obs", "<f4", (obs_dim,)),
            ("action", "<f4", (act_dim,)),
            ("next_obs", "<f4", (obs_dim,)),
            ("flags", "u1"),
        ]
    )


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: np.ndarray
    next_obs: np.ndarray
    done: bool
    timeout: bool = False


class Dataset:
    """Read-only transition arrays plus metadata.

    Arrays are stored as float32, exactly as they appear on disk.
    """

    def __init__(self, obs, actions, next_obs, flags, metadata=None):
        obs = np.ascontiguousarray(obs, dtype=np.float32)
        actions = np.ascontiguousarray(actions, dtype=np.float32)
        next_obs = np.ascontiguousarray(next_obs, dtype=np.float32)
        flags = np.ascontiguousarray(flags, dtype=np.uint8)
        n = obs.shape[0]
        if obs.ndim != 2 or actions.ndim != 2 or next_obs.shape != obs.shape:
            raise CorruptionError("transition arrays have inconsistent shapes")
        if actions.shape[0] != n or flags.shape != (n,):
            raise CorruptionError("transition arrays have inconsistent lengths")
        for arr in (obs, actions, next_obs, flags):
            arr.flags.writeable = False
        self.obs, self.actions, self.next_obs, self.flags = obs, actions, next_obs, flags
        self.metadata = dict(metadata or {})
        self.metadata.setdefault("obs_dim", obs.shape[1])
        self.metadata.setdefault("act_dim", actions.shape[1])

    def __len__(self):
        return self.obs.shape[0]

    def __getitem__(self, i):
        f = int(self.flags[i])
        return Transition(self.obs[i], self.actions[i], self.next_obs[i], bool(f & DONE), bool(f & TIMEOUT))

    @property
    def obs_dim(self):
        return self.obs.shape[1]

    @property
    def act_dim(self):
        return self.actions.shape[1]

    @property
    def env(self):
        return self.metadata.get("env")

    @property
    def done(self):
        return (self.flags & DONE) != 0

    @property
    def timeout(self):
        return (self.flags & TIMEOUT) != 0

    def episode_bounds(self):
        """(start, stop) index pairs; a trailing unfinished episode is included."""
        ends = np.flatnonzero(self.done) + 1
        starts = np.concatenate([[0], ends])
        stops = np.concatenate([ends, [len(self)]])
        return [(int(a), int(b)) for a, b in zip(starts, stops) if b > a]

    def to_bytes(self):
        n = len(self)
        records = np.empty(n, dtype=record_dtype(self.obs_dim, self.act_dim))
        records["obs"] = self.obs
        records["action"] = self.actions
        records["next_obs"] = self.next_obs
        records["flags"] = self.flags
        header = HEADER.pack(MAGIC, VERSION, self.obs_dim, self.act_dim, 0, n)
        return header + records.tobytes()

    def content_hash(self):
        return hashlib.sha256(self.to_bytes()).hexdigest()


class DatasetBuilder:
    """Append-only collector used during exploration."""

    def __init__(self, obs_dim, act_dim, capacity=1024):
        self.obs_dim, self.act_dim = obs_dim, act_dim
        self._obs = np.empty((capacity, obs_dim), np.float32)
        self._act = np.empty((capacity, act_dim), np.float32)
        self._next = np.empty((capacity, obs_dim), np.float32)
        self._flags = np.empty(capacity, np.uint8)
        self._n = 0

    def __len__(self):
        return self._n

    def append(self, obs, action, next_obs, done, timeout=False):
        if self._n == self._obs.shape[0]:
            grow = max(1024, self._n)
            self._obs = np.concatenate([self._obs, np.empty((grow, self.obs_dim), np.float32)])
            self._act = np.concatenate([self._act, np.empty((grow, self.act_dim), np.float32)])
            self._next = np.concatenate([self._next, np.empty((grow, self.obs_dim), np.float32)])
            self._flags = np.concatenate([self._flags, np.empty(grow, np.uint8)])
        i = self._n
        self._obs[i] = obs
        self._act[i] = action
        self._next[i] = next_obs
        self._flags[i] = (DONE if (done or timeout) else 0) | (TIMEOUT if timeout else 0)
        self._n += 1

    def build(self, metadata=None):
        n = self._n
        return Dataset(self._obs[:n].copy(), self._act[:n].copy(), self._next[:n].copy(), self._flags[:n].copy(), metadata)


def _sidecar_metadata(dataset):
    meta = dataset.metadata
    out = {
        "env": meta.get("env"),
        "method": meta.get("method"),
        "seed": meta.get("seed"),
        "steps": meta.get("steps", len(dataset)),
        "config_hash": meta.get("config_hash"),
        "created_utc": meta.get("created_utc") or datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    }
    extra = {k: v for k, v in meta.items() if k not in out and k not in ("obs_dim", "act_dim")}
    out.update(extra)
    return out


def dataset_write(dataset, path):
    if len(dataset) == 0:
        raise UsageError("refusing to write an empty dataset")
    blob = dataset.to_bytes()
    with open(path, "wb") as fh:
        fh.write(blob)
    with open(os.fspath(path) + ".json", "w") as fh:
        json.dump(_sidecar_metadata(dataset), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def dataset_from_bytes(blob, metadata=None):
    if len(blob) < HEADER_SIZE:
        if blob[:4] != MAGIC[: len(blob[:4])]:
            raise FormatError("bad dataset magic")
        raise CorruptionError("truncated dataset header")
    magic, version, obs_dim, act_dim, _reserved, n = HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"bad dataset magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported dataset version {version}")
    dtype = record_dtype(obs_dim, act_dim)
    expected = HEADER_SIZE + n * dtype.itemsize
    if len(blob) < expected:
        raise CorruptionError(f"truncated dataset: expected {expected} bytes, found {len(blob)}")
    if len(blob) > expected:
        raise CorruptionError(f"dataset has {len(blob) - expected} trailing bytes")
    records = np.frombuffer(blob, dtype=dtype, count=n, offset=HEADER_SIZE)
    if np.any(records["flags"] & ~np.uint8(DONE | TIMEOUT)):
        raise CorruptionError("unknown flag bits set")
    return Dataset(records["obs"], records["action"], records["next_obs"], records["flags"], metadata)


def dataset_read(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    metadata = {}
    sidecar = os.fspath(path) + ".json"
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            metadata = json.load(fh)
    return dataset_from_bytes(blob, metadata)


def file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- sampling and relabeling ---------------------------------------------------


def sample_batch(dataset_or_size, batch_size, rng):
    """I.i.d. uniform indices into a dataset."""
    n = dataset_or_size if isinstance(dataset_or_size, (int, np.integer)) else len(dataset_or_size)
    if n <= 0:
        raise UsageError("cannot sample from an empty dataset")
    if batch_size < 1:
        raise UsageError("batch_size must be at least 1")
    return rng.integers(0, n, size=batch_size)


@dataclass
class LabeledBatch:
    """float64 arrays; ``not_done`` is 0 only for failure terminations."""

    obs: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_obs: np.ndarray
    not_done: np.ndarray

    def __len__(self):
        return self.obs.shape[0]

    def take(self, idx):
        return LabeledBatch(self.obs[idx], self.action[idx], self.reward[idx], self.next_obs[idx], self.not_done[idx])


def relabel(dataset, reward):
    """Label every transition with ``reward(next_obs)``. The dataset is not modified."""
    if reward.env is not None and dataset.env is not None and reward.env != dataset.env:
        raise ConfigError(f"reward {reward.name!r} is defined for {reward.env!r}, dataset was collected on {dataset.env!r}")
    next_obs = dataset.next_obs.astype(np.float64)
    failure = dataset.done & ~dataset.timeout
    return LabeledBatch(
        obs=dataset.obs.astype(np.float64),
        action=dataset.actions.astype(np.float64),
        reward=np.asarray(reward(next_obs), dtype=np.float64),
        next_obs=next_obs,
        not_done=(~failure).astype(np.float64),
    )


def iter_batches(labeled, batch_size, rng):
    """Endless stream of uniformly sampled minibatches."""
    while True:
        yield labeled.take(sample_batch(len(labeled), batch_size, rng))


# -- coverage -------------------------------------------------------------------


@dataclass
class CoverageResult:
    occupied: float
    histograms: dict  # dims tuple -> counts array with one axis per dim
    bins_per_dim: int

    @property
    def total_counts(self):
        return {dims: int(h.sum()) for dims, h in self.histograms.items()}


def bin_indices(values, bins, low, high):
    """Uniform bin index per value; out-of-range values land in the edge bins."""
    values = np.asarray(values, dtype=np.float64)
    span = high - low
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(span > 0, (values - low) / np.where(span > 0, span, 1.0) * bins, 0.0)
    return np.clip(np.floor(scaled), 0, bins - 1).astype(np.int64)


def coverage(data, bins_per_dim=20, bounds=None, max_joint_dims=3):
    """Occupied-bin count of observations under uniform gridding.

    Up to ``max_joint_dims`` dimensions are gridded jointly; beyond that the
    occupied count is the mean over all 2-D dimension pairs.
    ``bounds`` is a (low, high) pair of per-dimension arrays.
    """
    obs = data.obs if isinstance(data, Dataset) else np.asarray(data)
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim != 2:
        raise ConfigError("coverage expects a 2-D observation array")
    if bins_per_dim < 1:
        raise ConfigError("bins_per_dim must be at least 1")
    dim = obs.shape[1]
    if bounds is None:
        low, high = obs.min(axis=0), obs.max(axis=0)
    else:
        low = np.broadcast_to(np.asarray(bounds[0], dtype=np.float64), (dim,))
        high = np.broadcast_to(np.asarray(bounds[1], dtype=np.float64), (dim,))
    if not (np.all(np.isfinite(low)) and np.all(np.isfinite(high))) or np.any(high < low):
        raise ConfigError("coverage bounds must be finite with low <= high")
    idx = bin_indices(obs, bins_per_dim, low, high)

    if dim <= max_joint_dims:
        groups = [tuple(range(dim))]
    else:
        groups = list(itertools.combinations(range(dim), 2))
    histograms = {}
    for dims in groups:
        shape = (bins_per_dim,) * len(dims)
        flat = np.ravel_multi_index(tuple(idx[:, d] for d in dims), shape) if len(obs) else np.zeros(0, np.int64)
        histograms[dims] = np.bincount(flat, minlength=bins_per_dim ** len(dims)).reshape(shape)
    occupied = float(np.mean([np.count_nonzero(h) for h in histograms.values()]))
    return CoverageResult(occupied, histograms, bins_per_dim)
