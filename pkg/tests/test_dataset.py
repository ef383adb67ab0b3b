import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from batchrl.dataset import (
    DONE,
    TIMEOUT,
    Dataset,
    DatasetBuilder,
    coverage,
    dataset_from_bytes,
    dataset_read,
    dataset_write,
    file_hash,
    relabel,
    sample_batch,
)
from batchrl.envs import make_reward, parse_reward
from batchrl.errors import ConfigError, CorruptionError, FormatError, UsageError
from oracles import loop_coverage


def _random_dataset(rng, n=30, obs_dim=3, act_dim=2, env="pointmass"):
    flags = rng.choice([0, DONE, DONE | TIMEOUT], size=n, p=[0.8, 0.1, 0.1]).astype(np.uint8)
    return Dataset(
        rng.normal(size=(n, obs_dim)), rng.normal(size=(n, act_dim)), rng.normal(size=(n, obs_dim)),
        flags, {"env": env, "method": "random", "seed": 0},
    )


def test_one_transition_file_is_41_bytes(tmp_path):
    b = DatasetBuilder(2, 1)
    b.append([1.0, 2.0], [0.5], [3.0, 4.0], False)
    path = tmp_path / "one.brl"
    dataset_write(b.build({"env": "x"}), path)
    assert path.stat().st_size == 20 + (2 + 1 + 2) * 4 + 1 == 41


def test_header_layout(tmp_path, rng):
    data = _random_dataset(rng, n=7)
    blob = data.to_bytes()
    assert struct.unpack_from("<4sHHHHQ", blob, 0) == (b"BRL1", 1, 3, 2, 0, 7)
    first = np.frombuffer(blob, "<f4", count=3, offset=20)
    np.testing.assert_array_equal(first, data.obs[0])
    assert blob[20 + 8 * 4] == data.flags[0]


def test_round_trip_and_sidecar(tmp_path, rng):
    data = _random_dataset(rng)
    path = tmp_path / "d.brl"
    dataset_write(data, path)
    back = dataset_read(path)
    for field in ("obs", "actions", "next_obs", "flags"):
        np.testing.assert_array_equal(getattr(back, field), getattr(data, field))
    for i in (0, 5, len(data) - 1):
        a, b = data[i], back[i]
        assert (a.done, a.timeout) == (b.done, b.timeout)
    sidecar = json.loads((tmp_path / "d.brl.json").read_text())
    assert {"env", "method", "seed", "steps", "config_hash", "created_utc"} <= set(sidecar)
    assert sidecar["env"] == "pointmass"


def test_same_dataset_written_twice_is_identical(tmp_path, rng):
    data = _random_dataset(rng)
    dataset_write(data, tmp_path / "a.brl")
    dataset_write(data, tmp_path / "b.brl")
    assert (tmp_path / "a.brl").read_bytes() == (tmp_path / "b.brl").read_bytes()


@settings(max_examples=30, deadline=None)
@given(
    st.integers(1, 5), st.integers(1, 3), st.integers(1, 20),
    st.randoms(use_true_random=False),
)
def test_round_trip_property(obs_dim, act_dim, n, rnd):
    rng = np.random.default_rng(rnd.randint(0, 2**31))
    data = _random_dataset(rng, n, obs_dim, act_dim)
    back = dataset_from_bytes(data.to_bytes())
    assert back.to_bytes() == data.to_bytes()


def test_read_errors(tmp_path, rng):
    blob = _random_dataset(rng, n=4).to_bytes()
    with pytest.raises(FormatError):
        dataset_from_bytes(b"NOPE" + blob[4:])
    with pytest.raises(FormatError):
        dataset_from_bytes(blob[:4] + struct.pack("<H", 2) + blob[6:])
    with pytest.raises(CorruptionError):
        dataset_from_bytes(blob[:-5])  # truncated mid-transition
    with pytest.raises(CorruptionError):
        dataset_from_bytes(blob[:12])
    with pytest.raises(CorruptionError):
        dataset_from_bytes(blob + b"\x00")
    bad_flags = bytearray(blob)
    bad_flags[20 + 8 * 4] = 0x80
    with pytest.raises(CorruptionError):
        dataset_from_bytes(bytes(bad_flags))


def test_empty_dataset_refused(tmp_path):
    with pytest.raises(UsageError):
        dataset_write(DatasetBuilder(2, 1).build(), tmp_path / "e.brl")


def test_inconsistent_shapes():
    with pytest.raises(CorruptionError):
        Dataset(np.zeros((3, 2)), np.zeros((2, 1)), np.zeros((3, 2)), np.zeros(3))


def test_dataset_is_immutable(rng):
    data = _random_dataset(rng)
    with pytest.raises(ValueError):
        data.obs[0, 0] = 1.0


def test_builder_grows_and_sets_timeout_as_done():
    b = DatasetBuilder(1, 1, capacity=2)
    for i in range(5):
        b.append([i], [0.0], [i + 1], done=False, timeout=(i == 4))
    data = b.build()
    assert len(data) == 5
    assert data.done.tolist() == [False] * 4 + [True]
    assert data.timeout.tolist() == [False] * 4 + [True]
    assert data.episode_bounds() == [(0, 5)]


def test_episode_bounds(rng):
    flags = np.array([0, DONE, 0, 0, DONE | TIMEOUT, 0], np.uint8)
    data = Dataset(np.zeros((6, 1)), np.zeros((6, 1)), np.zeros((6, 1)), flags)
    assert data.episode_bounds() == [(0, 2), (2, 5), (5, 6)]


# -- sampling -----------------------------------------------------------------------


def test_sample_examples():
    assert np.all(sample_batch(1, 50, np.random.default_rng(0)) == 0)
    a = sample_batch(100, 10, np.random.default_rng(5))
    b = sample_batch(100, 10, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)
    with pytest.raises(UsageError):
        sample_batch(0, 1, np.random.default_rng(0))
    with pytest.raises(UsageError):
        sample_batch(10, 0, np.random.default_rng(0))


def test_sample_uniformity():
    n, draws = 10_000, 1_000_000
    counts = np.bincount(sample_batch(n, draws, np.random.default_rng(11)), minlength=n)
    p = 1.0 / n
    mean, sigma = draws * p, np.sqrt(draws * p * (1 - p))
    assert np.all(np.abs(counts - mean) <= 5 * sigma)


# -- relabeling ------------------------------------------------------------------------


def test_relabel_examples(rng):
    obs = np.zeros((2, 4))
    nxt = np.array([[3.0, 4.0, 0, 0], [0, 0, 0, 0]])
    flags = np.array([DONE, DONE | TIMEOUT], np.uint8)
    data = Dataset(obs, np.zeros((2, 2)), nxt, flags, {"env": "pointmass"})
    batch = relabel(data, parse_reward("point-goal:0,0"))
    np.testing.assert_array_equal(batch.reward, [-5.0, 0.0])
    # failures stop bootstrapping, timeouts do not
    np.testing.assert_array_equal(batch.not_done, [0.0, 1.0])

    zero = relabel(data, make_reward("zero"))
    assert np.all(zero.reward == 0.0)
    np.testing.assert_array_equal(zero.obs, batch.obs)
    np.testing.assert_array_equal(zero.action, batch.action)
    np.testing.assert_array_equal(zero.next_obs, batch.next_obs)


def test_relabel_env_mismatch(rng):
    data = _random_dataset(rng, obs_dim=4, env="pointmass")
    with pytest.raises(ConfigError):
        relabel(data, parse_reward("upright"))


def test_relabel_does_not_touch_file(tmp_path, rng):
    data = _random_dataset(rng, obs_dim=4)
    path = tmp_path / "d.brl"
    dataset_write(data, path)
    before = file_hash(path)
    loaded = dataset_read(path)
    relabel(loaded, parse_reward("point-goal:1,1"))
    relabel(loaded, parse_reward("velocity"))
    assert file_hash(path) == before
    assert loaded.content_hash() == data.content_hash()


# -- coverage ---------------------------------------------------------------------------


def test_coverage_examples():
    same = np.tile([[0.3, 0.3]], (10, 1))
    assert coverage(same, 5, ([0, 0], [1, 1])).occupied == 1
    quads = np.array([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])
    assert coverage(quads, 2, ([0, 0], [1, 1])).occupied == 4


def test_coverage_matches_loop_oracle(rng):
    pts = rng.normal(size=(1000, 3))
    low, high = np.full(3, -1.5), np.full(3, 1.5)  # some points fall outside and clamp
    result = coverage(pts, 7, (low, high))
    assert result.occupied == len(loop_coverage(pts, 7, low, high))


def test_pairwise_coverage_matches_loop_oracle(rng):
    pts = rng.uniform(-1, 1, size=(500, 5))
    low, high = np.full(5, -1.0), np.full(5, 1.0)
    result = coverage(pts, 6, (low, high))
    expected = []
    for i in range(5):
        for j in range(i + 1, 5):
            expected.append(len(loop_coverage(pts[:, [i, j]], 6, low[[i, j]], high[[i, j]])))
    assert result.occupied == pytest.approx(np.mean(expected), abs=0)
    assert len(result.histograms) == 10


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 40), st.integers(1, 5)), elements=st.floats(-5, 5)), st.integers(1, 10))
def test_histogram_counts_sum_to_n(points, bins):
    result = coverage(points, bins, (np.full(points.shape[1], -2.0), np.full(points.shape[1], 2.0)))
    assert all(total == points.shape[0] for total in result.total_counts.values())


def test_coverage_config_errors():
    with pytest.raises(ConfigError):
        coverage(np.zeros((3, 2)), 0)
    with pytest.raises(ConfigError):
        coverage(np.zeros((3, 2)), 4, ([0, np.inf], [1, 1]))
