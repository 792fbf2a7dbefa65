import numpy as np
import pytest
from hypothesis import given, strategies as st

from unload_rl.errors import InputError, ProtocolError
from unload_rl.replay import ReplayBuffer, Transition


def tr(i, shape=(1, 2, 2)):
    return Transition(np.full(shape, i, np.float32), i, float(i), np.full(shape, i + 1, np.float32), i % 5 == 4)


def test_empty_sample_raises():
    with pytest.raises(ProtocolError):
        ReplayBuffer(4).sample(1, np.random.default_rng(0))


def test_capacity_validation():
    with pytest.raises(InputError):
        ReplayBuffer(0)


def test_shape_check():
    buf = ReplayBuffer(4)
    buf.push(tr(0))
    with pytest.raises(InputError):
        buf.push(tr(1, shape=(1, 3, 3)))


@given(capacity=st.integers(1, 20), n=st.integers(0, 60))
def test_fifo_eviction(capacity, n):
    buf = ReplayBuffer(capacity)
    for i in range(n):
        buf.push(tr(i))
    assert len(buf) == min(n, capacity)
    assert [t.action for t in buf.records()] == list(range(max(0, n - capacity), n))


def test_sampling_is_uniform_with_replacement():
    buf = ReplayBuffer(10)
    for i in range(10):
        buf.push(tr(i))
    rng = np.random.default_rng(0)
    counts = np.bincount(buf.sample_indices(100000, rng), minlength=10)
    np.testing.assert_allclose(counts / 100000, 0.1, atol=0.005)
    # more samples than records is allowed
    assert len(buf.sample(50, rng)) == 50


def test_sample_batch_layout():
    buf = ReplayBuffer(8)
    for i in range(8):
        buf.push(tr(i))
    batch = buf.sample_batch(5, np.random.default_rng(2))
    assert batch.observations.shape == (5, 1, 2, 2)
    assert batch.actions.dtype == np.int64
    for k in range(5):
        i = batch.actions[k]
        assert batch.rewards[k] == float(i)
        assert (batch.next_observations[k] == i + 1).all()
        assert batch.terminals[k] == (i % 5 == 4)


def test_same_seed_same_batches():
    buf = ReplayBuffer(50)
    for i in range(50):
        buf.push(tr(i))
    a = buf.sample_indices(20, np.random.default_rng(9))
    b = buf.sample_indices(20, np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_ring_examples():
    buf = ReplayBuffer(2)
    buf.push(tr(0))
    assert len(buf) == 1
    buf.push(tr(1))
    buf.push(tr(2))
    assert [t.action for t in buf.records()] == [1, 2]
    stored = buf.records()[1]
    original = tr(2)
    assert stored.action == original.action and stored.reward == original.reward
    assert stored.terminal == original.terminal
    assert np.array_equal(stored.observation, original.observation)
    assert np.array_equal(stored.next_observation, original.next_observation)


def test_single_record_sampled_with_replacement():
    buf = ReplayBuffer(5)
    buf.push(tr(3))
    assert [t.action for t in buf.sample(4, np.random.default_rng(0))] == [3, 3, 3, 3]


def test_uniform_within_three_sigma():
    buf = ReplayBuffer(10)
    for i in range(10):
        buf.push(tr(i))
    draws = 10_000
    counts = np.bincount(buf.sample_indices(draws, np.random.default_rng(11)), minlength=10)
    sigma = np.sqrt(draws * 0.1 * 0.9)
    assert np.all(np.abs(counts - draws * 0.1) <= 3 * sigma)
