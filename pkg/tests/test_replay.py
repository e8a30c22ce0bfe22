import numpy as np
import pytest

from iabsim.env import Transition
from iabsim.replay import ReplayBuffer


def tr(i):
    return Transition(np.array([float(i)]), i, float(i), np.array([float(i)]))


def test_ring_eviction():
    buf = ReplayBuffer(capacity=2)
    for i in range(3):
        buf.push(tr(i))
    assert len(buf) == 2
    held = {t.a for t in buf.sample(100, np.random.default_rng(0))}
    assert held == {1, 2}


def test_push_then_sample_single():
    buf = ReplayBuffer(capacity=4)
    buf.push(tr(7))
    out = buf.sample(3, np.random.default_rng(0))
    assert all(t.a == 7 for t in out)


def test_size_never_exceeds_capacity():
    buf = ReplayBuffer(capacity=50)
    for i in range(100_000):
        buf.push(tr(i % 13))
        if i % 10_000 == 0:
            assert len(buf) <= 50
    assert len(buf) == 50


def test_sample_empty_raises():
    with pytest.raises(ValueError):
        ReplayBuffer(4).sample(1, np.random.default_rng(0))


def test_sample_uniformity():
    buf = ReplayBuffer(capacity=4)
    for i in range(4):
        buf.push(tr(i))
    rng = np.random.default_rng(1)
    draws = buf.sample(100_000, rng)
    counts = np.bincount([t.a for t in draws], minlength=4)
    freqs = counts / counts.sum()
    assert np.all(np.abs(freqs - 0.25) < 0.01)


def test_sample_chi_square_uniform():
    # 16 items, 1e5 draws; chi-square must not reject uniformity at 0.001
    buf = ReplayBuffer(capacity=16)
    for i in range(16):
        buf.push(tr(i))
    draws = buf.sample(100_000, np.random.default_rng(2))
    counts = np.bincount([t.a for t in draws], minlength=16)
    expected = 100_000 / 16
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < 37.697  # chi2 critical value, df=15, alpha=0.001


def test_sample_deterministic():
    buf = ReplayBuffer(capacity=8)
    for i in range(8):
        buf.push(tr(i))
    a = [t.a for t in buf.sample(20, np.random.default_rng(3))]
    b = [t.a for t in buf.sample(20, np.random.default_rng(3))]
    assert a == b


def test_fifo_order_exact():
    buf = ReplayBuffer(capacity=3)
    for i in range(7):  # wraps twice; survivors are the 3 newest
        buf.push(tr(i))
    held = sorted({t.a for t in buf.sample(200, np.random.default_rng(0))})
    assert held == [4, 5, 6]
