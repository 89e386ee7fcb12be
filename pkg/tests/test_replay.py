import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2

from blindmaze import replay
from oracles import blind_fraction_formula


def make_traj(length, episode_id=0, reached=True):
    return replay.Trajectory(
        states=np.arange(length + 1, dtype=np.int64),
        actions=np.zeros(length, dtype=np.int64),
        rewards=np.full(length, -0.01),
        visible=np.ones(length, dtype=bool),
        reached_goal=reached,
        episode_id=episode_id,
    )


def test_blindness_never_with_p_zero():
    rng = np.random.default_rng(0)
    assert not any(replay.maybe_start_blindness(0.0, 5, rng) for _ in range(10_000))


def test_blindness_trigger_probability():
    rng = np.random.default_rng(1)
    draws = 100_000
    hits = sum(replay.maybe_start_blindness(0.5, 5, rng) for _ in range(draws))
    assert hits / draws == pytest.approx(0.1, abs=0.005)


def test_blindness_rejects_trigger_above_one():
    rng = np.random.default_rng(2)
    with pytest.raises(ValueError):
        replay.maybe_start_blindness(1.5, 1, rng)


@pytest.mark.parametrize("p,n", [(0.5, 5), (0.5, 1), (0.9, 3), (0.2, 10)])
def test_long_run_blind_fraction_matches_renewal_formula(p, n):
    # Simulate the exact collection-time process for 10^6 steps.
    rng = np.random.default_rng(42)
    steps = 1_000_000
    blind_left = 0
    blind_steps = 0
    for _ in range(steps):
        if blind_left == 0 and replay.maybe_start_blindness(p, n, rng):
            blind_left = n
        if blind_left > 0:
            blind_left -= 1
            blind_steps += 1
    measured = blind_steps / steps
    expected = blind_fraction_formula(p, n)
    assert measured == pytest.approx(expected, abs=0.01)
    assert replay.expected_blind_fraction(p, n) == pytest.approx(expected, rel=1e-12)


def test_window_respects_short_episode():
    buf = replay.ReplayBuffer(capacity=100)
    buf.add_episode(make_traj(3, reached=True))
    rng = np.random.default_rng(3)
    for w in buf.sample_windows(200, 5, rng):
        assert 1 <= len(w) <= 3
        assert len(w.states) == len(w) + 1
        # reaching the stored episode tail marks the window terminal
        if w.states[-1] == 3:
            assert w.terminal
        else:
            assert not w.terminal


def test_window_single_step_mode():
    buf = replay.ReplayBuffer(capacity=100)
    buf.add_episode(make_traj(10))
    rng = np.random.default_rng(4)
    for w in buf.sample_windows(50, 1, rng):
        assert len(w) == 1
        assert len(w.states) == 2


def test_windows_never_cross_done():
    buf = replay.ReplayBuffer(capacity=1000)
    for i in range(5):
        buf.add_episode(make_traj(7, episode_id=i))
    rng = np.random.default_rng(5)
    for w in buf.sample_windows(500, 4, rng):
        # states are 0..7 within one episode; crossing a boundary would wrap
        assert all(b - a == 1 for a, b in zip(w.states, w.states[1:]))


def test_window_start_uniformity_chi_squared():
    buf = replay.ReplayBuffer(capacity=1000)
    buf.add_episode(make_traj(100, reached=False))
    rng = np.random.default_rng(6)
    counts = np.zeros(100)
    samples = 100_000
    for w in buf.sample_windows(samples, 10, rng):
        counts[w.states[0]] += 1
    expected = samples / 100
    stat = float(((counts - expected) ** 2 / expected).sum())
    assert stat < chi2.ppf(0.99, df=99)


def test_empty_buffer_not_ready():
    buf = replay.ReplayBuffer(capacity=10)
    with pytest.raises(replay.ReplayNotReady):
        buf.sample_windows(1, 1, np.random.default_rng(0))


def test_eviction_is_episode_atomic():
    buf = replay.ReplayBuffer(capacity=25)
    for i in range(10):
        buf.add_episode(make_traj(10, episode_id=i))
    assert buf.total_steps == sum(len(ep) for ep in buf.episodes)
    assert buf.total_steps <= 25
    ids = [ep.episode_id for ep in buf.episodes]
    assert ids == sorted(ids)
    assert ids[0] == 10 - len(ids)  # oldest episodes were dropped first


@given(st.integers(min_value=1, max_value=12), st.integers(min_value=1, max_value=200))
@settings(max_examples=30, deadline=None)
def test_injected_stretches_have_length_n_or_truncated(n, episode_len):
    # Replicate the collector's bookkeeping: every injected stretch lasts
    # exactly n steps unless the episode ends first. Back-to-back stretches
    # may chain (a new trigger is legal right after one ends).
    rng = np.random.default_rng(episode_len * 31 + n)
    blind_left = 0
    stretches = []
    for t in range(episode_len):
        if blind_left == 0 and t > 0 and replay.maybe_start_blindness(0.9, n, rng):
            blind_left = n
            stretches.append(0)
        if blind_left > 0:
            blind_left -= 1
            stretches[-1] += 1
    if stretches:
        assert all(s == n for s in stretches[:-1])
        assert stretches[-1] <= n  # the last one may be cut off by episode end


def test_trajectory_requires_boundary_state():
    with pytest.raises(ValueError):
        replay.Trajectory(states=np.arange(3), actions=np.zeros(3, dtype=int),
                          rewards=np.zeros(3), visible=np.ones(3, dtype=bool),
                          reached_goal=False)


def test_dump_jsonl(tmp_path):
    import json

    buf = replay.ReplayBuffer(capacity=100)
    buf.add_episode(make_traj(2, episode_id=7))
    path = tmp_path / "buffer.jsonl"
    buf.dump_jsonl(path)
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert rows[0]["episode_id"] == 7
    assert rows[0]["states"] == [0, 1, 2]
    assert rows[0]["reached_goal"] is True
