import numpy as np
import pytest
from scipy.stats import chi2

from blindmaze import agent, gridworld as gw, nets
from oracles import ref_greedy_blind_actions, ref_q_rollout, ref_reward, ref_value, ref_encode, ref_lstm, action_one_hot

OPEN_ROOM = """\
#####
#S..#
#...#
#..G#
#####
"""


def make_params(obs_dim=25, hidden=6, seed=0):
    return nets.ModelParams(obs_dim, 4, hidden, np.random.default_rng(seed), trainable=False)


def obs_vec(idx, dim=25):
    return nets.one_hot([idx], dim)[0]


def test_q_rollout_single_step_identity():
    params = make_params(seed=1)
    w = params.to_arrays()
    s = obs_vec(7)
    gamma = 0.9
    q = agent.q_rollout(params, s, [2], gamma)
    h, c = ref_encode(w, s)
    h, c = ref_lstm(w, h, c, action_one_hot(2))
    assert q == pytest.approx(ref_reward(w, h) + gamma * ref_value(w, h), abs=1e-12)


def test_q_rollout_gamma_zero_collapses_to_first_reward():
    params = make_params(seed=2)
    w = params.to_arrays()
    s = obs_vec(3)
    q = agent.q_rollout(params, s, [1], 0.0)
    h, c = ref_encode(w, s)
    h, c = ref_lstm(w, h, c, action_one_hot(1))
    assert q == pytest.approx(ref_reward(w, h), abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_q_rollout_matches_reference_three_steps(seed):
    params = make_params(seed=300 + seed)
    w = params.to_arrays()
    s = obs_vec(11)
    actions = [0, 3, 1]
    assert agent.q_rollout(params, s, actions, 0.97) == pytest.approx(
        ref_q_rollout(w, s, actions, 0.97), abs=1e-10)


def test_q_rollout_requires_actions():
    params = make_params()
    with pytest.raises(ValueError):
        agent.q_rollout(params, obs_vec(0), [], 0.99)


def test_epsilon_one_is_uniform():
    params = make_params(seed=4)
    rng = np.random.default_rng(123)
    cs = agent.initial_controller_state()
    counts = np.zeros(4)
    draws = 10_000
    for _ in range(draws):
        action, _ = agent.select_action(cs, obs_vec(6), params, 0.99, 1.0, rng)
        counts[action] += 1
    expected = draws / 4
    stat = float(((counts - expected) ** 2 / expected).sum())
    assert stat < chi2.ppf(0.99, df=3)


def test_epsilon_zero_deterministic():
    params = make_params(seed=5)
    rng = np.random.default_rng(0)
    cs = agent.initial_controller_state()
    first, _ = agent.select_action(cs, obs_vec(6), params, 0.99, 0.0, rng)
    for _ in range(20):
        action, _ = agent.select_action(cs, obs_vec(6), params, 0.99, 0.0, rng)
        assert action == first


def test_blind_sequence_matches_reference_rollout():
    # With epsilon 0, the entire blind action sequence is fixed by the entry
    # observation; it must equal the straight-line greedy rollout.
    params = make_params(seed=6)
    w = params.to_arrays()
    s = obs_vec(8)
    k = 7
    expected = ref_greedy_blind_actions(w, s, k, 0.99)
    rng = np.random.default_rng(0)
    cs = agent.initial_controller_state()
    taken = []
    obs = s
    for _ in range(k):
        action, cs = agent.select_action(cs, obs, params, 0.99, 0.0, rng)
        taken.append(action)
        obs = None  # blind from the second step on
    assert taken == expected


def test_mode_switching_and_blind_counter():
    params = make_params(seed=7)
    rng = np.random.default_rng(1)
    cs = agent.initial_controller_state()
    assert cs.mode is agent.Mode.CLOSED and cs.steps_blind == 0
    _, cs = agent.select_action(cs, obs_vec(6), params, 0.99, 0.0, rng)
    assert cs.mode is agent.Mode.CLOSED and cs.steps_blind == 0
    for expected in (1, 2, 3):
        _, cs = agent.select_action(cs, None, params, 0.99, 0.0, rng)
        assert cs.mode is agent.Mode.OPEN and cs.steps_blind == expected
    # a visible observation resets to closed loop
    _, cs = agent.select_action(cs, obs_vec(9), params, 0.99, 0.0, rng)
    assert cs.mode is agent.Mode.CLOSED and cs.steps_blind == 0


def test_blind_before_any_latent_is_fatal():
    params = make_params()
    with pytest.raises(RuntimeError):
        agent.select_action(agent.initial_controller_state(), None, params, 0.99, 0.0,
                            np.random.default_rng(0))


def test_uniform_bias_shift_keeps_argmax():
    # Adding one constant to both head biases shifts every one-step Q equally.
    params = make_params(seed=8)
    rng = np.random.default_rng(2)
    cs = agent.initial_controller_state()
    base_action, _ = agent.select_action(cs, obs_vec(4), params, 0.99, 0.0, rng)
    hs = nets.encode(params, obs_vec(4).reshape(1, -1))
    q_before, _ = agent.one_step_lookahead(params, hs, 0.99)
    params["rew_b"].data += 3.25
    params["val_b"].data += -1.5
    shifted_action, _ = agent.select_action(cs, obs_vec(4), params, 0.99, 0.0, rng)
    q_after, _ = agent.one_step_lookahead(params, hs, 0.99)
    assert shifted_action == base_action
    np.testing.assert_allclose(q_after - q_before, (3.25 - 1.5 * 0.99), atol=1e-9)


def test_ties_break_to_lowest_action_id():
    params = make_params(seed=9)
    for name, t in params.named():
        t.data[...] = 0.0  # all Q values identical
    rng = np.random.default_rng(3)
    action, _ = agent.select_action(agent.initial_controller_state(), obs_vec(0),
                                    params, 0.99, 0.0, rng)
    assert action == 0


def test_run_episode_on_open_room():
    maze = gw.load_maze(OPEN_ROOM, name="room")
    params = nets.ModelParams(maze.obs_dim, 4, 6, np.random.default_rng(10), trainable=False)
    record = []
    length, total, reached, blind = agent.run_episode(
        maze, [], params, 0.99, 0.3, np.random.default_rng(11), max_steps=30, record=record)
    assert length == len(record) <= 30
    assert blind == 0
    assert all(not row["blind"] for row in record)
    assert sum(row["reward"] for row in record) == pytest.approx(total)


def test_unreached_goal_encodes_as_step_cap():
    maze = gw.load_maze(OPEN_ROOM, name="room")
    params = nets.ModelParams(maze.obs_dim, 4, 4, trainable=False)
    for _, t in params.named():
        t.data[...] = 0.0  # greedy always picks action 0 (up): bumps forever
    length, _, reached, _ = agent.run_episode(maze, [], params, 0.99, 0.0,
                                              np.random.default_rng(0), max_steps=12)
    assert length == 12 and not reached


def test_run_episode_rejects_masked_start():
    maze = gw.load_maze(OPEN_ROOM, name="room")
    params = nets.ModelParams(maze.obs_dim, 4, 4, trainable=False)
    bad = gw.Mask(name="bad", cells=frozenset({maze.start}))
    with pytest.raises(ValueError):
        agent.run_episode(maze, [bad], params, 0.99, 0.0, np.random.default_rng(0))


def test_open_loop_determinism_across_runs():
    maze = gw.load_maze(OPEN_ROOM, name="room")
    params = nets.ModelParams(maze.obs_dim, 4, 8, np.random.default_rng(12), trainable=False)
    mask = gw.Mask(name="m", cells=frozenset({(1, 2), (2, 2), (2, 3)}))

    def run():
        record = []
        agent.run_episode(maze, [mask], params, 0.99, 0.0,
                          np.random.default_rng(5), max_steps=25, record=record)
        return [(r["cell"][0], r["cell"][1], r["action"], r["blind"]) for r in record]

    assert run() == run()


def test_write_records(tmp_path):
    import json

    path = tmp_path / "episodes.jsonl"
    agent.write_records(path, [[{"t": 0, "cell": [0, 0], "blind": False, "action": 3, "reward": -0.01}],
                               [{"t": 0, "cell": [0, 0], "blind": True, "action": 1, "reward": -0.02}]])
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert rows[0]["episode"] == 0 and rows[1]["episode"] == 1
    assert rows[1]["blind"] is True
