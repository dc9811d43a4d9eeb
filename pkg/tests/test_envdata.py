import numpy as np
import pytest

from coadapt.envdata import (
    Action,
    CellKind,
    GridSpec,
    ObservationMap,
    OfflineDataset,
    StochasticPolicy,
    Transition,
    build_grid,
    collect_dataset,
    evaluate_policy,
    make_behavior_policy,
    mc_returns,
    observe,
    read_dataset,
    step,
    transition_table,
    value_iteration,
    write_dataset,
)
from coadapt.exceptions import DomainError


def test_sparse_preset_layout():
    g = build_grid("grid16-sparse")
    assert (g.width, g.height, g.start) == (16, 16, (8, 8))
    assert g.kind(g.state_id(0, 0)) == CellKind.GOAL


def test_obstacle_preset_is_deterministic():
    a = build_grid("grid16-obstacles", seed=0)
    b = build_grid("grid16-obstacles", seed=0)
    assert a.to_strings() == b.to_strings()
    assert any("#" in row for row in a.to_strings())


def test_two_state_chain():
    g = GridSpec.from_strings([".G"], (0, 0))
    assert g.n_states == 2
    assert step(g, 0, Action.RIGHT) == (1, 1.0, True)


def test_unreachable_goal_is_rejected():
    with pytest.raises(DomainError):
        GridSpec.from_strings([".#G"], (0, 0))


def test_moving_off_grid_stays_put():
    g = build_grid("grid16-sparse")
    s = g.state_id(0, 5)
    assert step(g, s, Action.LEFT) == (s, 0.0, False)


def test_walls_block_and_lava_terminates():
    g = GridSpec.from_strings([".#G", "...", "L.."], (0, 0))
    assert step(g, 0, Action.RIGHT) == (0, 0.0, False)
    below = g.state_id(0, 1)
    assert step(g, 0, Action.DOWN) == (below, 0.0, False)
    assert step(g, below, Action.DOWN) == (g.state_id(0, 2), 0.0, True)


def test_stay_never_terminates_off_goal():
    g = build_grid("grid16-sparse")
    assert step(g, g.start_state, Action.STAY)[2] is False


def test_step_rejects_terminal_and_bad_action():
    g = GridSpec.from_strings([".G"], (0, 0))
    with pytest.raises(DomainError):
        step(g, 1, Action.LEFT)
    with pytest.raises(DomainError):
        step(g, 0, 9)


def test_corridor_greedy_rollout():
    g = GridSpec.from_strings(["..G"], (0, 0), gamma=0.9)
    q = value_iteration(g)
    assert q[0].max() == pytest.approx(0.9)
    assert q[1, Action.RIGHT] == pytest.approx(1.0)
    assert evaluate_policy(g, ObservationMap("onehot"), lambda obs: q[: obs.shape[0]], max_len=2) == 1.0


def test_value_iteration_zero_discount_is_reward():
    g = GridSpec.from_strings(["..G"], (0, 0), gamma=0.0)
    q = value_iteration(g, gamma=0.0)
    _, rew, _, valid = transition_table(g)
    assert np.array_equal(q[valid], rew[valid])


def test_value_iteration_three_by_three():
    g = GridSpec.from_strings(["...", "...", "..G"], (0, 0), gamma=0.9)
    assert value_iteration(g)[0].max() == pytest.approx(0.729, abs=1e-9)


def test_value_iteration_bellman_residual():
    g = build_grid("grid16-obstacles", seed=0)
    q = value_iteration(g, tol=1e-10)
    nxt, rew, term, valid = transition_table(g)
    target = rew + g.gamma * np.where(term, 0.0, q.max(axis=1)[nxt])
    assert np.max(np.abs(q - target)[valid]) < 1e-10


def test_behavior_policy_rows():
    g = build_grid("grid16-sparse")
    q = value_iteration(g)
    pol = make_behavior_policy(q, 0.7)
    assert np.allclose(pol.probs.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(pol.probs >= 0)
    # Start cell: Up and Left both lead optimally toward the (0, 0) corner.
    assert np.allclose(pol.row(g.start_state), [0.35, 0.1, 0.35, 0.1, 0.1])
    # A cell on the top edge has a unique optimum (Left).
    assert np.allclose(pol.row(g.state_id(5, 0)), [0.075, 0.075, 0.7, 0.075, 0.075])


def test_behavior_policy_deterministic_at_one():
    q = value_iteration(build_grid("grid16-sparse"))
    probs = make_behavior_policy(q, 1.0).probs
    assert set(np.unique(probs)) <= {0.0, 0.5, 1.0, 0.2}


def test_policy_validation():
    with pytest.raises(DomainError):
        StochasticPolicy(np.array([[0.5, 0.6]]), "bad")


def test_observations():
    g = GridSpec.from_strings([".G", ".."], (0, 0))
    v = observe(ObservationMap("onehot"), g, g.state_id(1, 0))
    assert v.shape == (4,) and v.sum() == 1.0 and v[1] == 1.0
    big = build_grid("grid16-sparse")
    raw = ObservationMap("random_projection", dim=8, seed=2)
    smooth0 = ObservationMap("smoothed_random_projection", dim=8, seed=2, radius=0)
    smooth1 = ObservationMap("smoothed_random_projection", dim=8, seed=2, radius=1)
    s = big.state_id(4, 7)
    assert np.allclose(observe(raw, big, s), observe(smooth0, big, s))
    cross = [big.state_id(4, 7), big.state_id(3, 7), big.state_id(5, 7), big.state_id(4, 6), big.state_id(4, 8)]
    assert np.allclose(observe(smooth1, big, s), np.mean([observe(raw, big, c) for c in cross], axis=0))


def test_collect_single_transition(small_world):
    spec, obs, policy, _ = small_world
    ds = collect_dataset(spec, obs, policy, 1, seed=0)
    assert len(ds) == 1 and ds.transitions[0].state == spec.start_state


def test_collection_is_deterministic(small_world):
    spec, obs, policy, data = small_world
    again = collect_dataset(spec, obs, policy, len(data), seed=5)
    assert again == data


def test_action_frequencies_follow_policy(small_world):
    spec, obs, policy, _ = small_world
    ds = collect_dataset(spec, obs, policy, 10_000, max_episode_len=1, seed=11)
    counts = np.bincount(ds.arrays["action"], minlength=5) / len(ds)
    assert 0.5 * np.abs(counts - policy.row(spec.start_state)).sum() < 0.02


def test_next_action_continues_the_rollout(small_world):
    _, _, _, data = small_world
    for start, stop in data.episodes():
        for i in range(start, stop - 1):
            assert data.transitions[i].next_action == data.transitions[i + 1].action
            assert data.transitions[i].next_state == data.transitions[i + 1].state


def test_mc_returns_examples():
    z = np.zeros(2)
    trans = tuple(Transition(i, z, 0, r, i + 1, z, 0, i == 2) for i, r in enumerate([0.0, 0.0, 1.0]))
    ds = OfflineDataset(trans, (0,), {"gamma": 0.9})
    assert np.allclose(mc_returns(ds), [0.81, 0.9, 1.0])
    single = OfflineDataset(trans[2:], (0,), {"gamma": 0.9})
    assert mc_returns(single)[0] == 1.0


def test_mc_returns_recursive_vs_direct(rng):
    z = np.zeros(1)
    rewards = rng.normal(size=12)
    trans = tuple(Transition(i, z, 0, float(r), i, z, 0, False) for i, r in enumerate(rewards))
    ds = OfflineDataset(trans, (0, 5), {"gamma": 0.8})
    got = mc_returns(ds)
    for start, stop in ((0, 5), (5, 12)):
        for t in range(start, stop):
            direct = sum(0.8 ** (k - t) * rewards[k] for k in range(t, stop))
            assert abs(got[t] - direct) < 1e-12


def test_mc_returns_of_optimal_data():
    g = build_grid("grid16-sparse")
    pol = make_behavior_policy(value_iteration(g), 1.0)
    ds = collect_dataset(g, ObservationMap(dim=4), pol, 60, seed=1)
    g_t = mc_returns(ds)
    for start, stop in ds.episodes():
        if not ds.transitions[stop - 1].terminal:
            continue
        for i in range(start, stop):
            assert g_t[i] == pytest.approx(g.gamma ** (stop - 1 - i))


def test_evaluate_policy_optimal_and_stay():
    g = build_grid("grid16-sparse")
    q = value_iteration(g)
    obs = ObservationMap(dim=4)
    assert evaluate_policy(g, obs, lambda o: q, episodes=3) == 1.0
    stay = np.zeros_like(q)
    stay[:, Action.STAY] = 1.0
    assert evaluate_policy(g, obs, lambda o: stay, max_len=50) == 0.0
    assert evaluate_policy(g, obs, lambda o: q, seed=1) == evaluate_policy(g, obs, lambda o: q, seed=2)


def test_dataset_round_trip(tmp_path, small_world):
    _, _, _, data = small_world
    path = tmp_path / "d.txt"
    write_dataset(data, path)
    back = read_dataset(path)
    assert back == data
    assert back.metadata["n_transitions"] == len(data)
    for a, b in zip(back.transitions, data.transitions):
        assert np.array_equal(a.obs, b.obs) and np.array_equal(a.next_obs, b.next_obs)


def test_read_dataset_names_bad_line(tmp_path, small_world):
    _, _, _, data = small_world
    path = tmp_path / "d.txt"
    write_dataset(data, path)
    lines = path.read_text().splitlines()
    lines[4] = "1\t2\tthree"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="line 5"):
        read_dataset(path)
