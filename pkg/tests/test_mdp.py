import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from npg_lab.errors import SolveFailure
from npg_lab.mdp import (
    TabularMdp,
    adversarial_tree_init,
    deterministic_structure,
    discounted_visitation,
    evaluate_policy,
    greedy_actions,
    optimal_actions,
    optimal_policy,
    random_mdp,
    stochastic_npg_step,
    tree_layers,
    tree_mdp,
    value_iteration,
)
from npg_lab.policy import PolicyParams, policy_table, softmax
from npg_lab.rng import make_rng
from npg_lab.updates import sparse_update


def _random_table(rng, S, A):
    return np.vstack([softmax(rng.normal(0, 1.5, A)) for _ in range(S)])


def test_tree_shape():
    mdp = tree_mdp()
    assert (mdp.S, mdp.A) == (85, 4)
    assert mdp.mu[0] == pytest.approx(0.2)
    assert mdp.mu[1:] == pytest.approx(0.8 / 84)
    assert mdp.rho[0] == 1.0
    assert np.argmax(mdp.trans[0, 2]) == 3
    assert np.argmax(mdp.trans[5, 1]) == 4 * 5 + 2
    leaf = 84
    assert np.all(np.argmax(mdp.trans[leaf], axis=1) == leaf)
    layers = tree_layers(4, 4)
    assert [len(x) for x in layers] == [1, 4, 16, 64]


def test_tree_depth_one_is_a_bandit():
    mdp = tree_mdp(depth=1)
    assert mdp.S == 1
    assert mdp.mu.tolist() == [1.0]


def test_tree_values_hand_computed():
    mdp = tree_mdp()
    pi_star, star = optimal_policy(mdp)
    assert np.all(np.argmax(pi_star, axis=1) == 0)
    assert np.allclose(star.v, 10.0)
    # 0.07 * 1 + 0.31 * (0.9 + 0.8 + 0.2) per step, discounted by 1 / (1 - 0.9)
    adv = evaluate_policy(mdp, adversarial_tree_init(mdp, 0.07))
    assert adv.value(mdp.rho) == pytest.approx(6.59, abs=1e-12)


def test_adversarial_init_probabilities():
    mdp = tree_mdp()
    table = policy_table(adversarial_tree_init(mdp, 0.07))
    assert np.allclose(table[:, 0], 0.07)
    assert np.allclose(table[:, 1:], 0.31)
    with pytest.raises(ValueError):
        adversarial_tree_init(mdp, 0.3)


def test_validation():
    trans = np.ones((2, 1, 2)) / 2
    with pytest.raises(ValueError):
        TabularMdp(trans, [[0.5], [0.5]], 0.9, [1.0, 0.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        TabularMdp(trans, [[0.5], [0.5]], 1.0, [0.5, 0.5], [1.0, 0.0])
    with pytest.raises(ValueError):
        TabularMdp(trans * 1.1, [[0.5], [0.5]], 0.5, [0.5, 0.5], [1.0, 0.0])
    with pytest.raises(ValueError):
        TabularMdp(trans, [[1.5], [0.5]], 0.5, [0.5, 0.5], [1.0, 0.0])


def test_json_round_trip(rng):
    mdp = random_mdp(3, 2, rng)
    back = TabularMdp.from_json(mdp.to_json())
    assert np.array_equal(back.trans, mdp.trans) and back.gamma == mdp.gamma


def test_ill_conditioned_solve_fails():
    trans = np.zeros((2, 1, 2))
    trans[:, 0, 1] = 1.0
    mdp = TabularMdp(trans, [[0.0], [1.0]], 1.0 - 1e-14, [0.5, 0.5], [1.0, 0.0])
    with pytest.raises(SolveFailure):
        evaluate_policy(mdp, np.ones((2, 1)))


@given(st.integers(1, 5), st.integers(2, 4), st.integers(0, 10**6))
def test_bellman_consistency(S, A, seed):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(S, A, rng)
    pi = _random_table(rng, S, A)
    vals = evaluate_policy(mdp, pi)
    assert np.allclose(vals.v, np.sum(pi * vals.q, axis=1), atol=1e-10)
    assert np.allclose(np.sum(pi * vals.adv, axis=1), 0.0, atol=1e-10)
    assert vals.d_mu.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(vals.d_mu >= -1e-15)
    # (1 - gamma) mu(s) <= d_mu(s)
    assert np.all(vals.d_mu >= (1 - mdp.gamma) * mdp.mu - 1e-12)


@given(st.integers(1, 4), st.integers(2, 3), st.integers(0, 10**6))
def test_optimal_policy_beats_every_deterministic_policy(S, A, seed):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(S, A, rng)
    _, star = optimal_policy(mdp)
    assert np.allclose(star.v, value_iteration(mdp), atol=1e-9)
    best = np.full(S, -np.inf)
    for acts in itertools.product(range(A), repeat=S):
        pi = np.zeros((S, A))
        pi[np.arange(S), acts] = 1.0
        best = np.maximum(best, evaluate_policy(mdp, pi).v)
    assert np.allclose(star.v, best, atol=1e-9)


def test_greedy_ties_go_to_lowest_index():
    q = np.array([[1.0, 1.0 + 1e-12, 0.5], [0.0, 2.0, 2.0]])
    assert greedy_actions(q).tolist() == [0, 1]


def test_visitation_matches_monte_carlo():
    rng = np.random.default_rng(2)
    mdp = random_mdp(4, 2, rng, gamma=0.8)
    pi = _random_table(rng, 4, 2)
    d = discounted_visitation(mdp, pi, mdp.mu)
    # geometric stopping: s_T with T ~ Geom(1 - gamma) is distributed as d_mu
    counts = np.zeros(4)
    n = 40000
    for _ in range(n):
        s = rng.choice(4, p=mdp.mu)
        while rng.random() < mdp.gamma:
            a = rng.choice(2, p=pi[s])
            s = rng.choice(4, p=mdp.trans[s, a])
        counts[s] += 1
    assert np.allclose(counts / n, d, atol=0.015)


def test_deterministic_structure():
    mdp = tree_mdp()
    nxt, order = deterministic_structure(mdp)
    pos = np.empty(mdp.S, dtype=int)
    pos[order] = np.arange(mdp.S)
    for s in range(mdp.S):
        for s2 in nxt[s]:
            assert s2 == s or pos[s2] > pos[s]
    assert deterministic_structure(random_mdp(3, 2, np.random.default_rng(0))) is None
    cyc = np.zeros((2, 1, 2))
    cyc[0, 0, 1] = cyc[1, 0, 0] = 1.0
    assert deterministic_structure(TabularMdp(cyc, [[0.0], [1.0]], 0.5, [0.5, 0.5], [1, 0])) is None


def test_npg_step_single_state_matches_sparse_bandit_update():
    r = np.array([0.9, 0.3, 0.6])
    mdp = TabularMdp(np.ones((1, 3, 1)), r[None, :], 0.0, [1.0], [1.0])
    theta = np.array([0.2, -0.5, 0.3])
    pi = softmax(theta)
    new, trace = stochastic_npg_step(PolicyParams(theta), mdp, 0.4, make_rng(5))
    expected = sparse_update(theta, pi, trace.action, r[trace.action], 0.4, float(pi @ r))
    assert np.allclose(softmax(new), softmax(expected), atol=1e-14)
    assert trace.state == 0
    assert trace.v_mu == pytest.approx(float(pi @ r))


def test_npg_step_improves_every_state_value():
    mdp = tree_mdp(depth=3)
    params = adversarial_tree_init(mdp, 0.07)
    rng = make_rng(1)
    prev = evaluate_policy(mdp, params).v
    for _ in range(300):
        params, _ = stochastic_npg_step(params, mdp, 0.1, rng)
        cur = evaluate_policy(mdp, params).v
        assert np.all(cur >= prev - 1e-10)
        prev = cur


def test_optimal_actions_on_tree():
    assert np.all(optimal_actions(tree_mdp(depth=2)) == 0)
