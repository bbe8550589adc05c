import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from npg_lab.bandit import BanditInstance, k20_bandit_instance
from npg_lab.oracles import bandit_logit_step_bound, random_policy
from npg_lab.policy import PolicyParams, softmax
from npg_lab.rng import make_rng
from npg_lab.updates import (
    AdaptiveStep,
    ConstantStep,
    EstimatorKind,
    UpdateConfig,
    baseline_correction,
    dense_update,
    is_estimate,
    sparse_update,
    step_bandit,
    step_bandit_fixed_action,
)


def test_is_estimate_examples():
    assert np.allclose(is_estimate([0.5, 0.5], 0, 1.0), [2.0, 0.0])
    assert np.allclose(is_estimate([0.9, 0.1], 1, 0.5), [0.0, 5.0])


def test_baseline_correction_examples():
    assert np.allclose(baseline_correction([0.5, 0.5], 0, 0.75), [0.75, -0.75])
    assert np.allclose(baseline_correction([0.3, 0.7], 1, 0.0), [0.0, 0.0])


def test_step_size_validation():
    with pytest.raises(ValueError):
        ConstantStep(0.0)
    with pytest.raises(ValueError):
        AdaptiveStep(0.0)
    with pytest.raises(ValueError):
        UpdateConfig(step=AdaptiveStep(1.0), baseline=False)
    with pytest.raises(ValueError):
        UpdateConfig(iterations=0)


def test_adaptive_step_formula():
    step = AdaptiveStep(2.0)
    pi = np.array([0.25, 0.75])
    r = np.array([1.0, 0.0])
    b = float(pi @ r)
    assert step(pi, 0, r, b) == pytest.approx(0.25 * 0.75 / 32.0)
    halved = AdaptiveStep(4.0, scale=0.5, denominator=9.0)
    assert halved(pi, 1, r, b) == pytest.approx(0.5 * 0.75 * 0.25 / 9.0)


def test_sparse_update_example():
    # K=2, r=(1,0), uniform policy, eta=1, a_t=0: theta(0) moves by 0.5 / 0.5
    new = sparse_update(np.zeros(2), np.array([0.5, 0.5]), 0, 1.0, 1.0, 0.5)
    assert np.allclose(new, [1.0, 0.0])


@given(st.integers(2, 8), st.integers(0, 10**6), st.floats(0.01, 2.0))
def test_dense_and_sparse_rules_give_same_policy(K, seed, eta):
    rng = np.random.default_rng(seed)
    theta = rng.normal(0, 2, K)
    pi = softmax(theta)
    r = rng.random(K)
    a = int(rng.integers(K))
    x = float(rng.uniform(-2, 3))
    dense = dense_update(theta, pi, a, x, eta, r, baseline=True)
    sparse = sparse_update(theta, pi, a, x, eta, float(pi @ r))
    # equal up to a constant shift, hence equal after softmax
    diff = dense - sparse
    assert np.ptp(diff) < 1e-9
    assert np.allclose(softmax(dense), softmax(sparse), atol=1e-12)


@given(st.integers(2, 8), st.integers(0, 10**6))
def test_no_baseline_dense_update_is_sparse(K, seed):
    rng = np.random.default_rng(seed)
    theta = rng.normal(0, 1, K)
    pi = softmax(theta)
    r = rng.random(K)
    a = int(rng.integers(K))
    dense = dense_update(theta, pi, a, r[a], 0.3, r, baseline=False)
    assert np.allclose(dense, sparse_update(theta, pi, a, r[a], 0.3, 0.0))


def test_step_bandit_uses_two_uniforms_and_recenters():
    inst = k20_bandit_instance()
    cfg = UpdateConfig(EstimatorKind.STOCHASTIC_IS, True, AdaptiveStep(4.0))
    rng = make_rng(3)
    params, trace = step_bandit(PolicyParams.zeros(20), inst, cfg, rng)
    ref = make_rng(3)
    u_a, u_x = ref.random(2)
    assert trace.action == int(u_a * 20)
    assert trace.observed == inst.dists[trace.action].sample(u_x)
    assert abs(params.logits.mean()) < 1e-12
    assert trace.expected_reward == pytest.approx(inst.r.mean())
    # the generators stay in lockstep
    assert rng.random() == ref.random()


def test_monotone_improvement_long_run():
    inst = BanditInstance.deterministic([0.9, 0.7, 0.2, 0.5])
    cfg = UpdateConfig(EstimatorKind.SIMPLIFIED_IS, True, ConstantStep(0.5))
    rng = make_rng(0)
    params = PolicyParams.zeros(4)
    prev = softmax(params) @ inst.r
    for _ in range(3000):
        params, _ = step_bandit(params, inst, cfg, rng)
        cur = softmax(params) @ inst.r
        assert cur >= prev - 1e-12
        prev = cur


def test_adaptive_logit_step_bounded_on_k20_instance():
    inst = k20_bandit_instance()
    step = AdaptiveStep(4.0)
    rng = make_rng(7)
    for _ in range(200):
        pi = random_policy(rng, 20)
        assert bandit_logit_step_bound(inst, step, pi) <= 1.0 / (8 * 4.0) + 1e-15


def test_fixed_action_examples():
    inst = BanditInstance.deterministic([1.0, 0.0])
    no_base = UpdateConfig(EstimatorKind.SIMPLIFIED_IS, False, ConstantStep(1.0))
    p = step_bandit_fixed_action(PolicyParams.zeros(2), inst, no_base, 0)
    assert np.allclose(p.logits, [[1.0, -1.0]])
    # zero advantage with a baseline leaves theta unchanged
    flat = BanditInstance.deterministic([0.5, 0.5], require_unique_optimum=False)
    with_base = UpdateConfig(EstimatorKind.SIMPLIFIED_IS, True, ConstantStep(1.0))
    theta = PolicyParams([0.3, -0.3])
    assert np.allclose(step_bandit_fixed_action(theta, flat, with_base, 1).logits, theta.logits)
    with pytest.raises(ValueError):
        step_bandit_fixed_action(theta, flat, UpdateConfig(EstimatorKind.STOCHASTIC_IS), 0)


def test_fixed_action_committal_rates():
    inst = BanditInstance.deterministic([1.0, 0.0])
    no_base = UpdateConfig(EstimatorKind.SIMPLIFIED_IS, False, ConstantStep(1.0))
    p = PolicyParams.zeros(2)
    comps = []
    for _ in range(200):
        p = step_bandit_fixed_action(p, inst, no_base, 0)
        comps.append(softmax(p)[1])
    t = np.arange(1, 201)
    sel = slice(9, 200)
    slope, icpt = np.polyfit(t[sel], np.log(comps)[sel], 1)
    pred = slope * t[sel] + icpt
    r2 = 1 - np.sum((np.log(comps)[sel] - pred) ** 2) / np.sum(
        (np.log(comps)[sel] - np.log(comps)[sel].mean()) ** 2
    )
    assert slope < 0 and r2 > 0.99

    with_base = UpdateConfig(EstimatorKind.SIMPLIFIED_IS, True, ConstantStep(1.0))
    p = PolicyParams.zeros(2)
    lows = []
    for t in range(1, 5001):
        p = step_bandit_fixed_action(p, inst, with_base, 0)
        if t >= 1000:
            lows.append((t + 1) * softmax(p)[1])
    assert min(lows) > 0.1
