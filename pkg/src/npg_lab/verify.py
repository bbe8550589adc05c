"""Randomized sweeps of the oracle checks.

Each check is summarized by its worst slack across the sweep, so a report is a
short list of ``{check, params, slack, pass}`` records however large the sweep.
"""

import numpy as np

from npg_lab import oracles
from npg_lab.bandit import BanditInstance, RewardDistribution, k20_bandit_instance
from npg_lab.mdp import adversarial_tree_init, random_mdp, tree_mdp
from npg_lab.policy import PolicyParams, softmax
from npg_lab.rng import make_rng
from npg_lab.updates import AdaptiveStep

SUITES = ("lemma1", "lemma3", "domination", "nl-coeff", "variance", "supporting")


def _record(check, params, slack, tol=0.0):
    slack = float(slack)
    return {"check": check, "params": params, "slack": slack, "pass": bool(slack >= -tol)}


def _worst(values):
    values = np.asarray(values, dtype=np.float64)
    i = int(np.argmin(values))
    return float(values[i]), i


def random_reward_vector(rng, K):
    return rng.random(K)


def random_finite_support_instance(rng, K=None, max_support=4, r_max=None):
    """Instance with ``K`` actions whose reward laws have at most ``max_support``
    atoms, mean ``r(a)`` in [0, 1], and support inside ``[-r_max, r_max]``."""
    K = int(rng.integers(2, 9)) if K is None else K
    r_max = float(rng.uniform(1.0, 4.0)) if r_max is None else r_max
    r = rng.random(K)
    dists = []
    for mean in r:
        n = int(rng.integers(1, max_support + 1))
        p = rng.dirichlet(np.ones(n)) if n > 1 else np.ones(1)
        p = p / p.sum()
        raw = rng.uniform(-1.0, 1.0, n)
        d = raw - np.dot(p, raw)
        scale = 1.0
        for dj in d:
            if dj > 0:
                scale = min(scale, (r_max - mean) / dj)
            elif dj < 0:
                scale = min(scale, (r_max + mean) / -dj)
        scale *= rng.uniform(0.0, 1.0) ** 0.25
        dists.append(RewardDistribution(mean + scale * d, p))
    return BanditInstance(r, dists, r_max)


def suite_lemma1(seed=0, n_simplified=1000, n_stochastic=200):
    rng = make_rng(seed, 1)
    agree, bound1, step_min = [], [], []
    for _ in range(n_simplified):
        K = int(rng.integers(2, 9))
        pi = oracles.random_policy(rng, K)
        r = random_reward_vector(rng, K)
        eta = float(rng.uniform(1e-3, 2.0))
        rep = oracles.exact_progress_simplified(pi, r, eta)
        agree.append(1e-12 - abs(rep.exact_progress - rep.extra["brute_force"]))
        bound1.append(rep.slack)
        step_min.append(rep.extra["min_step_progress"])
    middle, final = [], []
    for _ in range(n_stochastic):
        inst = random_finite_support_instance(rng)
        pi = oracles.random_policy(rng, inst.K)
        rep = oracles.exact_progress_stochastic(pi, inst, AdaptiveStep(inst.r_max))
        s = rep.slacks()
        middle.append(s["sampled_progress_middle_bound"])
        final.append(s["sampled_progress_final_bound"])
    k20 = oracles.exact_progress_stochastic(
        np.full(20, 0.05), k20_bandit_instance(), AdaptiveStep(4.0)
    ).slacks()

    out = []
    w, i = _worst(agree)
    out.append(_record("simplified_closed_form_vs_brute_force", {"n": n_simplified, "worst": i}, w))
    w, i = _worst(bound1)
    out.append(_record("true_mean_progress_bound", {"n": n_simplified, "worst": i}, w, 1e-10))
    w, i = _worst(step_min)
    out.append(_record("monotone_every_outcome", {"n": n_simplified, "worst": i}, w, 1e-12))
    w, i = _worst(middle)
    out.append(_record("sampled_progress_middle_bound", {"n": n_stochastic, "worst": i}, w, 1e-10))
    w, i = _worst(final)
    out.append(_record("sampled_progress_final_bound", {"n": n_stochastic, "worst": i}, w, 1e-10))
    for name, slack in k20.items():
        out.append(_record(name, {"instance": "k20", "pi": "uniform"}, slack, 1e-10))
    return out


def suite_lemma3(seed=0, n_mdps=20, n_policies=20, include_tree=True):
    rng = make_rng(seed, 3)
    slacks = []
    for _ in range(n_mdps):
        S = int(rng.integers(1, 7))
        A = int(rng.integers(2, 5))
        mdp = random_mdp(S, A, rng)
        for _ in range(n_policies):
            params = PolicyParams(rng.normal(0.0, rng.uniform(0.1, 3.0), size=(S, A)))
            eta = float(rng.uniform(1e-2, 2.0))
            slacks.append(oracles.exact_progress_mdp(params, mdp, eta).slack)
    out = []
    w, i = _worst(slacks)
    out.append(_record("mdp_progress_bound_random", {"mdps": n_mdps, "policies": n_policies, "worst": i}, w, 1e-8))

    # one-state, gamma = 0 reduces to the simplified bandit update
    r = rng.random(4)
    pi = oracles.random_policy(rng, 4)
    from npg_lab.mdp import TabularMdp

    one = TabularMdp(np.ones((1, 4, 1)), r[None, :], 0.0, [1.0], [1.0])
    a = oracles.exact_progress_mdp(PolicyParams(np.log(pi)), one, 0.5).exact_progress
    b = oracles.exact_progress_simplified(pi, r, 0.5).exact_progress
    out.append(_record("mdp_single_state_reduction", {"eta": 0.5}, 1e-10 - abs(a - b)))

    if include_tree:
        mdp = tree_mdp()
        rep = oracles.exact_progress_mdp(adversarial_tree_init(mdp, 0.07), mdp, 0.1)
        out.append(_record("mdp_progress_bound_tree", {"S": mdp.S, "eta": 0.1}, rep.slack, 1e-8))
    return out


def suite_domination(grid=1001):
    ps = np.round(np.arange(0.01, 1.0001, 0.01), 2)
    eps = np.round(np.arange(0.1, 1.0001, 0.1), 1)
    worst, arg = -np.inf, None
    for p in ps:
        for e in eps:
            v = oracles.check_piecewise_domination(p, e, grid)
            if v > worst:
                worst, arg = v, (float(p), float(e))
    return [
        _record(
            "piecewise_domination",
            {"p_grid": len(ps), "eps_grid": len(eps), "grid": grid, "worst_p_eps": arg},
            -worst,
            1e-12,
        )
    ]


def suite_nl_coeff(seed=0, n=10_000):
    rng = make_rng(seed, 4)
    slacks = []
    for _ in range(n):
        K = int(rng.integers(2, 11))
        r = rng.random(K)
        pi = oracles.random_policy(rng, K)
        slacks.append(oracles.check_nl_coefficient_bound(pi, r))
    w, i = _worst(slacks)
    return [_record("nl_coefficient", {"n": n, "worst": i}, w, 1e-12)]


def suite_variance(seed=0, n=100):
    rng = make_rng(seed, 5)
    moments, unbiased = [], []
    for _ in range(n):
        K = int(rng.integers(2, 9))
        pi = oracles.random_policy(rng, K)
        r = rng.random(K)
        enum = oracles.second_moments_enumeration(pi, r)
        closed = oracles.second_moments_closed_form(pi, r)
        rel = max(abs(x - y) / max(1.0, abs(y)) for x, y in zip(enum, closed))
        moments.append(1e-10 - rel)
        plain, centered = oracles.unbiasedness_enumeration(pi, r)
        unbiased.append(1e-12 - max(np.max(np.abs(plain - r)), np.max(np.abs(centered - r))))
    worked = oracles.second_moments_enumeration([0.5, 0.5], [1.0, 0.5])
    out = []
    w, i = _worst(moments)
    out.append(_record("second_moments", {"n": n, "worst": i}, w))
    w, i = _worst(unbiased)
    out.append(_record("unbiasedness", {"n": n, "worst": i}, w))
    out.append(
        _record(
            "second_moments_worked_case",
            {"pi": [0.5, 0.5], "r": [1.0, 0.5], "expected": [2.5, 1.375]},
            1e-12 - max(abs(worked[0] - 2.5), abs(worked[1] - 1.375)),
        )
    )
    return out


def suite_supporting(seed=0, n_pairs=1000, n_pdl=20):
    rng = make_rng(seed, 6)
    smooth = []
    for _ in range(n_pairs):
        K = int(rng.integers(2, 9))
        theta = rng.normal(0.0, 2.0, K)
        theta2 = theta + rng.normal(0.0, rng.uniform(0.01, 3.0), K)
        smooth.append(oracles.check_smoothness(theta, theta2, int(rng.integers(K))))
    pdl = []
    for _ in range(n_pdl):
        S, A = int(rng.integers(1, 7)), int(rng.integers(2, 5))
        mdp = random_mdp(S, A, rng)
        pi = np.vstack([softmax(rng.normal(0, 2, A)) for _ in range(S)])
        pi2 = np.vstack([softmax(rng.normal(0, 2, A)) for _ in range(S)])
        pdl.append(1e-8 - oracles.performance_difference_gap(mdp, pi, pi2))

    t = np.arange(2, 10**6 + 1, dtype=np.float64)
    summable = 1.0 - 1.0 / t**2
    harmonic = 1.0 - 1.0 / t
    out = []
    w, i = _worst(smooth)
    out.append(_record("softmax_smoothness", {"n": n_pairs, "worst": i}, w))
    w, i = _worst(pdl)
    out.append(_record("performance_difference", {"n": n_pdl, "worst": i}, w))
    prod, total = oracles.partial_product_analysis(summable)
    out.append(
        _record(
            "partial_product_summable",
            {"probs": "1 - 1/t^2, t=2..1e6", "product": prod, "sum": total},
            min(prod - 0.4, 1e-5 - abs(total - (np.pi**2 / 6 - 1))),
        )
    )
    prod, _ = oracles.partial_product_analysis(harmonic)
    out.append(
        _record(
            "partial_product_harmonic",
            {"probs": "1 - 1/t, t=2..1e6", "product": prod},
            1e-12 - abs(prod - 1.0 / 10**6),
        )
    )
    labels = (oracles.classify_sampling(summable), oracles.classify_sampling(harmonic))
    out.append(
        _record(
            "sampling_classification",
            {"summable": labels[0], "harmonic": labels[1]},
            0.0 if labels == ("bad", "good") else -1.0,
        )
    )
    return out


def run_suite(name, seed=0):
    table = {
        "lemma1": suite_lemma1,
        "lemma3": suite_lemma3,
        "domination": lambda seed=0: suite_domination(),
        "nl-coeff": suite_nl_coeff,
        "variance": suite_variance,
        "supporting": suite_supporting,
    }
    if name == "all":
        return [rec for s in SUITES for rec in table[s](seed=seed)]
    return table[name](seed=seed)
