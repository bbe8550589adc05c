"""Exact-expectation oracles and numerical checks of the progress inequalities.

Nothing here samples: every expectation is an enumeration over the finitely many
outcomes of one update, so the results can serve as ground truth.
"""

from dataclasses import dataclass, field

import numpy as np

from npg_lab.errors import DegenerateInstance
from npg_lab.mdp import discounted_visitation, evaluate_policy, optimal_policy
from npg_lab.policy import PolicyParams, policy_jacobian_row, policy_table, softmax
from npg_lab.updates import AdaptiveStep, baseline_correction, is_estimate, sparse_update


@dataclass
class ProgressReport:
    """One-step expected improvement against a lower bound.

    ``bounds`` holds every bound that was evaluated; ``nl_bound``/``slack`` refer
    to the tightest-claimed one (the first entry).
    """

    exact_progress: float
    nl_bound: float
    slack: float
    per_action_terms: np.ndarray
    bounds: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def slacks(self):
        return {name: self.exact_progress - b for name, b in self.bounds.items()}


def _unique_best(r):
    r = np.asarray(r)
    best = r.max()
    if np.sum(r == best) > 1:
        raise DegenerateInstance("argmax of r is not unique")
    a_star = int(np.argmax(r))
    gap = float(best - np.max(np.delete(r, a_star))) if r.size > 1 else 0.0
    return a_star, gap


def sigmoid_like(p, y):
    """``f_p(y) = (e^y - 1) / (e^y + (1 - p)/p)``, evaluated without overflow."""
    p, y = np.broadcast_arrays(np.asarray(p, dtype=np.float64), np.asarray(y, dtype=np.float64))
    c = (1.0 - p) / p
    out = np.empty(y.shape)
    pos = y > 0
    out[pos] = -np.expm1(-y[pos]) / (1.0 + c[pos] * np.exp(-y[pos]))
    out[~pos] = np.expm1(y[~pos]) / (np.exp(y[~pos]) + c[~pos])
    return out


def single_logit_progress(pi, action, delta, r):
    """Change in ``pi^T r`` when only ``theta[action]`` moves by ``delta``."""
    b = float(np.dot(pi, r))
    return float(sigmoid_like(pi[action], delta)) * (r[action] - b)


def exact_progress_simplified(pi, r, eta):
    """Expected one-step improvement of the baseline update with true-mean rewards."""
    pi = np.asarray(pi, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    b = float(np.dot(pi, r))
    adv = r - b
    terms = pi * sigmoid_like(pi, eta * adv / pi) * adv
    closed = float(terms.sum())

    # brute force: apply the sparse update for each possible a_t and re-run softmax
    theta = np.log(pi)
    outcomes = np.empty(pi.size)
    for a in range(pi.size):
        new = sparse_update(theta, pi, a, r[a], eta, b)
        outcomes[a] = float(np.dot(softmax(new), r)) - b
    brute = float(np.dot(pi, outcomes))

    a_star = int(np.argmax(r))
    bound = eta / (1.0 + eta) * pi[a_star] * (r[a_star] - b) ** 2
    return ProgressReport(
        exact_progress=closed,
        nl_bound=bound,
        slack=closed - bound,
        per_action_terms=terms,
        bounds={"true_mean_progress_bound": bound},
        extra={"brute_force": brute, "min_step_progress": float(outcomes.min())},
    )


def exact_progress_stochastic(pi, inst, step):
    """Expected improvement with sampled rewards, enumerating every (a_t, x) outcome."""
    pi = np.asarray(pi, dtype=np.float64)
    r = inst.r
    b = float(np.dot(pi, r))
    terms = np.zeros(inst.K)
    for a, dist in enumerate(inst.dists):
        eta = step(pi, a, r, b)
        for x, px in zip(dist.values, dist.probs):
            terms[a] += pi[a] * px * single_logit_progress(pi, a, eta * (x - b) / pi[a], r)
    progress = float(terms.sum())

    r_max = step.r_max if isinstance(step, AdaptiveStep) else inst.r_max
    scale = 1.0 / (16.0 * r_max**2)
    middle = scale * float(np.sum(pi**2 * np.abs(r - b) ** 3))
    a_star = int(np.argmax(r))
    gap = inst.gap
    final = scale * gap / (inst.K - 1) * pi[a_star] ** 2 * (r[a_star] - b) ** 2
    return ProgressReport(
        exact_progress=progress,
        nl_bound=middle,
        slack=progress - middle,
        per_action_terms=terms,
        bounds={"sampled_progress_middle_bound": middle, "sampled_progress_final_bound": final},
    )


def exact_progress_mdp(params, mdp, eta, pi_star=None):
    """Expected improvement of ``V(mu)`` for one stochastic NPG step, re-solving values
    for every candidate ``(s_t, a_t)``."""
    table = policy_table(params)
    cur = evaluate_policy(mdp, table)
    if pi_star is None:
        pi_star, star = optimal_policy(mdp)
    else:
        star = evaluate_policy(mdp, pi_star)
    a_star = np.argmax(pi_star, axis=1)

    v_mu = cur.value(mdp.mu)
    expected = 0.0
    per_state = np.zeros(mdp.S)
    worst_state_change = np.inf
    for s in range(mdp.S):
        for a in range(mdp.A):
            w = cur.d_mu[s] * table[s, a]
            row = params.logits[s].copy()
            row[a] += eta * cur.adv[s, a] / table[s, a]
            new = evaluate_policy(mdp, params.with_row(s, row))
            per_state[s] += w * (new.value(mdp.mu) - v_mu)
            expected += w * new.value(mdp.mu)
            worst_state_change = min(worst_state_change, float(np.min(new.v - cur.v)))
    progress = expected - v_mu

    ratio = np.max(star.d_mu / mdp.mu)
    min_opt = float(np.min(table[np.arange(mdp.S), a_star]))
    subopt = star.value(mdp.mu) - v_mu
    bound = (
        eta * (1.0 - mdp.gamma) ** 4 * mdp.mu.min() / (1.0 + eta)
        / ratio * min_opt**2 / mdp.S * subopt**2
    )
    return ProgressReport(
        exact_progress=progress,
        nl_bound=bound,
        slack=progress - bound,
        per_action_terms=per_state,
        bounds={"mdp_progress": bound},
        extra={"min_state_value_change": worst_state_change, "suboptimality": subopt},
    )


def check_piecewise_domination(p, eps, grid=1001):
    """Largest violation of the linear sandwich bounds on ``f_p`` over ``|y| <= eps``.

    A non-positive return value means the bounds hold on the grid.
    """
    y_pos = np.linspace(0.0, eps, grid)
    f = sigmoid_like(p, y_pos)
    worst = max(
        np.max((1 - eps) * p * y_pos - f),
        np.max(f - (1 + eps) * p * y_pos),
    )
    y_neg = -y_pos
    f = sigmoid_like(p, y_neg)
    worst = max(
        worst,
        np.max((1 + eps) * p * y_neg - f),
        np.max(f - (1 - eps) * p * y_neg),
    )
    return float(worst)


def check_nl_coefficient_bound(pi, r):
    """``sum_i pi_i^2 |r_i - pi^T r|^3 - gap/(K-1) pi(a*)^2 (r(a*) - pi^T r)^2``."""
    pi = np.asarray(pi, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    a_star, gap = _unique_best(r)
    b = float(np.dot(pi, r))
    lhs = float(np.sum(pi**2 * np.abs(r - b) ** 3))
    rhs = gap / (r.size - 1) * pi[a_star] ** 2 * (r[a_star] - b) ** 2
    return lhs - rhs


def check_smoothness(theta, theta2, action):
    """``3/4 ||d||^2 - |pi'(a) - pi(a) - <grad pi(a), d>|`` (non-negative when it holds)."""
    theta = np.asarray(theta, dtype=np.float64)
    d = np.asarray(theta2, dtype=np.float64) - theta
    pi = softmax(theta)
    lin = pi[action] + float(np.dot(policy_jacobian_row(pi, action), d))
    err = abs(softmax(theta2)[action] - lin)
    return 0.75 * float(np.dot(d, d)) - err


def performance_difference_gap(mdp, pi, pi2, start=None):
    """Absolute error of the performance difference identity at ``start`` (default rho)."""
    start = mdp.rho if start is None else start
    a = evaluate_policy(mdp, pi)
    b = evaluate_policy(mdp, pi2)
    d2 = discounted_visitation(mdp, pi2, start)
    rhs = float(np.sum(d2[:, None] * (np.asarray(pi2) - np.asarray(pi)) * a.q)) / (1.0 - mdp.gamma)
    return abs(b.value(start) - a.value(start) - rhs)


def partial_product_analysis(probs):
    """``(prod_t probs_t, sum_t (1 - probs_t))`` for a finite prefix of a sequence."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.size == 0:
        raise ValueError("need a nonempty sequence")
    if np.any(probs <= 0) or np.any(probs >= 1):
        raise ValueError("probabilities must lie in (0, 1)")
    comp = 1.0 - probs
    return float(np.exp(np.sum(np.log1p(-comp)))), float(comp.sum())


def classify_sampling(probs, decades=2):
    """``"good"`` if the complement series keeps growing (product -> 0), else ``"bad"``.

    Compares how much the partial sum of ``1 - probs`` grows over the last decade
    of indices with the decade before it: a divergent (log-like) series keeps
    adding a comparable amount, a summable one adds an order of magnitude less.
    """
    probs = np.asarray(probs, dtype=np.float64)
    n = probs.size
    if n < 10**decades:
        raise ValueError("sequence too short to compare decades")
    csum = np.cumsum(1.0 - probs)
    last = csum[n - 1] - csum[n // 10 - 1]
    prev = csum[n // 10 - 1] - csum[n // 100 - 1]
    return "good" if last > 0.5 * prev else "bad"


def unbiasedness_enumeration(pi, r):
    """Exact ``E[r_hat]`` and ``E[r_hat - b_hat]`` under ``a_t ~ pi`` with true means."""
    pi = np.asarray(pi, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    b = float(np.dot(pi, r))
    plain = np.zeros(pi.size)
    centered = np.zeros(pi.size)
    for a in range(pi.size):
        est = is_estimate(pi, a, r[a])
        plain += pi[a] * est
        centered += pi[a] * (est - baseline_correction(pi, a, b))
    return plain, centered


def second_moments_enumeration(pi, r):
    """Exact ``E||r_hat||^2`` and ``E||r_hat - b_hat||^2`` by enumerating ``a_t``."""
    pi = np.asarray(pi, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    b = float(np.dot(pi, r))
    plain = centered = 0.0
    for a in range(pi.size):
        est = is_estimate(pi, a, r[a])
        plain += pi[a] * float(np.dot(est, est))
        diff = est - baseline_correction(pi, a, b)
        centered += pi[a] * float(np.dot(diff, diff))
    return plain, centered


def second_moments_closed_form(pi, r):
    pi = np.asarray(pi, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    b = float(np.dot(pi, r))
    plain = float(np.sum(r**2 / pi))
    centered = float(np.sum((r - b) ** 2 / pi) - r.size * b**2 + 2.0 * b * r.sum())
    return plain, centered


def bandit_logit_step_bound(inst, step, pi):
    """Largest ``|delta theta|`` of the adaptive-step update over all (a_t, x) outcomes."""
    r = inst.r
    b = float(np.dot(pi, r))
    worst = 0.0
    for a, dist in enumerate(inst.dists):
        eta = step(pi, a, r, b)
        for x in dist.values:
            worst = max(worst, abs(eta * (x - b) / pi[a]))
    return worst


def random_policy(rng, K, spread=None):
    """Softmax of Gaussian logits with a random scale, so skewed policies are covered."""
    if spread is None:
        spread = rng.uniform(0.1, 5.0)
    return softmax(PolicyParams(rng.normal(0.0, spread, size=K)))
