"""Finite discounted MDPs: exact policy evaluation, optimal policies, tree instances."""

import json
from dataclasses import dataclass

import numpy as np

from npg_lab.errors import NumericalFailure, SolveFailure
from npg_lab.policy import PolicyParams, logits_from_probs, policy_table
from npg_lab.rng import categorical

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class TabularMdp:
    """``trans[s, a, s']`` row-stochastic, ``r[s, a]`` in [0, 1], discount in [0, 1)."""

    trans: np.ndarray
    r: np.ndarray
    gamma: float
    mu: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        trans = np.array(self.trans, dtype=np.float64)
        r = np.array(self.r, dtype=np.float64)
        mu = np.array(self.mu, dtype=np.float64)
        rho = np.array(self.rho, dtype=np.float64)
        S, A = r.shape
        if trans.shape != (S, A, S):
            raise ValueError(f"trans has shape {trans.shape}, expected {(S, A, S)}")
        if np.any(trans < 0) or np.max(np.abs(trans.sum(axis=2) - 1.0)) > 1e-12:
            raise ValueError("transition rows must be probability vectors")
        if np.any(r < 0) or np.any(r > 1):
            raise ValueError("mean rewards must lie in [0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        for name, dist in (("mu", mu), ("rho", rho)):
            if dist.shape != (S,) or np.any(dist < 0) or abs(dist.sum() - 1.0) > 1e-12:
                raise ValueError(f"{name} must be a distribution over {S} states")
        if mu.min() <= 0:
            raise ValueError("initial distribution mu needs min_s mu(s) > 0")
        for name, arr in (("trans", trans), ("r", r), ("mu", mu), ("rho", rho)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def S(self):
        return self.r.shape[0]

    @property
    def A(self):
        return self.r.shape[1]

    def to_json(self):
        return json.dumps(
            {
                "S": self.S,
                "A": self.A,
                "gamma": self.gamma,
                "trans": self.trans.tolist(),
                "r": self.r.tolist(),
                "mu": self.mu.tolist(),
                "rho": self.rho.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text) if isinstance(text, str) else text
        mdp = cls(doc["trans"], doc["r"], doc["gamma"], doc["mu"], doc["rho"])
        if (mdp.S, mdp.A) != (doc["S"], doc["A"]):
            raise ValueError("S/A fields disagree with array shapes")
        return mdp


@dataclass(frozen=True)
class ValueBundle:
    v: np.ndarray
    q: np.ndarray
    adv: np.ndarray
    d_mu: np.ndarray

    def value(self, dist):
        return float(np.dot(dist, self.v))


def _as_table(pi):
    if isinstance(pi, PolicyParams):
        return policy_table(pi)
    return np.atleast_2d(np.asarray(pi, dtype=np.float64))


def _solve(matrix, rhs):
    if np.linalg.cond(matrix) > MAX_CONDITION:
        raise SolveFailure("policy evaluation system is ill-conditioned")
    return np.linalg.solve(matrix, rhs)


def state_transition_matrix(mdp, pi):
    """``P_pi[s, s'] = sum_a pi(a|s) P(s'|s,a)``."""
    return np.einsum("sa,sat->st", _as_table(pi), mdp.trans)


def discounted_visitation(mdp, pi, start):
    """``d_start^pi = (1 - gamma) sum_t gamma^t P(s_t = . | s_0 ~ start)``."""
    p_pi = state_transition_matrix(mdp, pi)
    eye = np.eye(mdp.S)
    return _solve(eye - mdp.gamma * p_pi.T, (1.0 - mdp.gamma) * np.asarray(start, dtype=np.float64))


def evaluate_policy(mdp, pi):
    """V, Q, advantages and ``d_mu`` for a stochastic policy by direct linear solves."""
    table = _as_table(pi)
    p_pi = state_transition_matrix(mdp, table)
    r_pi = np.sum(table * mdp.r, axis=1)
    eye = np.eye(mdp.S)
    v = _solve(eye - mdp.gamma * p_pi, r_pi)
    q = mdp.r + mdp.gamma * mdp.trans @ v
    adv = q - v[:, None]
    d_mu = _solve(eye - mdp.gamma * p_pi.T, (1.0 - mdp.gamma) * mdp.mu)
    return ValueBundle(v, q, adv, d_mu)


def value_iteration(mdp, tol=1e-12, max_iter=1_000_000):
    """Optimal values, iterating the Bellman optimality operator until the span of
    successive differences is below ``tol``."""
    v = np.zeros(mdp.S)
    for _ in range(max_iter):
        v_new = np.max(mdp.r + mdp.gamma * mdp.trans @ v, axis=1)
        diff = v_new - v
        v = v_new
        if np.ptp(diff) <= tol and np.max(np.abs(diff)) <= tol / max(1e-300, 1.0 - mdp.gamma):
            break
    return v


def greedy_actions(q, tie_tol=1e-10):
    """Lowest-index action within ``tie_tol`` of the best in each row."""
    best = q.max(axis=1, keepdims=True)
    return np.argmax(q >= best - tie_tol, axis=1)


def optimal_policy(mdp):
    """Deterministic optimal policy (one-hot rows) and its exact value bundle."""
    v = value_iteration(mdp)
    q = mdp.r + mdp.gamma * mdp.trans @ v
    a_star = greedy_actions(q)
    pi_star = np.zeros((mdp.S, mdp.A))
    pi_star[np.arange(mdp.S), a_star] = 1.0
    return pi_star, evaluate_policy(mdp, pi_star)


def optimal_actions(mdp):
    pi_star, _ = optimal_policy(mdp)
    return np.argmax(pi_star, axis=1)


def tree_mdp(depth=4, branch=4, rewards=(1.0, 0.9, 0.8, 0.2), gamma=0.9, mu_root_mass=0.2):
    """Complete ``branch``-ary tree of ``depth`` layers with heap state numbering.

    Action ``j`` in an internal state moves deterministically to child
    ``branch * s + 1 + j``; leaves are absorbing under every action. Every state
    shares the same reward vector.
    """
    if depth < 1 or branch < 2:
        raise ValueError("need depth >= 1 and branch >= 2")
    rewards = np.asarray(rewards, dtype=np.float64)
    if rewards.shape != (branch,):
        raise ValueError("one reward per action (= branch) is required")
    S = sum(branch**i for i in range(depth))
    n_internal = S - branch ** (depth - 1)
    trans = np.zeros((S, branch, S))
    for s in range(S):
        for j in range(branch):
            trans[s, j, branch * s + 1 + j if s < n_internal else s] = 1.0
    r = np.tile(rewards, (S, 1))
    rho = np.zeros(S)
    rho[0] = 1.0
    if S == 1:
        mu = np.ones(1)
    else:
        mu = np.full(S, (1.0 - mu_root_mass) / (S - 1))
        mu[0] = mu_root_mass
    return TabularMdp(trans, r, gamma, mu, rho)


def tree_layers(depth, branch):
    """State indices of each layer under heap numbering."""
    layers, start = [], 0
    for i in range(depth):
        layers.append(np.arange(start, start + branch**i))
        start += branch**i
    return layers


def adversarial_tree_init(mdp, opt_prob=0.07, a_star=None):
    """Logits putting ``opt_prob`` on the optimal action and the rest uniformly elsewhere."""
    if not 0.0 < opt_prob <= 1.0 / mdp.A:
        raise ValueError("opt_prob must lie in (0, 1/A]")
    if a_star is None:
        a_star = optimal_actions(mdp)
    probs = np.full((mdp.S, mdp.A), (1.0 - opt_prob) / (mdp.A - 1))
    probs[np.arange(mdp.S), a_star] = opt_prob
    return logits_from_probs(probs)


def deterministic_structure(mdp):
    """``(next_state, order)`` when every transition is deterministic and the only
    cycles are self-loops, else ``None``. ``order`` puts each state before its
    non-self successors."""
    if not np.all((mdp.trans == 0.0) | (mdp.trans == 1.0)):
        return None
    nxt = np.argmax(mdp.trans, axis=2).astype(np.int64)
    indeg = np.zeros(mdp.S, dtype=np.int64)
    for s in range(mdp.S):
        for s2 in set(nxt[s].tolist()) - {s}:
            indeg[s2] += 1
    order, frontier = [], [s for s in range(mdp.S) if indeg[s] == 0]
    while frontier:
        s = frontier.pop()
        order.append(s)
        for s2 in set(nxt[s].tolist()) - {s}:
            indeg[s2] -= 1
            if indeg[s2] == 0:
                frontier.append(s2)
    if len(order) != mdp.S:
        return None
    return nxt, np.array(order, dtype=np.int64)


@dataclass(frozen=True)
class Alg1Trace:
    state: int
    action: int
    v_mu: float
    v_rho: float
    min_pi_opt: float


def stochastic_npg_step(params, mdp, eta, rng, a_star=None):
    """One on-policy stochastic NPG step with exact Q and a state-value baseline.

    Draws two uniforms: the first picks the action, the second the state from
    ``d_mu`` of the current policy.
    """
    if a_star is None:
        a_star = optimal_actions(mdp)
    table = policy_table(params)
    values = evaluate_policy(mdp, table)
    u_action, u_state = rng.random(2)
    s = categorical(values.d_mu, u_state)
    a = categorical(table[s], u_action)
    trace = Alg1Trace(
        s,
        a,
        values.value(mdp.mu),
        values.value(mdp.rho),
        float(np.min(table[np.arange(mdp.S), a_star])),
    )
    row = params.logits[s].copy()
    row[a] += eta * values.adv[s, a] / table[s, a]
    if not np.isfinite(row[a]):
        raise NumericalFailure("non-finite logit in NPG step", state=s, action=a, eta=eta)
    return params.with_row(s, row - row.mean()), trace


def random_mdp(n_states, n_actions, rng, gamma=None):
    """Dense random MDP with Dirichlet transitions and uniform rewards, for tests and sweeps."""
    trans = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    trans /= trans.sum(axis=2, keepdims=True)
    r = rng.random((n_states, n_actions))
    mu = rng.dirichlet(np.ones(n_states)) + 0.05
    mu /= mu.sum()
    rho = rng.dirichlet(np.ones(n_states))
    if gamma is None:
        gamma = float(rng.uniform(0.5, 0.95))
    return TabularMdp(trans, r, gamma, mu, rho)
