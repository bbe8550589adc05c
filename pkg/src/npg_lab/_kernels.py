"""Compiled inner loops for long runs.

These mirror ``updates.step_bandit`` and ``mdp.stochastic_npg_step`` step for step
(same uniform consumption: column 0 picks the action, column 1 the reward
outcome or the state), and are cross-checked against them in the test suite.

Status codes written to the stats arrays: 0 ok, 1 non-finite logit.
Probabilities that underflow to exactly 0 are not failures: such an action
can no longer be sampled, so nothing ever divides by it.
"""

import numpy as np
from numba import njit

# bandit stats layout
B_MIN_PI = 0
B_N_VIOL = 1
B_WORST_DROP = 2
B_ESCAPE_T = 3
B_PREV_ER = 4
B_STATUS = 5
B_FAIL_T = 6
B_FAIL_A = 7
B_FAIL_ETA = 8
B_MIN_COMP = 9
B_SIZE = 10

# mdp stats layout
M_MIN_PI = 0
M_N_VIOL = 1
M_WORST_DROP = 2
M_ESCAPE_T = 3
M_STATUS = 4
M_FAIL_T = 5
M_FAIL_S = 6
M_FAIL_A = 7
M_SIZE = 8

STATUS_OK = 0
STATUS_NONFINITE = 1


def new_bandit_stats():
    s = np.zeros(B_SIZE)
    s[B_MIN_PI] = np.inf
    s[B_MIN_COMP] = np.inf
    s[B_ESCAPE_T] = -1.0
    s[B_PREV_ER] = np.nan
    s[B_FAIL_T] = -1.0
    s[B_FAIL_A] = -1.0
    s[B_FAIL_ETA] = np.nan
    return s


def new_mdp_stats():
    s = np.zeros(M_SIZE)
    s[M_MIN_PI] = np.inf
    s[M_ESCAPE_T] = -1.0
    s[M_FAIL_T] = -1.0
    s[M_FAIL_S] = -1.0
    s[M_FAIL_A] = -1.0
    return s


@njit(cache=True, nogil=True)
def _softmax_into(theta, pi):
    m = theta[0]
    for i in range(1, theta.size):
        if theta[i] > m:
            m = theta[i]
    s = 0.0
    for i in range(theta.size):
        pi[i] = np.exp(theta[i] - m)
        s += pi[i]
    for i in range(theta.size):
        pi[i] /= s


@njit(cache=True, nogil=True)
def _categorical(pi, u):
    acc = 0.0
    last = 0
    for i in range(pi.size):
        if pi[i] > 0.0:
            last = i
        acc += pi[i]
        if u < acc:
            return i
    return last


@njit(cache=True, nogil=True)
def _recenter(theta):
    m = 0.0
    for i in range(theta.size):
        m += theta[i]
    m /= theta.size
    for i in range(theta.size):
        theta[i] -= m


@njit(cache=True, nogil=True)
def bandit_chunk(
    theta, r, sup_vals, sup_cum, sup_len,
    stochastic, baseline, adaptive, eta_const, adapt_scale, adapt_denom,
    forced, track, escape_gap, mono_tol,
    uniforms, t0, n_steps, final,
    rec_t, rec_pos, out, stats,
):
    """Advance ``n_steps`` bandit updates in place; returns the new record cursor.

    Row layout of ``out``: t, expected_reward, gap, pi_track, eta_t, complement.
    """
    K = theta.size
    pi = np.empty(K)
    r_best = r[0]
    for i in range(1, K):
        if r[i] > r_best:
            r_best = r[i]
    n_rec = rec_t.size
    last = n_steps + 1 if final else n_steps
    for i in range(last):
        t = t0 + i
        _softmax_into(theta, pi)
        er = 0.0
        gap = 0.0
        comp = 0.0
        for j in range(K):
            er += pi[j] * r[j]
            gap += pi[j] * (r_best - r[j])
            if j != track:
                comp += pi[j]
        p_track = pi[track]
        if p_track < stats[B_MIN_PI]:
            stats[B_MIN_PI] = p_track
        if comp < stats[B_MIN_COMP]:
            stats[B_MIN_COMP] = comp
        prev = stats[B_PREV_ER]
        if prev == prev:
            drop = prev - er
            if drop > stats[B_WORST_DROP]:
                stats[B_WORST_DROP] = drop
            if drop > mono_tol:
                stats[B_N_VIOL] += 1
        stats[B_PREV_ER] = er
        if stats[B_ESCAPE_T] < 0 and gap < escape_gap:
            stats[B_ESCAPE_T] = t

        if final and i == n_steps:
            while rec_pos < n_rec and rec_t[rec_pos] < t:
                rec_pos += 1
            if rec_pos < n_rec and rec_t[rec_pos] == t:
                out[rec_pos, 0] = t
                out[rec_pos, 1] = er
                out[rec_pos, 2] = gap
                out[rec_pos, 3] = p_track
                out[rec_pos, 4] = np.nan
                out[rec_pos, 5] = comp
                rec_pos += 1
            return rec_pos

        if forced >= 0:
            a = forced
        else:
            a = _categorical(pi, uniforms[i, 0])
        if stochastic:
            u = uniforms[i, 1]
            x = sup_vals[a, sup_len[a] - 1]
            for j in range(sup_len[a]):
                if u < sup_cum[a, j]:
                    x = sup_vals[a, j]
                    break
        else:
            x = r[a]
        b = er if baseline else 0.0
        if adaptive:
            eta = adapt_scale * pi[a] * abs(r[a] - er) / adapt_denom
        else:
            eta = eta_const

        if rec_pos < n_rec and rec_t[rec_pos] == t:
            out[rec_pos, 0] = t
            out[rec_pos, 1] = er
            out[rec_pos, 2] = gap
            out[rec_pos, 3] = p_track
            out[rec_pos, 4] = eta
            out[rec_pos, 5] = comp
            rec_pos += 1

        theta[a] += eta * (x - b) / pi[a]
        if not np.isfinite(theta[a]):
            stats[B_STATUS] = 1
            stats[B_FAIL_T] = t
            stats[B_FAIL_A] = a
            stats[B_FAIL_ETA] = eta
            return rec_pos
        _recenter(theta)
    return rec_pos


@njit(cache=True, nogil=True)
def _tree_evaluate(pi, r, nxt, order, gamma, mu, v, q, d):
    """Exact V, Q, d_mu for deterministic transitions whose only cycles are self-loops.

    ``order`` lists states so that every non-self successor comes later.
    """
    S, A = r.shape
    for k in range(S - 1, -1, -1):
        s = order[k]
        num = 0.0
        stay = 0.0
        for a in range(A):
            s2 = nxt[s, a]
            if s2 == s:
                num += pi[s, a] * r[s, a]
                stay += pi[s, a]
            else:
                num += pi[s, a] * (r[s, a] + gamma * v[s2])
        v[s] = num / (1.0 - gamma * stay)
    for s in range(S):
        for a in range(A):
            q[s, a] = r[s, a] + gamma * v[nxt[s, a]]
    for s in range(S):
        d[s] = (1.0 - gamma) * mu[s]
    for k in range(S):
        s = order[k]
        stay = 0.0
        for a in range(A):
            if nxt[s, a] == s:
                stay += pi[s, a]
        d[s] = d[s] / (1.0 - gamma * stay)
        for a in range(A):
            s2 = nxt[s, a]
            if s2 != s:
                d[s2] += gamma * d[s] * pi[s, a]


@njit(cache=True, nogil=True)
def tree_chunk(
    theta, r, nxt, order, gamma, mu, rho, a_star, v_star_rho,
    eta, escape_gap, mono_tol,
    uniforms, t0, n_steps, final,
    rec_t, rec_pos, out, stats, v_prev, have_prev,
):
    """Stochastic NPG with exact V/Q/d_mu on a deterministic tree-like MDP.

    Row layout of ``out``: t, v_rho, v_mu, gap_rho, min_pi_opt.
    """
    S, A = r.shape
    pi = np.empty((S, A))
    v = np.empty(S)
    q = np.empty((S, A))
    d = np.empty(S)
    n_rec = rec_t.size
    last = n_steps + 1 if final else n_steps
    for s in range(S):
        _softmax_into(theta[s], pi[s])
    for i in range(last):
        t = t0 + i
        _tree_evaluate(pi, r, nxt, order, gamma, mu, v, q, d)
        v_rho = 0.0
        v_mu = 0.0
        min_pi = 1.0
        for s in range(S):
            v_rho += rho[s] * v[s]
            v_mu += mu[s] * v[s]
            if pi[s, a_star[s]] < min_pi:
                min_pi = pi[s, a_star[s]]
        gap = v_star_rho - v_rho
        if min_pi < stats[M_MIN_PI]:
            stats[M_MIN_PI] = min_pi
        if have_prev:
            for s in range(S):
                drop = v_prev[s] - v[s]
                if drop > stats[M_WORST_DROP]:
                    stats[M_WORST_DROP] = drop
                if drop > mono_tol:
                    stats[M_N_VIOL] += 1
        for s in range(S):
            v_prev[s] = v[s]
        have_prev = True
        if stats[M_ESCAPE_T] < 0 and gap < escape_gap:
            stats[M_ESCAPE_T] = t

        if rec_pos < n_rec and rec_t[rec_pos] == t:
            out[rec_pos, 0] = t
            out[rec_pos, 1] = v_rho
            out[rec_pos, 2] = v_mu
            out[rec_pos, 3] = gap
            out[rec_pos, 4] = min_pi
            rec_pos += 1
        if final and i == n_steps:
            return rec_pos, have_prev

        st = _categorical(d, uniforms[i, 1])
        a = _categorical(pi[st], uniforms[i, 0])
        theta[st, a] += eta * (q[st, a] - v[st]) / pi[st, a]
        if not np.isfinite(theta[st, a]):
            stats[M_STATUS] = 1
            stats[M_FAIL_T] = t
            stats[M_FAIL_S] = st
            stats[M_FAIL_A] = a
            return rec_pos, have_prev
        _recenter(theta[st])
        _softmax_into(theta[st], pi[st])
    return rec_pos, have_prev
