"""Softmax policies over finite action sets."""

from dataclasses import dataclass

import numpy as np

from npg_lab.errors import NumericalFailure


@dataclass(frozen=True)
class PolicyParams:
    """Logit table of shape ``(n_states, n_actions)``.

    A bandit is the one-state case, ``logits.shape == (1, K)``.
    """

    logits: np.ndarray

    def __post_init__(self):
        arr = np.array(self.logits, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2:
            raise ValueError(f"logits must be 1-D or 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NumericalFailure("non-finite logit in PolicyParams")
        arr.setflags(write=False)
        object.__setattr__(self, "logits", arr)

    @property
    def n_states(self):
        return self.logits.shape[0]

    @property
    def n_actions(self):
        return self.logits.shape[1]

    @classmethod
    def zeros(cls, n_actions, n_states=1):
        return cls(np.zeros((n_states, n_actions)))

    def with_row(self, state, row):
        new = self.logits.copy()
        new[state] = row
        return PolicyParams(new)


def _softmax_row(theta):
    if not np.all(np.isfinite(theta)):
        raise NumericalFailure("non-finite logit passed to softmax")
    # A logit spread beyond ~745 underflows exp() to exactly 0. Such an action can
    # no longer be sampled, so downstream updates never divide by it.
    z = np.exp(theta - theta.max())
    return z / z.sum()


def softmax(params, state=0):
    """Action probabilities at ``state``, computed with max-subtraction."""
    if isinstance(params, PolicyParams):
        theta = params.logits[state]
    else:
        theta = np.asarray(params, dtype=np.float64)
        if theta.ndim == 2:
            theta = theta[state]
    return _softmax_row(theta)


def policy_table(params):
    """All per-state probability vectors stacked into an ``(S, A)`` array."""
    return np.vstack([_softmax_row(row) for row in params.logits])


def policy_jacobian_row(pi, action):
    """Gradient of ``pi[action]`` with respect to that state's logits.

    Entry ``j`` is ``pi[a] * (delta_aj - pi[j])``, i.e. row ``a`` of
    ``diag(pi) - pi pi^T``.
    """
    pi = np.asarray(pi, dtype=np.float64)
    row = -pi[action] * pi
    row[action] += pi[action]
    return row


def recenter(params):
    """Subtract each state's mean logit. The induced policy does not change."""
    logits = params.logits if isinstance(params, PolicyParams) else np.atleast_2d(params)
    centered = logits - logits.mean(axis=1, keepdims=True)
    return PolicyParams(centered)


def logits_from_probs(probs):
    """Logits whose softmax reproduces ``probs`` (mean-zero per state)."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    if np.any(probs <= 0):
        raise ValueError("target probabilities must be strictly positive")
    return recenter(PolicyParams(np.log(probs)))
