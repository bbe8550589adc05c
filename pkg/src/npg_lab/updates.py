"""Importance-sampling estimators and the bandit NPG update rules."""

import enum
from dataclasses import dataclass, field

import numpy as np

from npg_lab.errors import NumericalFailure
from npg_lab.policy import PolicyParams, softmax
from npg_lab.rng import categorical


class EstimatorKind(enum.Enum):
    SIMPLIFIED_IS = "simplified"  # observe the true mean r(a_t)
    STOCHASTIC_IS = "stochastic"  # observe a draw x_t ~ R_{a_t}


@dataclass(frozen=True)
class ConstantStep:
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    def __call__(self, pi, action, r, baseline_value):
        return self.eta


@dataclass(frozen=True)
class AdaptiveStep:
    """``eta_t = scale * pi(a_t) |r(a_t) - pi^T r| / denominator``.

    With ``scale=1`` and the default denominator ``8 r_max^2`` this is the step
    size under which the stochastic-reward progress bound holds. The simulation
    plateau-escape preset instead uses ``scale=0.5, denominator=9``.
    """

    r_max: float
    scale: float = 1.0
    denominator: float = None

    def __post_init__(self):
        if not (self.r_max > 0 and self.scale > 0):
            raise ValueError("r_max and scale must be positive")
        if self.denominator is not None and not self.denominator > 0:
            raise ValueError("denominator must be positive")

    @property
    def denom(self):
        return 8.0 * self.r_max**2 if self.denominator is None else self.denominator

    def __call__(self, pi, action, r, baseline_value):
        return self.scale * pi[action] * abs(r[action] - baseline_value) / self.denom


@dataclass(frozen=True)
class UpdateConfig:
    estimator: EstimatorKind = EstimatorKind.SIMPLIFIED_IS
    baseline: bool = True
    step: object = field(default_factory=lambda: ConstantStep(0.1))
    iterations: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if isinstance(self.step, AdaptiveStep) and not self.baseline:
            raise ValueError("the adaptive step size is defined relative to the value baseline")


@dataclass(frozen=True)
class StepTrace:
    action: int
    observed: float
    eta: float
    expected_reward: float


def is_estimate(pi, sampled_action, observed):
    """On-policy importance-sampling estimate: all mass on the sampled action."""
    est = np.zeros(len(pi))
    est[sampled_action] = observed / pi[sampled_action]
    return est


def baseline_correction(pi, sampled_action, b):
    """``(1{a = a_t} / pi(a) - 1) * b``; has zero mean under ``a_t ~ pi``."""
    corr = np.full(len(pi), -float(b))
    corr[sampled_action] += b / pi[sampled_action]
    return corr


def dense_update(logits, pi, sampled_action, observed, eta, r, baseline):
    """Dense update of the full logit vector, with or without the baseline correction."""
    est = is_estimate(pi, sampled_action, observed)
    if baseline:
        est = est - baseline_correction(pi, sampled_action, float(np.dot(pi, r)))
    return logits + eta * est


def sparse_update(logits, pi, sampled_action, observed, eta, b):
    """Sparse update: only the sampled logit moves, by ``eta (x - b) / pi(a_t)``."""
    new = np.array(logits, dtype=np.float64)
    new[sampled_action] += eta * (observed - b) / pi[sampled_action]
    return new


def _apply(params, pi, inst, cfg, action, observed):
    r = inst.r
    b = float(np.dot(pi, r))
    eta = cfg.step(pi, action, r, b)
    theta = sparse_update(params.logits[0], pi, action, observed, eta, b if cfg.baseline else 0.0)
    if not np.all(np.isfinite(theta)):
        raise NumericalFailure("non-finite logit after bandit update", action=action, eta=eta)
    return PolicyParams(theta - theta.mean()), StepTrace(action, observed, eta, b)


def step_bandit(params, inst, cfg, rng):
    """One on-policy update. Draws two uniforms: action first, then reward outcome.

    Without a baseline the plain estimate is already sparse, so both cases move
    only the sampled logit before recentering.
    """
    pi = softmax(params)
    u_action, u_reward = rng.random(2)
    action = categorical(pi, u_action)
    if cfg.estimator is EstimatorKind.STOCHASTIC_IS:
        observed = inst.dists[action].sample(u_reward)
    else:
        observed = float(inst.r[action])
    return _apply(params, pi, inst, cfg, action, observed)


def step_bandit_fixed_action(params, inst, cfg, forced_action):
    """Same update with the sampled action pinned to ``forced_action`` (true means observed)."""
    if cfg.estimator is not EstimatorKind.SIMPLIFIED_IS:
        raise ValueError("fixed-action steps use the simplified (true-mean) estimator")
    pi = softmax(params)
    new, _ = _apply(params, pi, inst, cfg, forced_action, float(inst.r[forced_action]))
    return new
