"""One-state MDPs: mean rewards, bounded finite-support reward sampling, the K=20 benchmark."""

import json
from dataclasses import dataclass, field

import numpy as np

from npg_lab.errors import DegenerateInstance
from npg_lab.rng import categorical


@dataclass(frozen=True)
class RewardDistribution:
    """Finite-support reward law: ``values[j]`` is observed with ``probs[j]``."""

    values: tuple
    probs: tuple

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        if len(values) != len(probs) or not values:
            raise ValueError("support values and probabilities must be nonempty and aligned")
        if any(p <= 0 for p in probs):
            raise ValueError("support probabilities must be positive")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"support probabilities sum to {sum(probs)!r}, not 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def point(cls, value):
        return cls((value,), (1.0,))

    @classmethod
    def two_point(cls, low, high, p_high=0.5):
        return cls((low, high), (1.0 - p_high, p_high))

    @property
    def mean(self):
        return float(np.dot(self.values, self.probs))

    @property
    def max_abs(self):
        return max(abs(v) for v in self.values)

    def sample(self, u):
        return self.values[categorical(self.probs, u)]


@dataclass(frozen=True)
class BanditInstance:
    """K-armed instance with mean rewards ``r`` in [0, 1] and bounded reward laws."""

    r: np.ndarray
    dists: tuple
    r_max: float
    require_unique_optimum: bool = field(default=True, compare=False)

    def __post_init__(self):
        r = np.array(self.r, dtype=np.float64)
        r.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "dists", tuple(self.dists))
        if r.ndim != 1 or len(self.dists) != r.size:
            raise ValueError("need one reward distribution per action")
        if np.any(r < 0) or np.any(r > 1):
            raise ValueError("mean rewards must lie in [0, 1]")
        if self.r_max <= 0:
            raise ValueError("r_max must be positive")
        for a, d in enumerate(self.dists):
            if abs(d.mean - r[a]) > 1e-8 * max(1.0, d.max_abs):
                raise ValueError(f"action {a}: distribution mean {d.mean} != r[a] = {r[a]}")
            if d.max_abs > self.r_max:
                raise ValueError(f"action {a}: support value exceeds r_max={self.r_max}")
        if self.require_unique_optimum and np.sum(r == r.max()) > 1:
            raise DegenerateInstance("optimal action is not unique")

    @classmethod
    def deterministic(cls, r, r_max=1.0, require_unique_optimum=True):
        """Point-mass rewards at the means (the simplified-IS setting)."""
        r = np.asarray(r, dtype=np.float64)
        dists = [RewardDistribution.point(v) for v in r]
        return cls(r, dists, r_max, require_unique_optimum)

    @property
    def K(self):
        return self.r.size

    @property
    def best_action(self):
        return int(np.argmax(self.r))

    @property
    def gap(self):
        """Reward gap between the best and second-best mean."""
        s = np.sort(self.r)
        return float(s[-1] - s[-2])

    def support_arrays(self):
        """Padded ``(values, cumulative probs, lengths)`` arrays for compiled kernels."""
        width = max(len(d.values) for d in self.dists)
        vals = np.zeros((self.K, width))
        cum = np.ones((self.K, width))
        lens = np.zeros(self.K, dtype=np.int64)
        for a, d in enumerate(self.dists):
            n = len(d.values)
            vals[a, :n] = d.values
            cum[a, :n] = np.cumsum(d.probs)
            lens[a] = n
        return vals, cum, lens

    def to_json(self):
        return json.dumps(
            {
                "K": self.K,
                "r": self.r.tolist(),
                "dists": [[[v, p] for v, p in zip(d.values, d.probs)] for d in self.dists],
                "r_max": self.r_max,
            }
        )

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text) if isinstance(text, str) else text
        dists = [RewardDistribution([v for v, _ in d], [p for _, p in d]) for d in doc["dists"]]
        if len(dists) != doc["K"]:
            raise ValueError("K does not match the number of distributions")
        return cls(doc["r"], dists, doc["r_max"])


def sample_reward(inst, action, rng):
    return inst.dists[action].sample(rng.random())


def expected_reward(inst, pi):
    r = inst.r if isinstance(inst, BanditInstance) else np.asarray(inst)
    return float(np.dot(pi, r))


def suboptimality_gap(r, pi):
    """``max(r) - pi^T r`` summed term-by-term to avoid cancellation near the optimum."""
    r = np.asarray(r)
    return float(np.dot(pi, r.max() - r))


K20_MEAN_REWARDS = (
    0.96990985, 0.95071431, 0.86617615, 0.83244264,
    0.73199394, 0.70807258, 0.60111501, 0.59865848,
    0.52475643, 0.43194502, 0.37454012, 0.30424224,
    0.29122914, 0.21233911, 0.18340451, 0.18182497,
    0.15601864, 0.15599452, 0.05808361, 0.02058449,
)

K20_SUPPORTS = (
    (-2.03009015, 3.96990985), (-2.04928569, 3.95071431),
    (-2.13382385, 3.86617615), (-2.16755736, 3.83244264),
    (-2.26800606, 3.73199394), (-2.29192742, 3.70807258),
    (-2.39888499, 3.60111501), (-2.40134152, 3.59865848),
    (-2.47524357, 3.52475643), (-2.56805498, 3.43194502),
    (-2.62545988, 3.37454012), (-2.69575776, 3.30424224),
    (-2.70877086, 3.29122914), (-2.78766089, 3.21233911),
    (-2.81659549, 3.18340451), (-2.81817503, 3.18182497),
    (-2.84398136, 3.15601864), (-2.84400548, 3.15599452),
    (-2.94191639, 3.05808361), (-2.97941551, 3.02058449),
)


def k20_bandit_instance(r_max=4.0):
    """The K=20 instance with fair two-point reward laws (mean +/- 3) used in the plateau and rate experiments."""
    dists = [RewardDistribution.two_point(lo, hi, 0.5) for lo, hi in K20_SUPPORTS]
    return BanditInstance(np.array(K20_MEAN_REWARDS), dists, r_max)
