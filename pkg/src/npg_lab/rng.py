"""Deterministic random streams.

Every run owns a Philox (counter-based) generator keyed by ``(seed, run_id)``,
so results never depend on which worker executed a run or in what order.
"""

import numpy as np


def make_rng(seed, run_id=0):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(run_id)])))


def categorical(probs, u):
    """Inverse-CDF draw from ``probs`` using one uniform ``u`` in [0, 1).

    Falls back to the last positive-probability index when rounding leaves the
    cumulative sum just below ``u``.
    """
    acc = 0.0
    last = 0
    for i, p in enumerate(probs):
        if p > 0.0:
            last = i
        acc += p
        if u < acc:
            return i
    return last
