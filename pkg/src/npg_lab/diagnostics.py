"""Rate and committal-exponent fits on recorded traces."""

import numpy as np

from npg_lab.errors import EmptyWindow, SaturatedTrace


def record_schedule(iterations, n_log=1000, dense=100):
    """Recorded iteration indices: every ``t <= dense``, then ``n_log`` log-spaced
    points, always including the final policy at ``iterations + 1``."""
    last = iterations + 1
    head = np.arange(1, min(dense, last) + 1)
    tail = np.geomspace(max(dense, 1), last, n_log) if last > dense else np.array([])
    t = np.unique(np.concatenate([head, np.round(tail).astype(np.int64), [last]]))
    return t.astype(np.int64)


def _linfit(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def _log_spaced_subset(t, n=400):
    """Indices of roughly log-uniform samples when ``t`` is denser than that."""
    if t.size <= n:
        return np.arange(t.size)
    targets = np.geomspace(t[0], t[-1], n)
    idx = np.searchsorted(t, targets)
    return np.unique(np.clip(idx, 0, t.size - 1))


def fit_rate_slope(t, gap, window):
    """Least-squares slope and r^2 of ``log(gap)`` against ``log(t)`` inside ``window``."""
    t = np.asarray(t, dtype=np.float64)
    gap = np.asarray(gap, dtype=np.float64)
    lo, hi = window
    mask = (t >= lo) & (t <= hi) & np.isfinite(gap)
    if mask.sum() < 2:
        raise EmptyWindow(f"fewer than two samples in window {window}")
    t, gap = t[mask], gap[mask]
    if np.any(gap <= 0):
        raise EmptyWindow("gaps must be positive inside the fitting window")
    keep = _log_spaced_subset(t)
    slope, _, r2 = _linfit(np.log(t[keep]), np.log(gap[keep]))
    return slope, r2


def fit_committal_exponent(t, complement, window=None, min_samples=50):
    """Decay exponent of ``1 - pi_t(a)`` under forced sampling.

    Returns ``(exponent, model)``. ``model`` is ``"superpolynomial"`` when
    ``log(1 - pi_t)`` is better explained as linear in ``t`` than in ``log t``;
    the exponent is then the (large) local log-log slope magnitude, reported for
    information only.
    """
    t = np.asarray(t, dtype=np.float64)
    comp = np.asarray(complement, dtype=np.float64)
    if window is not None:
        mask = (t >= window[0]) & (t <= window[1])
        t, comp = t[mask], comp[mask]
    zeros = np.flatnonzero(comp <= 0)
    if zeros.size:
        t, comp = t[: zeros[0]], comp[: zeros[0]]
        if t.size < min_samples:
            raise SaturatedTrace(f"complement hit 0 after only {t.size} samples")
    if t.size < 3:
        raise EmptyWindow("too few samples to fit")
    keep = _log_spaced_subset(t) if t[-1] / t[0] > 100 else np.arange(t.size)
    y = np.log(comp[keep])
    slope_poly, _, r2_poly = _linfit(np.log(t[keep]), y)
    _, _, r2_exp = _linfit(t[keep], y)
    model = "superpolynomial" if r2_exp > r2_poly else "polynomial"
    return -slope_poly, model
