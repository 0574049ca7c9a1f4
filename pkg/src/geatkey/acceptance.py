"""Entrywise acceptance sets, binomial completeness bounds and the Delta_com penalty.

An acceptance set accepts an observed frequency vector when every entry lies in
[p_c - t_low_c, p_c + t_upp_c].  Under the honest IID behaviour each count is
binomial, so a union bound over symbols bounds the honest abort probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import binom

from .solvers.lp import delta_com_greedy

# below this distance from 0 or 1 the incomplete-beta route loses precision
_EXTREME_P = 1e-12


@dataclass(frozen=True)
class AcceptanceSet:
    """Entrywise tolerances around the honest distribution (last entry: no-test symbol)."""

    p_hon: np.ndarray
    t_low: np.ndarray
    t_upp: np.ndarray
    within_budget: bool = True

    def __post_init__(self):
        p = np.asarray(self.p_hon, dtype=float).ravel()
        lo = np.asarray(self.t_low, dtype=float).ravel()
        hi = np.asarray(self.t_upp, dtype=float).ravel()
        if not (p.shape == lo.shape == hi.shape):
            raise ValueError("p_hon and tolerances must have equal length")
        if np.any(p < -1e-15) or abs(p.sum() - 1) > 1e-9:
            raise ValueError("p_hon must be a probability vector")
        if np.any(lo < 0) or np.any(hi < 0):
            raise ValueError("tolerances must be nonnegative")
        object.__setattr__(self, "p_hon", p)
        object.__setattr__(self, "t_low", lo)
        object.__setattr__(self, "t_upp", hi)

    @classmethod
    def unique(cls, p_hon) -> "AcceptanceSet":
        p = np.asarray(p_hon, dtype=float)
        return cls(p, np.zeros_like(p), np.zeros_like(p))

    def accepts(self, freq) -> bool:
        freq = np.asarray(freq, dtype=float)
        return bool(np.all(freq >= self.p_hon - self.t_low)
                    and np.all(freq <= self.p_hon + self.t_upp))


def honest_distribution(q_test, gamma: float) -> np.ndarray:
    """Full-alphabet honest distribution: gamma q on test symbols, 1 - gamma on the rest."""
    return np.append(gamma * np.asarray(q_test, dtype=float), 1 - gamma)


def _log_tail_sum(n: int, p: float, ks: range) -> float:
    if len(ks) == 0:
        return -np.inf
    logs = binom.logpmf(np.arange(ks.start, ks.stop), n, p)
    return float(logsumexp(logs))


def binom_tail(n: int, p: float, lo: float, hi: float) -> float:
    """Pr[X/n outside [lo, hi]] for X ~ Binomial(n, p).

    >>> binom_tail(2, 0.5, 0.5, 0.5)
    0.5
    """
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if lo > hi:
        raise ValueError("need lo <= hi")
    n = int(n)
    k_lo = math.ceil(n * lo)  # smallest accepted count
    k_hi = math.floor(n * hi)  # largest accepted count
    if k_lo > k_hi:
        return 1.0
    if p == 0 or p == 1:
        x = 0 if p == 0 else n
        return 0.0 if k_lo <= x <= k_hi else 1.0
    below = binom.cdf(k_lo - 1, n, p) if k_lo > 0 else 0.0
    above = binom.sf(k_hi, n, p) if k_hi < n else 0.0
    if min(p, 1 - p) < _EXTREME_P and n < 10 ** 7:
        # direct log-space summation of the pmf
        below = math.exp(_log_tail_sum(n, p, range(0, max(k_lo, 0))))
        above = math.exp(_log_tail_sum(n, p, range(min(k_hi, n) + 1, n + 1)))
    return float(min(1.0, below + above))


def eps_com_at(n: int, acc: AcceptanceSet) -> float:
    """Union bound on the honest probability of failing the acceptance test."""
    return float(sum(binom_tail(n, p, p - lo, p + hi)
                     for p, lo, hi in zip(acc.p_hon, acc.t_low, acc.t_upp)))


def delta_com(f_gradient, acc: AcceptanceSet) -> float:
    """sup over accepted distributions of -f.(p_acc - p_hon).

    Tolerances are cut to the probability simplex first, so p_acc stays in [0, 1].
    """
    f = np.asarray(f_gradient, dtype=float)
    p = acc.p_hon
    lo = np.minimum(acc.t_low, p)
    hi = np.minimum(acc.t_upp, 1 - p)
    return delta_com_greedy(-f, lo, hi)


def _upper_tolerance(n: int, p: float, eps: float) -> float:
    """Smallest t with Pr[X/n > p + t] <= eps."""
    if eps <= 0:
        return 1 - p
    k = int(binom.isf(eps, n, p))
    while k > 0 and binom.sf(k - 1, n, p) <= eps:
        k -= 1
    while k < n and binom.sf(k, n, p) > eps:
        k += 1
    return max(0.0, min(1 - p, k / n - p))


def _lower_tolerance(n: int, p: float, eps: float) -> float:
    """Smallest t with Pr[X/n < p - t] <= eps."""
    if eps <= 0:
        return p
    # largest k with cdf(k - 1) <= eps
    k = int(binom.ppf(eps, n, p))
    while k > 0 and binom.cdf(k - 1, n, p) > eps:
        k -= 1
    while k < n and binom.cdf(k, n, p) <= eps:
        k += 1
    return max(0.0, min(p, p - k / n))


def _tolerances(n, p, f, eps):
    """Invert each symbol's tail budget; sides that cannot raise Delta_com are opened fully."""
    lo_free = f <= f.min()  # lowering these entries never helps the adversary
    hi_free = f >= f.max()
    t_low, t_upp = np.empty_like(p), np.empty_like(p)
    for c in range(p.size):
        if lo_free[c] and hi_free[c]:
            t_low[c], t_upp[c] = p[c], 1 - p[c]
            continue
        if lo_free[c]:
            split = (0.0, eps[c])
        elif hi_free[c]:
            split = (eps[c], 0.0)
        else:
            split = (eps[c] / 2, eps[c] / 2)
        t_low[c] = p[c] if split[0] == 0 else _lower_tolerance(n, p[c], split[0])
        t_upp[c] = 1 - p[c] if split[1] == 0 else _upper_tolerance(n, p[c], split[1])
    return t_low, t_upp


def optimize_tolerances(n: int, p_hon, f_gradient, eps_at_budget: float,
                        floor: float = 1e-3) -> AcceptanceSet:
    """Heuristic tolerances minimizing Delta_com under eps_com_at <= eps_at_budget.

    The budget is shared across symbols in proportion to
    |f_c - mean f| sqrt(p_c (1 - p_c)) (plus a small floor), each share is
    inverted into tolerances through the exact binomial tail, and one round of
    coordinate descent rescales individual shares.
    """
    if not 0 < eps_at_budget < 1:
        raise ValueError("eps_at_budget must lie in (0, 1)")
    p = np.asarray(p_hon, dtype=float)
    f = np.asarray(f_gradient, dtype=float)
    n = int(n)
    w = np.abs(f - f.mean()) * np.sqrt(p * (1 - p))
    w = w + floor * (w.max() if w.max() > 0 else 1.0)
    shares = w / w.sum()

    def evaluate(sh):
        t_low, t_upp = _tolerances(n, p, f, eps_at_budget * sh)
        acc = AcceptanceSet(p, t_low, t_upp)
        return delta_com(f, acc), acc

    best, acc = evaluate(shares)
    for c in range(p.size):
        for factor in (0.5, 2.0):
            trial = shares.copy()
            trial[c] *= factor
            trial /= trial.sum()
            val, cand = evaluate(trial)
            if val < best:
                best, acc, shares = val, cand, trial
    ok = eps_com_at(n, acc) <= eps_at_budget * (1 + 1e-12)
    return AcceptanceSet(acc.p_hon, acc.t_low, acc.t_upp, within_budget=ok)
