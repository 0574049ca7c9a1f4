"""Closed-form finite-size terms of the key-length bound.

Covers the conversion of a crossover gradient g (defined on test-round
statistics) into the min-tradeoff gradient f over the full alphabet with the
"no test" symbol appended last, the variance term, K(alpha), the
security-parameter split, error-correction cost, the key length itself and
the Renyi/von Neumann conversion bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2.0)
DEFAULT_F_EC = 1.16


@dataclass(frozen=True)
class CrossoverGradient:
    """Gradient g of an affine crossover function over test outcomes (bits)."""

    g: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "g", np.asarray(self.g, dtype=float).ravel())

    @property
    def max_g(self) -> float:
        return float(np.max(self.g))

    @property
    def min_g(self) -> float:
        return float(np.min(self.g))

    def f_gradient(self, gamma: float) -> np.ndarray:
        """(1/gamma) (g, max g); the last entry belongs to the no-test symbol."""
        _check_gamma(gamma)
        return np.append(self.g, self.max_g) / gamma

    def f_range(self, gamma: float) -> float:
        """Upper bound (max g - min g)/gamma on Max(f) - Min_Q(f)."""
        return (self.max_g - self.min_g) / gamma


@dataclass(frozen=True)
class FiniteSizeBudget:
    n: float
    gamma: float
    alpha: float
    eps_secure: float
    eps_PA: float
    eps_EV: float
    f_EC: float = DEFAULT_F_EC
    d_A: int = 2
    kappa: int = 1

    def __post_init__(self):
        if not 1 < self.alpha < 1.5:
            raise ValueError("alpha must lie in (1, 3/2)")
        if abs(self.eps_PA + self.eps_EV - self.eps_secure) > 1e-15 * self.eps_secure:
            raise ValueError("eps_PA + eps_EV must equal eps_secure")

    @classmethod
    def with_optimal_split(cls, n, gamma, alpha, eps_secure, **kw) -> "FiniteSizeBudget":
        pa, ev = epsilon_split(eps_secure, alpha)
        return cls(n, gamma, alpha, eps_secure, pa, ev, **kw)


def _check_gamma(gamma):
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")


def crossover_to_f(g, gamma: float, k_g: float = 0.0):
    """Min-tradeoff gradient and its values on point masses.

    Parameters
    ----------
    g : CrossoverGradient or array_like
    gamma : float
        Test probability.
    k_g : float
        Constant term of the affine crossover function g(q) = g.q + k_g.

    Returns
    -------
    f_gradient : numpy.ndarray
        (1/gamma)(g, max g).
    f_values : numpy.ndarray
        f(delta_c) = g(delta_c)/gamma + (1 - 1/gamma) Max(g) for test symbols,
        and Max(g) for the no-test symbol.
    """
    g = g if isinstance(g, CrossoverGradient) else CrossoverGradient(g)
    _check_gamma(gamma)
    top = g.max_g + k_g
    vals = (g.g + k_g) / gamma + (1 - 1 / gamma) * top
    return g.f_gradient(gamma), np.append(vals, top)


def var_tilde(q, g, gamma: float, d_A: int = 2, kappa: int = 1) -> float:
    """(log(1+2 d_A^kappa) + sqrt(2 + Var))^2 with Var expressed through q and g."""
    return (math.log2(1 + 2 * d_A ** kappa) + math.sqrt(2 + inner_variance(q, g, gamma))) ** 2


def inner_variance(q, g, gamma: float) -> float:
    """sum_c q_c (max g - g_c)^2 / gamma - (max g - g.q)^2."""
    g = g.g if isinstance(g, CrossoverGradient) else np.asarray(g, dtype=float)
    q = np.asarray(q, dtype=float)
    top = np.max(g)
    return float(q @ (top - g) ** 2 / gamma - (top - g @ q) ** 2)


def var_tilde_grad(q, g, gamma: float, d_A: int = 2, kappa: int = 1):
    """Value and gradient of var_tilde with respect to q."""
    g = g.g if isinstance(g, CrossoverGradient) else np.asarray(g, dtype=float)
    q = np.asarray(q, dtype=float)
    top = np.max(g)
    u = max(2 + float(q @ (top - g) ** 2 / gamma - (top - g @ q) ** 2), 1e-300)
    root = math.sqrt(u)
    a = math.log2(1 + 2 * d_A ** kappa)
    du = (top - g) ** 2 / gamma + 2 * (top - g @ q) * g
    return (a + root) ** 2, (a + root) / root * du


def var_tilde_hess(q, g, gamma: float, d_A: int = 2, kappa: int = 1) -> np.ndarray:
    """Hessian of var_tilde with respect to q (negative semidefinite)."""
    g = g.g if isinstance(g, CrossoverGradient) else np.asarray(g, dtype=float)
    q = np.asarray(q, dtype=float)
    top = np.max(g)
    u = max(2 + float(q @ (top - g) ** 2 / gamma - (top - g @ q) ** 2), 1e-300)
    a = math.log2(1 + 2 * d_A ** kappa)
    du = (top - g) ** 2 / gamma + 2 * (top - g @ q) * g
    return -2 * (1 + a / math.sqrt(u)) * np.outer(g, g) - a / (2 * u ** 1.5) * np.outer(du, du)


def k_alpha(alpha: float, d_A: int = 2, kappa: int = 1, f_max_minus_min: float = 0.0) -> float:
    """K(alpha) with Max(f) - Min_Q(f) supplied by the caller."""
    if not 1 < alpha < 1.5:
        raise ValueError("alpha must lie in (1, 3/2)")
    if f_max_minus_min < 0:
        raise ValueError("f_max_minus_min must be nonnegative")
    x = kappa * math.log2(d_A) + f_max_minus_min
    pre = (2 - alpha) ** 3 / (6 * (3 - 2 * alpha) ** 3 * LN2)
    # ln(2^x + e^2) evaluated without overflow
    log_term = x * LN2 + math.log1p(math.exp(2 - x * LN2)) if x * LN2 > 2 else \
        math.log(2 ** x + math.e ** 2)
    expo = (alpha - 1) / (2 - alpha) * x * LN2
    if expo > 700:
        return math.inf
    return pre * math.exp(expo) * log_term ** 3


def k_alpha_term(alpha: float, k: float) -> float:
    """Per-round penalty ((alpha-1)/(2-alpha))^2 K(alpha)."""
    return ((alpha - 1) / (2 - alpha)) ** 2 * k


def epsilon_split(eps_secure: float, alpha: float) -> tuple[float, float]:
    """Optimal (eps_PA, eps_EV) for the fixed total eps_secure.

    >>> epsilon_split(1e-8, 1.5)
    (7.5e-09, 2.5e-09)
    """
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    pa = alpha / (2 * alpha - 1) * eps_secure
    return pa, eps_secure - pa


def split_cost(eps_secure: float, eps_pa: float, alpha: float) -> float:
    """alpha/(alpha-1) log(1/eps_PA) + log(2/(eps - eps_PA)), the split objective."""
    return alpha / (alpha - 1) * math.log2(1 / eps_pa) + math.log2(2 / (eps_secure - eps_pa))


def lambda_ec(n: float, f_EC: float, h_hon: float) -> float:
    """Error-correction leakage n f_EC h_hon, h_hon = (1-gamma)^2 p_det H(S|Y;kept)."""
    if f_EC < 1:
        raise ValueError("f_EC must be at least 1")
    return n * f_EC * h_hon


def key_length_raw(budget: FiniteSizeBudget, first_order: float, delta_com: float,
                   k_alpha_term: float, lambda_ec: float) -> float:
    """Unclipped key length; ``k_alpha_term`` is ((alpha-1)/(2-alpha))^2 K(alpha)."""
    n, a = budget.n, budget.alpha
    return (n * (first_order - delta_com) - n * k_alpha_term - lambda_ec
            - math.ceil(math.log2(1 / budget.eps_EV))
            - a / (a - 1) * math.log2(1 / budget.eps_PA) + 2)


def key_length(budget: FiniteSizeBudget, first_order: float, delta_com: float,
               k_alpha_term: float, lambda_ec: float) -> float:
    return max(0.0, key_length_raw(budget, first_order, delta_com, k_alpha_term, lambda_ec))


def delta_alpha(alpha: float, dim_c: int) -> float:
    return (alpha - 1) / alpha * LN2 / 2 * math.log2(dim_c)


def crude_k_tilde(alpha: float, dim_s: int, kappa: int = 1) -> float:
    """Dimension-only stand-in for the second-order constant of the elaborate bound.

    Same shape as K(alpha) with the tradeoff range set to zero.
    """
    return k_alpha(alpha, dim_s, kappa, 0.0)


def renyi_vn_bounds(h_vn: float, alpha: float, dim_S: int, kappa: int = 1,
                    variant: str = "simple", w: float = 1.0, mix_variant: str = "none",
                    k_tilde: float | None = None, dim_C: int | None = None) -> float:
    """Lower bound on a Renyi conditional entropy from a von Neumann one.

    variant
        ``"simple"``: h - (alpha-1) log^2(1 + 2 dim_S), for
        alpha < 1 + 1/log(1 + 2 dim_S).
        ``"elaborate"``: h - (alpha-1)(ln2/2) log^2(1 + 2 dim_S^kappa)
        - k_tilde (alpha-1)^2, for alpha in (1, 2).
    mix_variant
        ``"none"`` bounds the entropy of the state itself (``w`` ignored).
        ``"eq_approxlin"`` applies the factor (1 - Delta_alpha) w to the
        converted bound of the weight-``w`` component; ``"eq_approxlin2"``
        the sharper factor 1 - (1-w) Delta - 2 w^2 Delta^2, valid for
        alpha <= 1 + 2/ln(dim_C).  ``dim_C`` defaults to ``dim_S``.  Negative
        converted bounds are raised to zero before the factor is applied.
    """
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    if not 0 <= w <= 1:
        raise ValueError("w must lie in [0, 1]")
    if variant == "simple":
        top = 1 + 1 / math.log2(1 + 2 * dim_S)
        if alpha >= top:
            raise ValueError(f"simple bound requires alpha < 1 + 1/log(1+2 dim_S) = {top:.6g}")
        corr = (alpha - 1) * math.log2(1 + 2 * dim_S) ** 2
    elif variant == "elaborate":
        if alpha >= 2:
            raise ValueError("elaborate bound requires alpha in (1, 2)")
        if k_tilde is None:
            if alpha >= 1.5:
                raise ValueError("default k_tilde requires alpha in (1, 3/2)")
            k_tilde = crude_k_tilde(alpha, dim_S, kappa)
        corr = ((alpha - 1) * LN2 / 2 * math.log2(1 + 2 * dim_S ** kappa) ** 2
                + k_tilde * (alpha - 1) ** 2)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    base = h_vn - corr
    if mix_variant == "none":
        return base
    # C is classical here, so its entropy is nonnegative
    base = max(base, 0.0)
    dim_c = dim_S if dim_C is None else dim_C
    d = delta_alpha(alpha, dim_c)
    if mix_variant == "eq_approxlin":
        factor = 1 - d
    elif mix_variant == "eq_approxlin2":
        if dim_c > 1 and alpha > 1 + 2 / math.log(dim_c):
            raise ValueError("sharper mixture bound requires alpha <= 1 + 2/ln(dim_C)")
        factor = 1 - (1 - w) * d - 2 * w ** 2 * d ** 2
    else:
        raise ValueError(f"unknown mix_variant {mix_variant!r}")
    return factor * w * base


def mixture_factor_plain(alpha: float, dim_c: int, w: float, sharper: bool = False) -> float:
    """Factor in H_alpha(mixture) >= factor * w * H_alpha(component), unoptimized entropy."""
    d = delta_alpha(alpha, dim_c)
    if sharper:
        return 1 - (1 - w) * alpha * d - 2 * w ** 2 * alpha ** 2 * d ** 2
    return 1 - alpha * d
