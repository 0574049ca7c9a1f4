"""Independent reference computations shared by several test modules."""

import math

import numpy as np
from scipy.optimize import minimize_scalar

from geatkey.geat import crossover_to_f
from geatkey.mintradeoff import t_hat_conj


def direct_variance(q, g, gamma):
    """Variance of f under the full-alphabet distribution (gamma q, 1 - gamma)."""
    _, f_vals = crossover_to_f(g, gamma)
    p = np.append(gamma * np.asarray(q), 1 - gamma)
    return float(p @ f_vals ** 2 - (p @ f_vals) ** 2)


def biconjugate(g, phi):
    """max_lam g.lam - T*(lam) over sum-zero lam, by a numerical search over the l1 radius.

    For a fixed radius r = ||lam||_1 / 2 the best lam puts +r on argmax g and
    -r on argmin g.  The concave function of r is scanned on a grid and then
    polished with a bounded scalar search.
    """
    g = np.asarray(g, dtype=float)
    hi, lo = int(np.argmax(g)), int(np.argmin(g))
    if hi == lo or g[hi] == g[lo]:
        return 0.0

    def value(r):
        lam = np.zeros_like(g)
        lam[hi], lam[lo] = r, -r
        return float(g @ lam) - t_hat_conj(lam, phi)

    top = phi.phi1 + 8 * phi.phi0 * (g[hi] - g[lo]) + 1.0
    radii = np.linspace(0, top, 2001)
    vals = [value(r) for r in radii]
    k = int(np.argmax(vals))
    a, b = radii[max(k - 1, 0)], radii[min(k + 1, len(radii) - 1)]
    res = minimize_scalar(lambda r: -value(r), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-14 * max(1.0, b)})
    return max(vals[k], -res.fun)


def classical_renyi_cond_entropy(p_cq, alpha):
    """H_alpha(C|Q) for a joint distribution p(c, q), conditioning on p(q)."""
    p_cq = np.asarray(p_cq, dtype=float)
    p_q = p_cq.sum(axis=0)
    mask = p_cq > 0
    total = np.sum(p_cq[mask] ** alpha * np.broadcast_to(p_q, p_cq.shape)[mask] ** (1 - alpha))
    return math.log2(total) / (1 - alpha)


def classical_cond_entropy(p_cq):
    p_cq = np.asarray(p_cq, dtype=float)
    p_q = p_cq.sum(axis=0)
    h_cq = -sum(x * math.log2(x) for x in p_cq.ravel() if x > 0)
    h_q = -sum(x * math.log2(x) for x in p_q if x > 0)
    return h_cq - h_q
