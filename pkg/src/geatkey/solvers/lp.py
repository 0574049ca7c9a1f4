"""Dense LPs with duals, and the greedy closed-form solution of the Delta_com LP."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

from .sdp import SdpSolution


def solve_lp(objective, eq_constraints=None, ineq_constraints=None, bounds=None,
             maximize: bool = False) -> SdpSolution:
    """Minimize (or maximize) ``objective . x``.

    Parameters
    ----------
    objective : array_like, shape (n,)
    eq_constraints : tuple (A_eq, b_eq), optional
    ineq_constraints : tuple (A_ub, b_ub), optional
        Rows read ``A_ub @ x <= b_ub``.
    bounds : sequence of (lo, hi), optional
        Defaults to x >= 0, as in linprog.

    Returns
    -------
    SdpSolution
        ``scalar_values`` holds x.  ``dual_vector`` stacks the equality duals
        and then the inequality duals, with the Lagrangian of the minimization
        form adding ``dual * (lhs - rhs)``.
    """
    c = np.asarray(objective, dtype=float)
    sign = -1.0 if maximize else 1.0
    a_eq, b_eq = eq_constraints if eq_constraints is not None else (None, None)
    a_ub, b_ub = ineq_constraints if ineq_constraints is not None else (None, None)
    res = linprog(sign * c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=bounds if bounds is not None else (0, None), method="highs")
    if res.status == 2:
        return SdpSolution([], np.zeros(c.size), np.zeros(0), "infeasible", np.inf,
                           np.nan, -np.inf, res.message)
    if res.status == 3:
        return SdpSolution([], np.zeros(c.size), np.zeros(0), "unbounded", np.inf,
                           -sign * np.inf, -np.inf, res.message)
    if res.status != 0:
        return SdpSolution([], np.zeros(c.size), np.zeros(0), "numerical-failure", np.inf,
                           np.nan, -np.inf, res.message)
    # HiGHS marginals are d(objective)/d(rhs); the Lagrangian multiplier is minus that
    duals = []
    if a_eq is not None:
        duals.append(-res.eqlin.marginals)
    if a_ub is not None:
        duals.append(-res.ineqlin.marginals)
    duals = np.concatenate(duals) if duals else np.zeros(0)
    value = float(c @ res.x)
    return SdpSolution([], res.x, duals, "optimal", 0.0, value, value, res.message)


def delta_com_greedy(f_bar, t_low, t_upp) -> float:
    """sup f_bar . v  subject to  -t_low <= v <= t_upp,  sum(v) = 0.

    Start every entry at the extreme favoured by the sign of its coefficient,
    then restore sum(v) = 0 by moving the entries whose coefficients cost the
    least per unit of movement.
    """
    f = np.asarray(f_bar, dtype=float)
    lo = -np.asarray(t_low, dtype=float)
    hi = np.asarray(t_upp, dtype=float)
    pos = f >= 0
    v = np.where(pos, hi, lo)
    excess = v.sum()
    if excess > 0:
        # lower the nonnegative-coefficient entries, cheapest first
        for c in np.flatnonzero(pos)[np.argsort(f[pos], kind="stable")]:
            step = min(excess, v[c] - lo[c])
            v[c] -= step
            excess -= step
            if excess <= 0:
                break
    elif excess < 0:
        deficit = -excess
        neg = np.flatnonzero(~pos)
        for c in neg[np.argsort(np.abs(f[neg]), kind="stable")]:
            step = min(deficit, hi[c] - v[c])
            v[c] += step
            deficit -= step
            if deficit <= 0:
                break
    return float(f @ v)
