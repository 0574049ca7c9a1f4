"""Frank-Wolfe with away steps and certified lower bounds.

The feasible set is only reached through a linear-minimization oracle (LMO).
For convex F, every oracle call yields the affine bound

    min F >= F(x_k) + min_v <grad F(x_k), v - x_k>,

and when the oracle also reports a certified lower bound on its own minimum
(e.g. from SDP duality) the resulting bound is rigorous.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.optimize import brentq

log = logging.getLogger(__name__)


@dataclass
class LmoResult:
    """Answer of a linear-minimization oracle for direction ``grad``.

    ``value`` is <grad, vertex>; ``lower_bound`` is a certified lower bound on
    min_v <grad, v> over the feasible set.
    """

    vertex: np.ndarray
    value: float
    lower_bound: float
    duals: Any = None
    ok: bool = True
    gap: float = 0.0


@dataclass
class FrankWolfeConfig:
    gap_tol: float = 1e-6
    max_iter: int = 300
    variant: str = "away"  # "away", "pairwise" or "vanilla"
    line_search_tol: float = 1e-13
    atom_merge_tol: float = 1e-10
    # callers with second-order information may propose Newton-type steps
    local_steps: bool = True
    stall_window: int = 5
    # stop once the certified bound reaches this value (status "target")
    bound_target: float = np.inf


@dataclass
class FrankWolfeResult:
    best_iterate: np.ndarray
    best_value: float
    certified_lower_bound: float
    final_subproblem_duals: Any
    iterations: int
    gap_history: list = field(default_factory=list)
    status: str = "converged"
    lmo_failures: int = 0
    max_sdp_gap: float = 0.0
    # largest oracle gap relative to 1 + |oracle value|
    max_sdp_rel_gap: float = 0.0

    @property
    def gap(self) -> float:
        return self.best_value - self.certified_lower_bound


class _ActiveSet:
    def __init__(self, x0, tol):
        self.atoms = [np.array(x0, dtype=float)]
        self.weights = [1.0]
        self.tol = tol

    def add(self, v, step):
        self.weights = [w * (1 - step) for w in self.weights]
        for i, a in enumerate(self.atoms):
            if np.max(np.abs(a - v)) <= self.tol:
                self.weights[i] += step
                break
        else:
            self.atoms.append(np.array(v, dtype=float))
            self.weights.append(step)
        self._prune()

    def shift(self, i_from, i_to, amount):
        self.weights[i_from] -= amount
        self.weights[i_to] += amount
        self._prune()

    def away(self, i, step):
        # x <- x + step (x - a_i)
        self.weights = [w * (1 + step) for w in self.weights]
        self.weights[i] -= step
        self._prune()

    def _prune(self):
        keep = [i for i, w in enumerate(self.weights) if w > 1e-14]
        self.atoms = [self.atoms[i] for i in keep]
        total = sum(self.weights[i] for i in keep)
        self.weights = [self.weights[i] / total for i in keep]

    def point(self):
        return np.sum([w * a for w, a in zip(self.weights, self.atoms)], axis=0)

    def index_of(self, v):
        for i, a in enumerate(self.atoms):
            if np.max(np.abs(a - v)) <= self.tol:
                return i
        return None


def _line_search(fun, x, d, t_max, tol):
    """Minimize the convex function t -> F(x + t d) on [0, t_max]."""

    def slope(t):
        return float(fun(x + t * d)[1] @ d)

    s0 = slope(0.0)
    if s0 >= 0:
        return 0.0
    s1 = slope(t_max)
    if s1 <= 0:
        return t_max
    return brentq(slope, 0.0, t_max, xtol=tol, rtol=4 * np.finfo(float).eps)


def _stalled(history, window):
    # the certified gap failed to halve over the last ``window`` iterations
    return len(history) > window and history[-1] > 0.5 * history[-1 - window]


def _try_local(fun, local_step, x, f, g, vertex, cfg):
    """``(y, t)`` for the segment towards the local proposal, if it beats the FW step."""
    y = local_step(x, g)
    if y is None:
        return None
    d = y - x
    if float(g @ d) >= 0 or not np.any(d):
        return None
    t = _line_search(fun, x, d, 1.0, cfg.line_search_tol)
    f_local = fun(x + t * d)[0]
    # compare with the plain Frank-Wolfe step towards the oracle vertex
    dv = vertex - x
    f_fw = fun(x + _line_search(fun, x, dv, 1.0, cfg.line_search_tol) * dv)[0] \
        if float(g @ dv) < 0 else f
    return (y, t) if t > 0 and f_local < min(f, f_fw) else None


def frank_wolfe(objective_and_gradient: Callable, lmo: Callable, x0,
                config: FrankWolfeConfig | None = None,
                local_step: Callable | None = None) -> FrankWolfeResult:
    """Minimize a convex differentiable F over a compact convex set.

    Parameters
    ----------
    objective_and_gradient : callable
        ``x -> (F(x), grad F(x))``.
    lmo : callable
        ``grad -> LmoResult``.
    x0 : numpy.ndarray
        Feasible starting point (treated as the first atom).
    config : FrankWolfeConfig
    local_step : callable, optional
        ``(x, grad) -> y`` proposing a feasible point (e.g. a Newton-type QP
        step).  It is consulted only once the certified gap has stopped
        halving over ``config.stall_window`` iterations.  When the segment towards ``y`` decreases F more than the
        Frank-Wolfe step would, the proposal is added to the active set as an
        extra atom.  Bounds still come from the oracle alone.

    Returns
    -------
    FrankWolfeResult
        ``certified_lower_bound`` is the best affine bound over all iterations
        and ``gap_history`` the running certified gap (best value minus best
        bound), which is nonincreasing by construction.
    """
    cfg = config or FrankWolfeConfig()
    active = _ActiveSet(x0, cfg.atom_merge_tol)
    x = active.point()
    best_x, best_f = x.copy(), np.inf
    best_lb, best_duals = -np.inf, None
    history, failures, max_sdp_gap, max_rel = [], 0, 0.0, 0.0
    status = "max-iter"
    it = 0
    for it in range(1, cfg.max_iter + 1):
        f, g = objective_and_gradient(x)
        if f < best_f:
            best_f, best_x = f, x.copy()
        res = lmo(g)
        if res.vertex is None:
            failures += 1
            break
        if not res.ok:
            failures += 1
        max_sdp_gap = max(max_sdp_gap, res.gap)
        max_rel = max(max_rel, res.gap / (1 + abs(res.value)))
        lb = f + res.lower_bound - float(g @ x)
        if lb > best_lb:
            best_lb, best_duals = lb, res.duals
        history.append(best_f - best_lb)
        if best_f - best_lb <= cfg.gap_tol:
            status = "converged"
            break
        if best_lb >= cfg.bound_target:
            status = "target"
            break
        if local_step is not None and _stalled(history, cfg.stall_window):
            step = _try_local(objective_and_gradient, local_step, x, f, g, res.vertex, cfg)
            if step is not None:
                # the feasible proposal joins the active set like an oracle vertex
                active.add(*step)
                x = active.point()
                continue
        v = res.vertex
        gx = float(g @ x)
        fw_gap = gx - float(g @ v)
        d, t_max, mode, i_away = v - x, 1.0, "fw", None
        if cfg.variant != "vanilla" and len(active.atoms) > 1:
            scores = [float(g @ a) for a in active.atoms]
            i_away = int(np.argmax(scores))
            away_gap = scores[i_away] - gx
            w_a = active.weights[i_away]
            if cfg.variant == "pairwise":
                d, t_max, mode = v - active.atoms[i_away], w_a, "pairwise"
            elif away_gap > fw_gap:
                d, t_max, mode = x - active.atoms[i_away], w_a / (1 - w_a), "away"
        if float(g @ d) >= 0 or not np.any(d):
            # no descent direction available at this resolution
            status = "stalled"
            break
        t = _line_search(objective_and_gradient, x, d, t_max, cfg.line_search_tol)
        if mode == "fw":
            active.add(v, t)
        elif mode == "away":
            active.away(i_away, t)
        else:
            j = active.index_of(v)
            if j is None:
                active.atoms.append(np.array(v, dtype=float))
                active.weights.append(0.0)
                j = len(active.atoms) - 1
            active.shift(i_away, j, t)
        x = active.point()
    f, _ = objective_and_gradient(x)
    if f < best_f:
        best_f, best_x = f, x.copy()
    if failures and status != "converged":
        status = "lmo-failure"
    log.debug("frank_wolfe: %s after %d iterations, gap %.3e", status, it, best_f - best_lb)
    return FrankWolfeResult(best_x, best_f, best_lb, best_duals, it, history, status,
                            failures, max_sdp_gap, max_rel)
