"""Choice of the crossover min-tradeoff gradient by convex duality.

The tradeoff between the first-order rate and the variance penalty is
approximated by the convex surrogate

    T(g) = phi0 (max g - min g)^2 + phi1 (max g - min g),

whose conjugate is s(||lam||_1 / 2) on sum-zero vectors.  Minimizing
W(J) + s(sum(sigma)/2) subject to |q_hon - Phi(J)| <= sigma entrywise with
Frank-Wolfe, the multipliers of the final linearized subproblem give the
gradient g*, and the linearization value is a certified lower bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geat import LN2, CrossoverGradient, var_tilde_grad, var_tilde_hess
from .problem import ProtocolProblem
from .solvers.frank_wolfe import FrankWolfeConfig, FrankWolfeResult, LmoResult, frank_wolfe
from .solvers.sdp import CompiledSdp


@dataclass(frozen=True)
class PhiConstants:
    phi0: float
    phi1: float
    phi2: float


def variance_coefficient(alpha: float) -> float:
    """((alpha-1)/(2-alpha)) (ln 2 / 2), the weight of the variance term."""
    return (alpha - 1) / (2 - alpha) * LN2 / 2


def phi_constants(alpha: float, gamma: float, d_A: int = 2, kappa: int = 1) -> PhiConstants:
    if not 1 < alpha < 1.5:
        raise ValueError("alpha must lie in (1, 3/2)")
    if not 0 < gamma < 1 + 1e-15:
        raise ValueError("gamma must lie in (0, 1]")
    c = variance_coefficient(alpha)
    a = math.log2(1 + 2 * d_A ** kappa)
    return PhiConstants(c / gamma, c * 2 * a / math.sqrt(gamma), c * (2 + a * a))


def t_hat(g, phi: PhiConstants) -> float:
    g = np.asarray(g, dtype=float)
    spread = float(np.max(g) - np.min(g))
    return phi.phi0 * spread ** 2 + phi.phi1 * spread


def s_func(x: float, phi: PhiConstants) -> float:
    if x < phi.phi1:
        return 0.0
    if phi.phi0 == 0:
        return 0.0 if x == phi.phi1 else math.inf
    return (x - phi.phi1) ** 2 / (4 * phi.phi0)


def s_prime(x: float, phi: PhiConstants) -> float:
    if x < phi.phi1:
        return 0.0
    if phi.phi0 == 0:
        return math.inf
    return (x - phi.phi1) / (2 * phi.phi0)


def t_hat_conj(lam, phi: PhiConstants, tol: float = 1e-12) -> float:
    lam = np.asarray(lam, dtype=float)
    if abs(lam.sum()) > tol * max(1.0, np.abs(lam).sum()):
        return math.inf
    return s_func(float(np.abs(lam).sum()) / 2, phi)


@dataclass
class ModPrimalProblem:
    problem: ProtocolProblem
    phi: PhiConstants
    alpha: float

    @classmethod
    def build(cls, problem: ProtocolProblem, alpha: float) -> "ModPrimalProblem":
        return cls(problem, phi_constants(alpha, problem.gamma, problem.d_A, problem.kappa),
                   alpha)


class ChoiDomain:
    """Feasible set (J, aux[, sigma]) with an SDP linear-minimization oracle."""

    def __init__(self, problem: ProtocolProblem, with_sigma: bool):
        p = problem
        self.problem = p
        self.with_sigma = with_sigma
        nj, k, m = p.n_choi, p.n_aux, p.n_stats
        self.nj, self.k, self.m = nj, k, m
        n_scal = k + (m if with_sigma else 0)
        n = nj + n_scal
        crow, crhs = p.choi_constraint_rows()
        eq_rows = [np.hstack([crow, np.zeros((crow.shape[0], n_scal))])]
        eq_rhs = [crhs]
        if p.aux_eq.shape[0]:
            eq_rows.append(np.hstack([np.zeros((p.aux_eq.shape[0], nj)), p.aux_eq,
                                      np.zeros((p.aux_eq.shape[0], n_scal - k))]))
            eq_rhs.append(p.aux_eq_rhs)
        le_rows, le_rhs = [], []
        if p.extra_rows.shape[0]:
            pad = np.zeros((p.extra_rows.shape[0], n_scal - k))
            le_rows.append(-np.hstack([p.extra_rows, pad]))
            le_rhs.append(-p.extra_rhs)
        self.n_extra = p.extra_rows.shape[0]
        lower = list(p.aux_lower)
        upper = list(p.aux_upper)
        if with_sigma:
            stat = np.hstack([p.stat_choi, p.stat_aux])
            eye = np.eye(m)
            # Phi + sigma >= q  and  sigma - Phi >= -q, stored as <= rows
            le_rows.append(-np.hstack([stat, eye]))
            le_rhs.append(-p.q_hon)
            le_rows.append(np.hstack([stat, -eye]))
            le_rhs.append(p.q_hon)
            lower += [0.0] * m
            upper += [1.0] * m
        d = p.dim_in * p.dim_out
        self.n_eq = sum(r.shape[0] for r in eq_rows)
        self.sdp = CompiledSdp([d], [float(p.dim_in)], lower, upper,
                               np.vstack(eq_rows), np.concatenate(eq_rhs),
                               np.vstack(le_rows) if le_rows else np.zeros((0, n)),
                               np.concatenate(le_rhs) if le_rhs else np.zeros(0))
        self.n = n

    def split(self, x):
        return x[:self.nj], x[self.nj:self.nj + self.k], x[self.nj + self.k:]

    def honest_point(self) -> np.ndarray:
        xj, aux = self.problem.honest_point()
        parts = [xj, aux]
        if self.with_sigma:
            parts.append(self._sigma(xj, aux))
        return np.concatenate(parts)

    def _sigma(self, xj, aux):
        return np.clip(np.abs(self.problem.q_hon - self.problem.stats(xj, aux)), 0.0, 1.0)

    def repair(self, x) -> np.ndarray:
        """Snap a solver point back onto the domain; slacks become |q_hon - Phi|."""
        xj, aux, _ = self.split(x)
        xj = self.problem.repair_choi(xj)
        aux = self.problem.repair_aux(aux)
        parts = [xj, aux]
        if self.with_sigma:
            parts.append(self._sigma(xj, aux))
        return np.concatenate(parts)

    def lmo(self, grad) -> LmoResult:
        sol = self.sdp.solve(grad)
        if sol.x is None:
            return LmoResult(None, np.nan, -np.inf, None, ok=False, gap=np.inf)
        duals = {"y": sol.dual_vector}
        if self.with_sigma:
            z = sol.dual_vector[self.n_eq + self.n_extra:]
            duals["g"] = z[:self.m] - z[self.m:2 * self.m]
        v = self.repair(sol.x)
        value = float(grad @ v)
        return LmoResult(v, value, min(sol.lower_bound, value), duals,
                         ok=sol.status == "optimal", gap=sol.duality_gap)


    def newton_step(self, hessian):
        """Local-step hook for frank_wolfe: minimize the quadratic model over the domain."""

        def step(x, grad):
            quad = hessian(x)
            quad = quad + 1e-10 * max(1.0, float(np.max(np.abs(np.diag(quad))))) * np.eye(len(x))
            y = self.sdp.solve_qp(grad - quad @ x, quad)
            return None if y is None else self.repair(y)

        return step


def _choi_block_hessian(problem: ProtocolProblem, domain: ChoiDomain, xj) -> np.ndarray:
    h = np.zeros((domain.n, domain.n))
    h[:domain.nj, :domain.nj] = problem.w_hessian(xj)
    return h


def _run_fw(fun, domain: ChoiDomain, hessian, x0, fw_config):
    cfg = fw_config or FrankWolfeConfig()
    local = domain.newton_step(hessian) if cfg.local_steps else None
    return frank_wolfe(fun, domain.lmo, x0, cfg, local_step=local)


@dataclass
class GradientOptimum:
    """Outcome of the dual construction of g*."""

    g_star: CrossoverGradient
    r_sdp: float
    fw: FrankWolfeResult
    objective_at_honest: float


def modprimal_objective(mp: ModPrimalProblem, domain: ChoiDomain):
    phi = mp.phi
    m = domain.m

    def fun(x):
        xj, _, sigma = domain.split(x)
        w, gw = mp.problem.w_and_grad(xj)
        t = float(sigma.sum()) / 2
        grad = np.concatenate([gw, np.zeros(domain.k), np.full(m, s_prime(t, phi) / 2)])
        return w + s_func(t, phi), grad

    return fun


def modprimal_hessian(mp: ModPrimalProblem, domain: ChoiDomain):
    phi = mp.phi

    def hess(x):
        xj, _, sigma = domain.split(x)
        h = _choi_block_hessian(mp.problem, domain, xj)
        t = float(sigma.sum()) / 2
        if t > phi.phi1 and phi.phi0 > 0:
            lo = domain.nj + domain.k
            h[lo:, lo:] += 1 / (8 * phi.phi0)
        return h

    return hess


def optimize_gradient(mp: ModPrimalProblem, fw_config: FrankWolfeConfig | None = None
                      ) -> GradientOptimum:
    """Frank-Wolfe on min W + s(sum(sigma)/2); returns g* and the certified r_SDP.

    g* is reconstructed from the multipliers of the two sigma inequalities of
    the best-bound subproblem; with the Lagrangian sign g.(q_hon - Phi - lam)
    it is the difference of the ``Phi + sigma >= q`` and ``sigma - Phi >= -q``
    multipliers.
    """
    domain = ChoiDomain(mp.problem, with_sigma=True)
    fun = modprimal_objective(mp, domain)
    x0 = domain.honest_point()
    f0 = fun(x0)[0]
    res = _run_fw(fun, domain, modprimal_hessian(mp, domain), x0, fw_config)
    duals = res.final_subproblem_duals
    g = duals["g"] if duals is not None else np.zeros(domain.m)
    return GradientOptimum(CrossoverGradient(g), res.certified_lower_bound, res, f0)


@dataclass
class FirstOrderResult:
    lower_bound: float
    value: float
    fw: FrankWolfeResult
    objective_at_honest: float

    @property
    def gap(self) -> float:
        return self.value - self.lower_bound


def first_order_objective(problem: ProtocolProblem, domain: ChoiDomain, g, alpha, gamma):
    g = np.asarray(g.g if isinstance(g, CrossoverGradient) else g, dtype=float)
    c = variance_coefficient(alpha)
    stat = np.hstack([problem.stat_choi, problem.stat_aux])
    q = problem.q_hon

    def fun(x):
        xj, aux, _ = domain.split(x)
        w, gw = problem.w_and_grad(xj)
        ph = problem.stats(xj, aux)
        v, dv = var_tilde_grad(ph, g, gamma, problem.d_A, problem.kappa)
        val = w + float(g @ (q - ph)) - c * v
        dphi = -g - c * dv
        grad = stat.T @ dphi
        grad[:domain.nj] += gw
        return val, grad

    def hess(x):
        xj, aux, _ = domain.split(x)
        h = _choi_block_hessian(problem, domain, xj)
        ph = problem.stats(xj, aux)
        h -= c * stat.T @ var_tilde_hess(ph, g, gamma, problem.d_A, problem.kappa) @ stat
        return h

    return fun, hess


def evaluate_first_order(g, problem: ProtocolProblem, alpha: float, gamma: float,
                         fw_config: FrankWolfeConfig | None = None) -> FirstOrderResult:
    """Certified lower bound on inf_J [W + g.(q_hon - Phi) - c Var~(Phi, g)]."""
    domain = ChoiDomain(problem, with_sigma=False)
    fun, hess = first_order_objective(problem, domain, g, alpha, gamma)
    x0 = domain.honest_point()
    f0 = fun(x0)[0]
    res = _run_fw(fun, domain, hess, x0, fw_config)
    return FirstOrderResult(res.certified_lower_bound, res.best_value, res, f0)


def crossover_constant(g, problem: ProtocolProblem, fw_config: FrankWolfeConfig | None = None
                       ) -> FirstOrderResult:
    """Certified lower bound on k_g = inf_J [W - g.Phi]."""
    domain = ChoiDomain(problem, with_sigma=False)
    g = np.asarray(g.g if isinstance(g, CrossoverGradient) else g, dtype=float)
    stat = np.hstack([problem.stat_choi, problem.stat_aux])
    grad_lin = -stat.T @ g

    def fun(x):
        xj, aux, _ = domain.split(x)
        w, gw = problem.w_and_grad(xj)
        grad = grad_lin.copy()
        grad[:domain.nj] += gw
        return w - float(g @ problem.stats(xj, aux)), grad

    x0 = domain.honest_point()
    f0 = fun(x0)[0]
    res = _run_fw(fun, domain, lambda x: _choi_block_hessian(problem, domain, x[:domain.nj]),
                  x0, fw_config)
    return FirstOrderResult(res.certified_lower_bound, res.best_value, res, f0)


def gradient_self_check(mp: ModPrimalProblem, opt: GradientOptimum,
                        fw_config: FrankWolfeConfig | None = None) -> float:
    """Slack of g*.q_hon + k_g - T(g*) >= r_SDP with k_g recomputed independently.

    The k_g solve runs to a tight gap but stops early once its certified bound
    already gives nonnegative slack.
    """
    cfg = fw_config or FrankWolfeConfig()
    offset = float(opt.g_star.g @ mp.problem.q_hon) - t_hat(opt.g_star.g, mp.phi)
    cfg = replace(cfg, gap_tol=min(cfg.gap_tol, 1e-9), bound_target=opt.r_sdp - offset)
    kg = crossover_constant(opt.g_star, mp.problem, cfg)
    return offset + kg.lower_bound - opt.r_sdp
