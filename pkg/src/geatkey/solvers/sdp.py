"""Small dense SDPs with certified dual lower bounds.

Problems are stated over Hermitian PSD blocks plus bounded scalar variables.
The interior-point work is delegated to cvxopt's Nesterov-Todd cone solver;
blocks enter through their real symmetric embedding.  Whatever the solver
returns, the reported lower bound is recomputed from its affine-constraint
multipliers by minimizing the Lagrangian exactly over the cones and boxes, so
it is valid by weak duality even when the solver is inaccurate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import cvxopt
from cvxopt import solvers as cvx_solvers

from ..quantum import herm_basis, herm_to_vec, vec_to_herm

GAP_RTOL = 1e-8

_CVX_OPTIONS = {
    "show_progress": False,
    "abstol": 1e-11,
    "reltol": 1e-11,
    "feastol": 1e-10,
    "maxiters": 100,
    "refinement": 2,
}
_CVX_LADDER = [_CVX_OPTIONS,
               dict(_CVX_OPTIONS, abstol=1e-10, reltol=1e-10, feastol=1e-9),
               dict(_CVX_OPTIONS, abstol=1e-9, reltol=1e-9, feastol=1e-8, refinement=3)]


@dataclass
class PsdBlock:
    """Hermitian PSD block variable.

    ``trace`` must be the exact trace implied by the constraints (e.g. dim_in
    for a Choi matrix), or None when unknown.  It is what makes the certified
    lower bound finite when the dual slack is slightly indefinite.
    """

    dim: int
    objective: np.ndarray
    trace: float | None = None


@dataclass
class ScalarVar:
    objective: float
    lower: float = -np.inf
    upper: float = np.inf


@dataclass
class AffineConstraint:
    """sum_k <A_k, X_k> + a . x  (relation)  rhs."""

    blocks: Sequence[np.ndarray | None]
    scalars: np.ndarray | Sequence[float] | None
    relation: str
    rhs: float


@dataclass
class SdpProblem:
    psd_blocks: list[PsdBlock]
    scalar_vars: list[ScalarVar]
    affine_constraints: list[AffineConstraint]


@dataclass
class SdpSolution:
    primal_blocks: list[np.ndarray]
    scalar_values: np.ndarray
    dual_vector: np.ndarray
    status: str
    duality_gap: float
    objective: float
    lower_bound: float
    solver_status: str = ""
    x: np.ndarray | None = field(default=None, repr=False)


class CompiledSdp:
    """SDP in real coordinates, compiled once and re-solvable for new objectives.

    Variables are the stacked Hermitian coordinates of every block followed by
    the scalars.  Constraint rows are kept as dense matrices ``rows @ x``.
    """

    def __init__(self, block_dims, block_traces, lower, upper, eq_rows, eq_rhs,
                 le_rows, le_rhs):
        self.block_dims = list(block_dims)
        self.block_traces = list(block_traces)
        self.offsets = np.cumsum([0] + [d * d for d in self.block_dims])
        self.n_block = int(self.offsets[-1])
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.n_scalar = len(self.lower)
        self.n = self.n_block + self.n_scalar
        self.eq_rows = np.asarray(eq_rows, dtype=float).reshape(-1, self.n)
        self.eq_rhs = np.asarray(eq_rhs, dtype=float)
        self.le_rows = np.asarray(le_rows, dtype=float).reshape(-1, self.n)
        self.le_rhs = np.asarray(le_rhs, dtype=float)
        self._build()
        self._classify_eq_rows()

    @classmethod
    def from_problem(cls, p: SdpProblem) -> tuple["CompiledSdp", np.ndarray, np.ndarray]:
        """Compile ``p``; also returns the objective vector and a row map.

        The row map sends each affine constraint to (kind, row, sign) so that
        duals can be reported in the original constraint order.
        """
        dims = [b.dim for b in p.psd_blocks]
        offsets = np.cumsum([0] + [d * d for d in dims])
        n = int(offsets[-1]) + len(p.scalar_vars)

        def row_of(con: AffineConstraint):
            r = np.zeros(n)
            for k, a in enumerate(con.blocks):
                if a is not None:
                    r[offsets[k]:offsets[k + 1]] = herm_to_vec(a)
            if con.scalars is not None:
                r[offsets[-1]:] = np.asarray(con.scalars, dtype=float)
            return r

        eq_rows, eq_rhs, le_rows, le_rhs, rowmap = [], [], [], [], []
        for con in p.affine_constraints:
            r = row_of(con)
            if con.relation == "=":
                rowmap.append(("eq", len(eq_rows), 1.0))
                eq_rows.append(r)
                eq_rhs.append(con.rhs)
            elif con.relation in ("<=", "≤"):
                rowmap.append(("le", len(le_rows), 1.0))
                le_rows.append(r)
                le_rhs.append(con.rhs)
            elif con.relation in (">=", "≥"):
                rowmap.append(("le", len(le_rows), -1.0))
                le_rows.append(-r)
                le_rhs.append(-con.rhs)
            else:
                raise ValueError(f"unknown relation {con.relation!r}")
        c = np.concatenate([herm_to_vec(b.objective) for b in p.psd_blocks]
                           + [np.array([s.objective for s in p.scalar_vars], dtype=float)])
        comp = cls(dims, [b.trace for b in p.psd_blocks],
                   [s.lower for s in p.scalar_vars], [s.upper for s in p.scalar_vars],
                   eq_rows, eq_rhs, le_rows, le_rhs)
        return comp, c, rowmap

    def _build(self):
        n = self.n
        # linear cone: user inequalities, then finite scalar bounds
        rows = [self.le_rows]
        rhs = [self.le_rhs]
        eye = np.eye(self.n_scalar)
        self._ub_idx = np.flatnonzero(np.isfinite(self.upper))
        self._lb_idx = np.flatnonzero(np.isfinite(self.lower))
        if self._ub_idx.size:
            r = np.zeros((self._ub_idx.size, n))
            r[:, self.n_block:] = eye[self._ub_idx]
            rows.append(r)
            rhs.append(self.upper[self._ub_idx])
        if self._lb_idx.size:
            r = np.zeros((self._lb_idx.size, n))
            r[:, self.n_block:] = -eye[self._lb_idx]
            rows.append(r)
            rhs.append(-self.lower[self._lb_idx])
        g_lin = np.vstack(rows) if rows else np.zeros((0, n))
        h_lin = np.concatenate(rhs) if rhs else np.zeros(0)
        self.n_lin = g_lin.shape[0]
        # semidefinite cones: real embedding [[Re, -Im], [Im, Re]] of each block
        g_s, s_dims = [], []
        for k, d in enumerate(self.block_dims):
            basis = herm_basis(d)
            emb = np.block([[basis.real, -basis.imag], [basis.imag, basis.real]])
            cols = emb.reshape(d * d, -1)  # symmetric, so row/column-major agree
            block = np.zeros((4 * d * d, n))
            block[:, self.offsets[k]:self.offsets[k + 1]] = -cols.T
            g_s.append(block)
            s_dims.append(2 * d)
        g = np.vstack([g_lin] + g_s)
        h = np.concatenate([h_lin] + [np.zeros(b.shape[0]) for b in g_s])
        self._G = cvxopt.matrix(g)
        self._h = cvxopt.matrix(h)
        self._dims = {"l": self.n_lin, "q": [], "s": s_dims}
        if self.eq_rows.shape[0]:
            self._A = cvxopt.matrix(self.eq_rows)
            self._b = cvxopt.matrix(self.eq_rhs)
        else:
            self._A = self._b = None

    def _classify_eq_rows(self):
        """Split equality rows into block-only, scalar unit-sum groups and the rest.

        Block-only and group rows are not dualized in the certified bound: the
        block part is re-solved on its own and groups are minimized exactly.
        """
        nb = self.n_block
        blk, grp, mixed = [], [], []
        used = np.zeros(self.n_scalar, dtype=bool)
        for i, row in enumerate(self.eq_rows):
            on_blocks = np.any(row[:nb] != 0)
            sc = row[nb:]
            supp = np.flatnonzero(sc)
            if on_blocks and supp.size == 0:
                blk.append(i)
            elif (not on_blocks and supp.size and np.all(sc[supp] == 1.0)
                  and not used[supp].any()
                  and np.all(np.isfinite(self.lower[supp]))
                  and np.all(np.isfinite(self.upper[supp]))):
                used[supp] = True
                grp.append(i)
            else:
                mixed.append(i)
        self._eq_block = np.array(blk, dtype=int)
        self._eq_group = np.array(grp, dtype=int)
        self._eq_mixed = np.array(mixed, dtype=int)
        self._group_members = [np.flatnonzero(self.eq_rows[i, nb:]) for i in grp]
        self._grouped = used
        self._block_sub = None

    def _block_subproblem(self) -> "CompiledSdp":
        if self._block_sub is None:
            rows = self.eq_rows[self._eq_block, :self.n_block]
            self._block_sub = CompiledSdp(self.block_dims, self.block_traces, [], [],
                                          rows, self.eq_rhs[self._eq_block],
                                          np.zeros((0, self.n_block)), np.zeros(0))
        return self._block_sub

    def _block_bound(self, red_blocks, y_blk) -> float:
        total = -float(y_blk @ self.eq_rhs[self._eq_block]) if y_blk.size else 0.0
        red = red_blocks + (self.eq_rows[self._eq_block, :self.n_block].T @ y_blk
                            if y_blk.size else 0.0)
        for k, d in enumerate(self.block_dims):
            lam = np.linalg.eigvalsh(vec_to_herm(red[self.offsets[k]:self.offsets[k + 1]], d))[0]
            t = self.block_traces[k]
            if t is None:
                if lam < 0:
                    return -np.inf
            else:
                total += t * lam
        return float(total)

    def lagrangian_bound(self, c, y_eq, y_le, polish: bool = True) -> float:
        """Certified lower bound from the multipliers of the coupling constraints.

        Inequality rows and equality rows that mix blocks with scalars are
        dualized with the given multipliers (``y_le`` is clipped at 0).  What
        is left separates: the block part keeps its own equality rows and is
        bounded by the better of the given multipliers and a re-solve
        (``polish``); scalar unit-sum groups are minimized exactly over their
        boxes.  Every piece is a valid lower bound, hence so is the sum.
        """
        y_eq = np.asarray(y_eq, dtype=float)
        y_le = np.clip(y_le, 0.0, None)
        red = np.asarray(c, dtype=float).copy()
        total = 0.0
        mixed = self._eq_mixed
        if mixed.size:
            red += self.eq_rows[mixed].T @ y_eq[mixed]
            total -= y_eq[mixed] @ self.eq_rhs[mixed]
        if self.le_rows.shape[0]:
            red += self.le_rows.T @ y_le
            total -= y_le @ self.le_rhs
        nb = self.n_block
        blk = self._block_bound(red[:nb], y_eq[self._eq_block])
        if polish and self._eq_block.size and nb:
            sub = self._block_subproblem().solve(red[:nb], polish=False)
            if sub.x is not None:
                blk = max(blk, self._block_bound(red[:nb], sub.dual_vector[:self._eq_block.size]))
        total += blk
        rs = red[nb:]
        for i, members in zip(self._eq_group, self._group_members):
            total += _min_over_box_sum(rs[members], self.lower[members], self.upper[members],
                                       self.eq_rhs[i])
        for j in np.flatnonzero(~self._grouped):
            rj = rs[j]
            if rj == 0:
                continue
            bound = self.lower[j] if rj > 0 else self.upper[j]
            if not np.isfinite(bound):
                return -np.inf
            total += rj * bound
        return float(total)

    def solve(self, c, polish: bool = True) -> SdpSolution:
        """Minimize c . x; retries with looser tolerances if the solver breaks down.

        cvxopt can stall or hit a zero step after it has already converged to
        working accuracy, so the attempt with the best certified bound wins.
        """
        c = np.asarray(c, dtype=float)
        best = None
        for opts in _CVX_LADDER:
            sol = self._solve_once(c, polish, opts)
            if sol.status == "infeasible":
                return sol
            better = sol.x is not None and (best is None or best.x is None
                                            or sol.lower_bound > best.lower_bound)
            if best is None or better:
                best = sol
            if best.status == "optimal":
                break
        return best

    def _solve_once(self, c, polish, opts) -> SdpSolution:
        scale = max(1.0, np.max(np.abs(c)))
        try:
            args = (cvxopt.matrix(c / scale), self._G, self._h, self._dims)
            if self._A is not None:
                sol = cvx_solvers.conelp(*args, A=self._A, b=self._b, options=opts)
            else:
                sol = cvx_solvers.conelp(*args, options=opts)
        except (ArithmeticError, ValueError) as exc:
            return self._failed(str(exc))
        status = sol["status"]
        if sol["x"] is None or status in ("primal infeasible", "dual infeasible"):
            st = "infeasible" if status == "primal infeasible" else "numerical-failure"
            return self._failed(status, st)
        x = np.array(sol["x"]).ravel()
        y_eq = np.array(sol["y"]).ravel() * scale if self._A is not None else np.zeros(0)
        z = np.array(sol["z"]).ravel() * scale
        y_le = z[: self.le_rows.shape[0]]
        obj = float(c @ x)
        lb = self.lagrangian_bound(c, y_eq, y_le, polish)
        gap = obj - lb
        infeas = self.primal_infeasibility(x)
        # gap judged on the normalized objective c / scale that the solver sees
        ok = np.isfinite(lb) and gap <= GAP_RTOL * (scale + abs(obj)) and infeas <= 1e-7
        blocks = [vec_to_herm(x[self.offsets[k]:self.offsets[k + 1]], d)
                  for k, d in enumerate(self.block_dims)]
        return SdpSolution(blocks, x[self.n_block:], np.concatenate([y_eq, y_le]),
                           "optimal" if ok else "numerical-failure", gap, obj, lb,
                           status, x)

    def solve_qp(self, c, quad) -> np.ndarray | None:
        """Minimizer of c.x + x.quad.x / 2 over the feasible set, or None on failure.

        Used only to propose iterates, so no certificate is attached.
        """
        c = np.asarray(c, dtype=float)
        quad = np.asarray(quad, dtype=float)
        scale = max(1.0, np.max(np.abs(c)), np.max(np.abs(quad)))
        opts = dict(_CVX_LADDER[-1])
        try:
            args = (cvxopt.matrix(quad / scale), cvxopt.matrix(c / scale), self._G, self._h,
                    self._dims)
            if self._A is not None:
                sol = cvx_solvers.coneqp(*args, A=self._A, b=self._b, options=opts)
            else:
                sol = cvx_solvers.coneqp(*args, options=opts)
        except (ArithmeticError, ValueError):
            return None
        if sol["x"] is None or sol["status"] not in ("optimal", "unknown"):
            return None
        return np.array(sol["x"]).ravel()

    def primal_infeasibility(self, x) -> float:
        worst = 0.0
        if self.eq_rows.shape[0]:
            worst = max(worst, np.max(np.abs(self.eq_rows @ x - self.eq_rhs)))
        if self.le_rows.shape[0]:
            worst = max(worst, np.max(self.le_rows @ x - self.le_rhs, initial=0.0))
        s = x[self.n_block:]
        worst = max(worst, np.max(self.lower - s, initial=0.0), np.max(s - self.upper, initial=0.0))
        for k, d in enumerate(self.block_dims):
            lam = np.linalg.eigvalsh(vec_to_herm(x[self.offsets[k]:self.offsets[k + 1]], d))[0]
            worst = max(worst, -lam)
        return float(worst)

    def _failed(self, message: str, status: str = "numerical-failure") -> SdpSolution:
        return SdpSolution([], np.zeros(self.n_scalar), np.zeros(0), status, np.inf,
                           np.nan, -np.inf, message, None)


def _min_over_box_sum(r, lo, hi, total) -> float:
    """min r.x over lo <= x <= hi, sum x = total, by filling cheapest first."""
    x = lo.astype(float).copy()
    left = total - x.sum()
    for j in np.argsort(r, kind="stable"):
        if left <= 0:
            break
        step = min(hi[j] - lo[j], left)
        x[j] += step
        left -= step
    if left > 1e-12 * max(1.0, abs(total)):
        return np.inf
    return float(r @ x)


def solve_sdp(p: SdpProblem) -> SdpSolution:
    """Solve ``p``; duals follow the convention Lagrangian += dual * (lhs - rhs).

    So duals of <= rows are >= 0, of >= rows are <= 0.
    """
    comp, c, rowmap = CompiledSdp.from_problem(p)
    sol = comp.solve(c)
    if sol.x is None:
        return sol
    n_eq = comp.eq_rows.shape[0]
    duals = np.empty(len(rowmap))
    for i, (kind, row, sign) in enumerate(rowmap):
        duals[i] = sol.dual_vector[row] if kind == "eq" else sign * sol.dual_vector[n_eq + row]
    sol.dual_vector = duals
    return sol
