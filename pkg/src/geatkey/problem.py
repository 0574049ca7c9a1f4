"""Protocol-independent description of the rate optimization domain.

A protocol supplies a single Choi block J (the channel acting on the part of
the signal that carries the entropy objective) and optionally auxiliary
bounded scalars (decoy yields and truncation remainders).  Test statistics
are affine in both:

    Phi = stat_choi @ vec(J) + stat_aux @ aux

with vec the orthonormal Hermitian coordinates of ``quantum.herm_to_vec``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .entropy import ObjectiveSpec, w_hessian, w_value_and_gradient
from .quantum import herm_basis, herm_to_vec, partial_trace, vec_to_herm


@dataclass
class ProtocolProblem:
    spec: ObjectiveSpec
    stat_choi: np.ndarray
    q_hon: np.ndarray
    honest_choi: np.ndarray
    gamma: float
    stat_aux: np.ndarray | None = None
    aux_lower: np.ndarray | None = None
    aux_upper: np.ndarray | None = None
    aux_eq: np.ndarray | None = None
    aux_eq_rhs: np.ndarray | None = None
    honest_aux: np.ndarray | None = None
    # rows r with r @ [vec(J), aux] >= rhs; the hook for squashing-type constraints
    extra_rows: np.ndarray | None = None
    extra_rhs: np.ndarray | None = None
    labels: tuple = ()
    d_A: int = 2
    kappa: int = 1
    h_hon: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        m = len(self.q_hon)
        if self.stat_aux is None:
            self.stat_aux = np.zeros((m, 0))
            self.aux_lower = np.zeros(0)
            self.aux_upper = np.zeros(0)
            self.honest_aux = np.zeros(0)
        k = self.stat_aux.shape[1]
        if self.aux_eq is None:
            self.aux_eq = np.zeros((0, k))
            self.aux_eq_rhs = np.zeros(0)
        if self.extra_rows is None:
            self.extra_rows = np.zeros((0, self.n_choi + k))
            self.extra_rhs = np.zeros(0)

    @property
    def dim_in(self) -> int:
        return self.spec.dim_in

    @property
    def dim_out(self) -> int:
        return self.spec.dim_out

    @property
    def n_choi(self) -> int:
        return (self.dim_in * self.dim_out) ** 2

    @property
    def n_aux(self) -> int:
        return self.stat_aux.shape[1]

    @property
    def n_stats(self) -> int:
        return len(self.q_hon)

    def choi(self, xj) -> np.ndarray:
        return vec_to_herm(xj, self.dim_in * self.dim_out)

    def stats(self, xj, aux) -> np.ndarray:
        return self.stat_choi @ xj + self.stat_aux @ aux

    def honest_point(self) -> tuple[np.ndarray, np.ndarray]:
        return herm_to_vec(self.honest_choi), np.array(self.honest_aux, dtype=float)

    def w_and_grad(self, xj) -> tuple[float, np.ndarray]:
        w, grad = w_value_and_gradient(self.spec, self.choi(xj))
        return w, herm_to_vec(grad)

    def w_hessian(self, xj) -> np.ndarray:
        return w_hessian(self.spec, self.choi(xj))

    def choi_constraint_rows(self):
        """Rows expressing Tr_B J = I in J coordinates."""
        key = "choi_rows"
        if key not in self._cache:
            din, dout = self.dim_in, self.dim_out
            rows = np.array([herm_to_vec(np.kron(e, np.eye(dout))) for e in herm_basis(din)])
            rhs = herm_to_vec(np.eye(din))
            self._cache[key] = (rows, rhs)
        return self._cache[key]

    def repair_choi(self, xj) -> np.ndarray:
        """Map a nearly-feasible coordinate vector onto the Choi set.

        Negative eigenvalues are clipped and Tr_B J is restored to the identity
        by congruence with (Tr_B J)^{-1/2}, which preserves positivity.
        """
        j = self.choi(xj)
        lam, u = np.linalg.eigh(j)
        j = (u * np.clip(lam, 0, None)) @ u.conj().T
        t = partial_trace(j, (self.dim_in, self.dim_out), keep=0)
        lt, ut = np.linalg.eigh(t)
        s = (ut / np.sqrt(np.clip(lt, 1e-300, None))) @ ut.conj().T
        k = np.kron(s, np.eye(self.dim_out))
        return herm_to_vec(k @ j @ k.conj().T)

    def repair_aux(self, aux) -> np.ndarray:
        return np.clip(aux, self.aux_lower, self.aux_upper)
