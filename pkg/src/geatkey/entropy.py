"""The conditional-entropy objective W, its gradient, and the test-statistics map.

W(J) = prefactor * D(G(rho_g) || Z(G(rho_g))) where rho_g is the
generation-round state produced by the channel with Choi matrix J.  Gradients
are Hermitian matrices in the Hilbert-Schmidt convention, dW = Tr[grad dJ].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .quantum import (DEFAULT_REL_FLOOR, BipartiteKet, ChoiVariable, adjoint_kraus,
                      apply_choi, apply_choi_adjoint, apply_kraus, herm_basis, herm_to_vec,
                      relative_entropy)


@dataclass(frozen=True)
class ObjectiveSpec:
    g_kraus: tuple
    z_kraus: tuple
    prefactor: float
    source_gen: BipartiteKet
    source_test: BipartiteKet
    dim_out: int
    rel_floor: float = DEFAULT_REL_FLOOR

    def __post_init__(self):
        g = [np.asarray(k, dtype=complex) for k in self.g_kraus]
        z = [np.asarray(k, dtype=complex) for k in self.z_kraus]
        total = sum(k.conj().T @ k for k in g)
        if np.linalg.eigvalsh(total)[-1] > 1 + 1e-10:
            raise ValueError("G-map is not trace non-increasing")
        zsum = sum(z)
        if np.max(np.abs(zsum - np.eye(zsum.shape[0]))) > 1e-10:
            raise ValueError("Z-map projectors do not sum to the identity")
        for p in z:
            if np.max(np.abs(p @ p - p)) > 1e-10:
                raise ValueError("Z-map operators must be projectors")
        object.__setattr__(self, "g_kraus", tuple(g))
        object.__setattr__(self, "z_kraus", tuple(z))

    @property
    def dim_in(self) -> int:
        return self.source_gen.dims[1]


def _matrix(j):
    return j.matrix if isinstance(j, ChoiVariable) else np.asarray(j)


def rho_gen(spec: ObjectiveSpec, j) -> np.ndarray:
    return apply_choi(_matrix(j), spec.source_gen)


def w_value(spec: ObjectiveSpec, rho_g) -> float:
    """prefactor * D(G(rho) || Z(G(rho))) in bits."""
    x = apply_kraus(spec.g_kraus, rho_g)
    y = apply_kraus(spec.z_kraus, x)
    return spec.prefactor * relative_entropy(x, y, spec.rel_floor)


def _log_parts(m, rel_floor):
    lam, u = np.linalg.eigh(m)
    floored = np.maximum(lam, rel_floor * lam[-1])
    logs = np.log2(floored)
    value = float(np.sum(np.clip(lam, 0, None) * logs))
    return value, (u * logs) @ u.conj().T


def w_value_and_gradient(spec: ObjectiveSpec, j) -> tuple[float, np.ndarray]:
    """W(J) and its Hermitian gradient with respect to J.

    Uses Tr[X log X] - Tr[Z(X) log Z(X)] for D(X||Z(X)), which holds because
    Z is a pinching and floored logs preserve its block structure.  The
    derivative is G^dag(log X - log Z(X)) pulled back through the Choi map;
    the identity terms from d(t log t) cancel because Z is trace preserving.
    """
    rho = rho_gen(spec, j)
    x = apply_kraus(spec.g_kraus, rho)
    y = apply_kraus(spec.z_kraus, x)
    vx, lx = _log_parts(x, spec.rel_floor)
    vy, ly = _log_parts(y, spec.rel_floor)
    grad_rho = adjoint_kraus(spec.g_kraus, lx - ly)
    grad = apply_choi_adjoint(grad_rho, spec.source_gen, spec.dim_out)
    grad = 0.5 * (grad + grad.conj().T)
    return spec.prefactor * (vx - vy), spec.prefactor * grad


def w_gradient(spec: ObjectiveSpec, j) -> np.ndarray:
    return w_value_and_gradient(spec, j)[1]


def _log_derivative(m, rel_floor):
    """Eigenbasis and divided differences of the floored log2 at ``m``.

    The Frechet derivative of the floored log in direction D is
    U (L o (U^dag D U)) U^dag.
    """
    lam, u = np.linalg.eigh(m)
    floor = rel_floor * lam[-1]
    fl = np.log2(np.maximum(lam, floor))
    dfl = np.where(lam > floor, 1.0 / (np.maximum(lam, floor) * np.log(2.0)), 0.0)
    num = fl[:, None] - fl[None, :]
    den = lam[:, None] - lam[None, :]
    close = np.abs(den) <= 1e-12 * max(1.0, lam[-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        div = np.where(close, 0.5 * (dfl[:, None] + dfl[None, :]), num / np.where(close, 1, den))
    return u, div


def w_hessian(spec: ObjectiveSpec, j) -> np.ndarray:
    """Hessian of W in the real Hermitian coordinates of J (consistent with the floored gradient)."""
    jm = _matrix(j)
    rho = rho_gen(spec, jm)
    x = apply_kraus(spec.g_kraus, rho)
    y = apply_kraus(spec.z_kraus, x)
    ux, lx = _log_derivative(x, spec.rel_floor)
    uy, ly = _log_derivative(y, spec.rel_floor)
    basis = herm_basis(jm.shape[0])
    cols = []
    for e in basis:
        dx = apply_kraus(spec.g_kraus, apply_choi(e, spec.source_gen))
        dy = apply_kraus(spec.z_kraus, dx)
        tx = ux @ (lx * (ux.conj().T @ dx @ ux)) @ ux.conj().T
        ty = uy @ (ly * (uy.conj().T @ dy @ uy)) @ uy.conj().T
        h = apply_choi_adjoint(adjoint_kraus(spec.g_kraus, tx - ty), spec.source_gen,
                               spec.dim_out)
        cols.append(herm_to_vec(0.5 * (h + h.conj().T)))
    hess = spec.prefactor * np.array(cols).T
    return 0.5 * (hess + hess.T)


@dataclass(frozen=True)
class ConstraintOperators:
    """Operators B_c with Phi_c(J) = Tr[B_c J] for every test outcome c = (a, b).

    ``matrix`` holds the same maps in real Hermitian coordinates, so that
    ``phi = matrix @ herm_to_vec(J)``.
    """

    operators: np.ndarray
    labels: tuple
    matrix: np.ndarray = field(repr=False)
    alice_marginals: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, source_test: BipartiteKet, alice_povm: Sequence, bob_povm: Sequence,
              labels: Sequence | None = None) -> "ConstraintOperators":
        """B_(a,b) = chi_t^dag(M_a (x) M_b), the adjoint of the test-state map."""
        d_out = np.shape(bob_povm[0])[0]
        ops, marg = [], []
        for ma in alice_povm:
            # Alice's marginal: Tr[(M_a (x) I) |xi><xi|] = Tr[M_a rho_A]
            rho_a = source_test.matrix @ source_test.matrix.conj().T
            marg.append(float(np.real(np.trace(np.asarray(ma) @ rho_a))))
            for mb in bob_povm:
                b = apply_choi_adjoint(np.kron(ma, mb), source_test, d_out)
                ops.append(0.5 * (b + b.conj().T))
        ops = np.array(ops)
        if labels is None:
            labels = [(a, b) for a in range(len(alice_povm)) for b in range(len(bob_povm))]
        mat = np.array([herm_to_vec(b) for b in ops])
        return cls(ops, tuple(labels), mat, np.array(marg))

    def __len__(self):
        return len(self.operators)


def phi(ops: ConstraintOperators, j) -> np.ndarray:
    """Test statistics Phi_c(J) = Tr[B_c J]."""
    return ops.matrix @ herm_to_vec(_matrix(j))
