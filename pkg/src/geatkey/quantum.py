"""Dense linear algebra and quantum-map primitives.

Tensor-product ordering: subsystem 1 varies slowest, i.e. the index of
``kron(a, b)`` is ``i_a * dim(b) + i_b`` (the numpy convention).  All
logarithms are base 2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg as sla
from scipy import optimize

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
DEFAULT_REL_FLOOR = 1e-12


class SupportWarning(RuntimeWarning):
    """Raised when supp(rho) is not contained in supp(sigma) up to the floor."""


def hermitian(m, psd: bool = False) -> np.ndarray:
    """Validate ``m`` as a Hermitian (optionally PSD) matrix and symmetrize it.

    Parameters
    ----------
    m : array_like
        Square matrix.
    psd : bool
        Also require the minimum eigenvalue to be >= -1e-10 * ||m||.

    Returns
    -------
    numpy.ndarray
        ``(m + m^dagger) / 2`` as a complex array.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = max(np.max(np.abs(m)), 1.0) if m.size else 1.0
    if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL * scale:
        raise ValueError("matrix is not Hermitian")
    m = 0.5 * (m + m.conj().T)
    if psd and m.size:
        lam = np.linalg.eigvalsh(m)[0]
        if lam < -PSD_TOL * scale:
            raise ValueError(f"matrix is not PSD (min eigenvalue {lam:.3e})")
    return m


@dataclass(frozen=True)
class BipartiteKet:
    """Pure state on A (kept by Alice) times A' (sent into the channel)."""

    dims: tuple[int, int]
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex).ravel()
        if amp.size != self.dims[0] * self.dims[1]:
            raise ValueError("amplitude length does not match dims")
        if abs(np.linalg.norm(amp) - 1.0) > 1e-12:
            raise ValueError("ket is not normalized")
        object.__setattr__(self, "amplitudes", amp)

    @property
    def matrix(self) -> np.ndarray:
        """Amplitudes reshaped to (d_A, d_A')."""
        return self.amplitudes.reshape(self.dims)

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    @classmethod
    def max_entangled(cls, d: int) -> "BipartiteKet":
        return cls((d, d), np.eye(d).ravel() / np.sqrt(d))


@dataclass(frozen=True)
class ChoiVariable:
    """Choi matrix J on A' (input) times B (output) with Tr_B J = I."""

    dim_in: int
    dim_out: int
    matrix: np.ndarray

    def __post_init__(self):
        j = hermitian(self.matrix)
        n = self.dim_in * self.dim_out
        if j.shape != (n, n):
            raise ValueError("Choi matrix has the wrong size")
        if np.linalg.eigvalsh(j)[0] < -1e-9:
            raise ValueError("Choi matrix is not PSD")
        red = partial_trace(j, (self.dim_in, self.dim_out), keep=0)
        if np.max(np.abs(red - np.eye(self.dim_in))) > 1e-9:
            raise ValueError("Choi matrix is not trace preserving")
        object.__setattr__(self, "matrix", j)

    @classmethod
    def from_kraus(cls, ops: Sequence[np.ndarray]) -> "ChoiVariable":
        """Choi matrix sum_ij |i><j| (x) E(|i><j|) of the map with Kraus ``ops``."""
        dout, din = np.shape(ops[0])
        return cls(din, dout, choi_from_kraus(ops))


def kron(*ops) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def _check_dims(m: np.ndarray, dims) -> tuple[int, int]:
    d1, d2 = (int(d) for d in dims)
    if m.shape != (d1 * d2, d1 * d2):
        raise ValueError(f"matrix of shape {m.shape} incompatible with dims {dims}")
    return d1, d2


def partial_trace(m, dims, keep: int) -> np.ndarray:
    """Trace out one factor of a bipartite operator.

    ``keep=0`` returns Tr_2(m), ``keep=1`` returns Tr_1(m).
    """
    m = np.asarray(m)
    d1, d2 = _check_dims(m, dims)
    t = m.reshape(d1, d2, d1, d2)
    if keep == 0:
        return np.einsum("ajbj->ab", t)
    if keep == 1:
        return np.einsum("iaib->ab", t)
    raise ValueError("keep must be 0 or 1")


def partial_transpose(m, dims, which: int) -> np.ndarray:
    m = np.asarray(m)
    d1, d2 = _check_dims(m, dims)
    t = m.reshape(d1, d2, d1, d2)
    if which == 0:
        t = t.transpose(2, 1, 0, 3)
    elif which == 1:
        t = t.transpose(0, 3, 2, 1)
    else:
        raise ValueError("which must be 0 or 1")
    return t.reshape(d1 * d2, d1 * d2)


def choi_from_kraus(ops: Sequence[np.ndarray]) -> np.ndarray:
    dout, din = np.shape(ops[0])
    j = np.zeros((din * dout, din * dout), dtype=complex)
    for k in ops:
        # vec of K^T with input index slowest: column i of K is E(|i>) part
        v = np.asarray(k, dtype=complex).T.reshape(-1)
        j += np.outer(v, v.conj())
    return j


def apply_choi(j, source: BipartiteKet) -> np.ndarray:
    """Output state (id_A (x) E)(|xi><xi|) of the channel with Choi matrix ``j``.

    Equivalent to Tr_A'[(I_A (x) J)(|xi><xi|^{T_A'} (x) I_B)], evaluated by a
    single tensor contraction.
    """
    if isinstance(j, ChoiVariable):
        j = j.matrix
    j = np.asarray(j)
    d_a, d_in = source.dims
    d_out = j.shape[0] // d_in
    if d_in * d_out != j.shape[0]:
        raise ValueError("source input dimension does not match the Choi matrix")
    psi = source.matrix
    t = j.reshape(d_in, d_out, d_in, d_out)
    rho = np.einsum("xi,yj,ibjc->xbyc", psi, psi.conj(), t, optimize=True)
    return rho.reshape(d_a * d_out, d_a * d_out)


def apply_choi_adjoint(y, source: BipartiteKet, d_out: int) -> np.ndarray:
    """Hilbert-Schmidt adjoint of ``J -> apply_choi(J, source)``."""
    d_a, d_in = source.dims
    psi = source.matrix
    t = np.asarray(y).reshape(d_a, d_out, d_a, d_out)
    out = np.einsum("xi,yj,xbyc->ibjc", psi.conj(), psi, t, optimize=True)
    return out.reshape(d_in * d_out, d_in * d_out)


def _check_kraus(ops, n: int, adjoint: bool):
    for k in ops:
        k = np.asarray(k)
        if k.ndim != 2 or k.shape[0 if adjoint else 1] != n:
            raise ValueError(f"Kraus operator of shape {k.shape} incompatible with dim {n}")


def apply_kraus(ops, rho) -> np.ndarray:
    rho = np.asarray(rho)
    _check_kraus(ops, rho.shape[0], adjoint=False)
    return sum(k @ rho @ k.conj().T for k in ops)


def adjoint_kraus(ops, x) -> np.ndarray:
    x = np.asarray(x)
    _check_kraus(ops, x.shape[0], adjoint=True)
    return sum(k.conj().T @ x @ k for k in ops)


def _floored_eigh(m, rel_floor: float):
    lam, u = np.linalg.eigh(m)
    top = lam[-1]
    if top <= 0:
        raise ValueError("matrix has no positive eigenvalue")
    return np.maximum(lam, rel_floor * top), lam, u


def matrix_log_safe(m, rel_floor: float = DEFAULT_REL_FLOOR) -> np.ndarray:
    """Base-2 matrix logarithm with eigenvalues clamped at rel_floor * lambda_max."""
    m = np.asarray(m, dtype=complex)
    if not np.any(m):
        raise ValueError("logarithm of the zero matrix")
    floored, _, u = _floored_eigh(m, rel_floor)
    return (u * np.log2(floored)) @ u.conj().T


def relative_entropy(rho, sigma, rel_floor: float = DEFAULT_REL_FLOOR) -> float:
    """D(rho||sigma) = Tr[rho (log rho - log sigma)] in bits, with floored logs."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    f_rho, lam_rho, u_rho = _floored_eigh(rho, rel_floor)
    f_sig, lam_sig, u_sig = _floored_eigh(sigma, rel_floor)
    first = float(np.sum(np.clip(lam_rho, 0.0, None) * np.log2(f_rho)))
    # Tr[rho log sigma] in the eigenbasis of sigma
    diag = np.real(np.einsum("ia,ij,ja->a", u_sig.conj(), rho, u_sig))
    second = float(np.sum(diag * np.log2(f_sig)))
    clamped = lam_sig < rel_floor * lam_sig[-1]
    if np.any(clamped) and np.sum(np.abs(diag[clamped])) > 1e3 * rel_floor * lam_sig[-1]:
        warnings.warn("supp(rho) not contained in supp(sigma); value is floor-limited",
                      SupportWarning, stacklevel=2)
    return first - second


def _mpow(m, p: float) -> np.ndarray:
    lam, u = np.linalg.eigh(m)
    lam = np.clip(lam, 0.0, None)
    with np.errstate(divide="ignore"):
        powd = np.where(lam > 0, lam ** p, 0.0)
    return (u * powd) @ u.conj().T


def sandwiched_renyi_divergence(rho, sigma, alpha: float) -> float:
    """D_alpha(rho||sigma) = log Tr[(sigma^{(1-a)/2a} rho sigma^{(1-a)/2a})^a] / (a-1)."""
    s = _mpow(sigma, (1 - alpha) / (2 * alpha))
    inner = s @ rho @ s
    lam = np.clip(np.linalg.eigvalsh(0.5 * (inner + inner.conj().T)), 0.0, None)
    return float(np.log2(np.sum(lam ** alpha)) / (alpha - 1))


def _density_from_params(x: np.ndarray, d: int) -> np.ndarray:
    a = (x[: d * d] + 1j * x[d * d:]).reshape(d, d)
    m = a @ a.conj().T
    return m / np.trace(m).real


def renyi_cond_entropy(rho_ab, dims, alpha: float, variant: str = "plain") -> float:
    """Sandwiched Renyi conditional entropy H_alpha(A|B) in bits.

    ``variant="plain"`` conditions on the marginal rho_B; ``"up_arrow"``
    maximizes over sigma_B numerically (adequate for tests, not for proofs).
    """
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    rho_ab = np.asarray(rho_ab, dtype=complex)
    d_a, d_b = _check_dims(rho_ab, dims)
    rho_b = partial_trace(rho_ab, (d_a, d_b), keep=1)

    def h(sigma_b):
        return -sandwiched_renyi_divergence(rho_ab, np.kron(np.eye(d_a), sigma_b), alpha)

    if variant == "plain":
        return h(rho_b)
    if variant != "up_arrow":
        raise ValueError(f"unknown variant {variant!r}")
    # start from rho_B (plus a little full-rank noise) and maximize over sigma_B
    lam, u = np.linalg.eigh(rho_b)
    root = (u * np.sqrt(np.clip(lam, 0, None) + 1e-6)) @ u.conj().T
    x0 = np.concatenate([root.real.ravel(), root.imag.ravel()])
    res = optimize.minimize(lambda x: -h(_density_from_params(x, d_b)), x0,
                            method="BFGS", options={"gtol": 1e-10})
    return max(-float(res.fun), h(rho_b))


def von_neumann_cond_entropy(rho_ab, dims) -> float:
    """H(A|B) = H(AB) - H(B) in bits."""
    rho_ab = np.asarray(rho_ab, dtype=complex)
    rho_b = partial_trace(rho_ab, dims, keep=1)
    return _entropy(rho_ab) - _entropy(rho_b)


def _entropy(rho) -> float:
    lam = np.linalg.eigvalsh(rho)
    lam = lam[lam > 1e-300]
    return float(-np.sum(lam * np.log2(lam)))


def binary_entropy(p: float) -> float:
    """h2(p) in bits.

    >>> binary_entropy(0.5)
    1.0
    """
    if p <= 0 or p >= 1:
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def expm2(m) -> np.ndarray:
    """Inverse of the base-2 matrix logarithm."""
    return sla.expm(np.log(2.0) * np.asarray(m))


# Real coordinates for Hermitian matrices.  The basis is orthonormal for the
# Hilbert-Schmidt inner product, so <X, Y> = herm_to_vec(X) @ herm_to_vec(Y).

_SQRT2 = np.sqrt(2.0)


def _triu(n: int):
    return np.triu_indices(n, k=1)


def herm_to_vec(x) -> np.ndarray:
    x = np.asarray(x)
    n = x.shape[0]
    iu = _triu(n)
    return np.concatenate([np.real(np.diag(x)), _SQRT2 * np.real(x[iu]),
                           _SQRT2 * np.imag(x[iu])])


def vec_to_herm(v, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    iu = _triu(n)
    m = len(iu[0])
    x = np.zeros((n, n), dtype=complex)
    x[iu] = (v[n:n + m] + 1j * v[n + m:]) / _SQRT2
    x = x + x.conj().T
    x[np.diag_indices(n)] = v[:n]
    return x


def herm_basis(n: int) -> np.ndarray:
    """Stack of the n^2 orthonormal Hermitian basis matrices used by herm_to_vec."""
    return np.array([vec_to_herm(e, n) for e in np.eye(n * n)])
