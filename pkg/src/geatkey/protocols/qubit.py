"""Qubit BB84 with a perfect single-photon source, depolarizing noise and loss."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..entropy import ConstraintOperators, ObjectiveSpec
from ..problem import ProtocolProblem
from ..quantum import DEFAULT_REL_FLOOR, ChoiVariable, binary_entropy
from .common import (ALICE_TEST_LABELS, BOB_LABELS, MINUS, PLUS, alice_test_povm,
                     bell_source, bob_povm, embed_qubit, key_map_kraus, loss_kraus, proj,
                     transmittance)

_PAULI = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]),
          np.diag([1.0, -1.0])]


def depolarizing_kraus(p: float) -> list[np.ndarray]:
    """rho -> (1-p) rho + p I/2."""
    w = [1 - 3 * p / 4] + [p / 4] * 3
    return [np.sqrt(wi) * s.astype(complex) for wi, s in zip(w, _PAULI)]


def honest_channel_kraus(p_depol: float, eta: float) -> list[np.ndarray]:
    return [l @ d for l in loss_kraus(eta) for d in depolarizing_kraus(p_depol)]


def honest_output(rho_in, p_depol: float, eta: float) -> np.ndarray:
    """Depolarize then lose, written out directly (no Kraus operators)."""
    rho = (1 - p_depol) * np.asarray(rho_in, dtype=complex) + p_depol * np.eye(2) / 2
    out = np.zeros((3, 3), dtype=complex)
    out[:2, :2] = eta * rho
    out[2, 2] = (1 - eta) * np.trace(rho)
    return out


@dataclass
class QubitBB84Model:
    gamma: float
    p_depol: float
    loss_db: float
    rel_floor: float = DEFAULT_REL_FLOOR
    spec: ObjectiveSpec = field(init=False)
    ops: ConstraintOperators = field(init=False)
    q_hon: np.ndarray = field(init=False)
    honest_choi: ChoiVariable = field(init=False)

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0 <= self.p_depol <= 1:
            raise ValueError("p_depol must lie in [0, 1]")
        if self.loss_db < 0:
            raise ValueError("loss must be nonnegative")
        g, z = key_map_kraus()
        src = bell_source()
        self.spec = ObjectiveSpec(tuple(g), tuple(z), (1 - self.gamma) ** 2, src, src, 3,
                                  self.rel_floor)
        labels = [(a, b) for a in ALICE_TEST_LABELS for b in BOB_LABELS]
        self.ops = ConstraintOperators.build(src, alice_test_povm(), bob_povm(self.gamma),
                                             labels)
        self.honest_choi = ChoiVariable.from_kraus(honest_channel_kraus(self.p_depol, self.eta))
        self.q_hon = self.honest_statistics()

    @property
    def eta(self) -> float:
        return transmittance(self.loss_db)

    @property
    def p_loss(self) -> float:
        return 1 - self.eta

    @property
    def qber(self) -> float:
        return self.p_depol / 2

    @property
    def h_hon(self) -> float:
        """(1-gamma)^2 p_det H(S|Y; kept) for the error-correction cost."""
        return (1 - self.gamma) ** 2 * self.eta * binary_entropy(self.qber)

    def honest_statistics(self) -> np.ndarray:
        """Joint test distribution: Alice's X-basis state (prob 1/2) and Bob's outcome."""
        q = []
        for v in (PLUS, MINUS):
            out = honest_output(proj(v), self.p_depol, self.eta)
            q.extend(0.5 * np.real(np.trace(m @ out)) for m in bob_povm(self.gamma))
        return np.array(q)

    def problem(self) -> ProtocolProblem:
        return ProtocolProblem(spec=self.spec, stat_choi=self.ops.matrix, q_hon=self.q_hon,
                               honest_choi=self.honest_choi.matrix, gamma=self.gamma,
                               labels=self.ops.labels, h_hon=self.h_hon)


def build_qubit_model(gamma: float, p_depol: float, loss_db: float,
                      rel_floor: float = DEFAULT_REL_FLOOR) -> QubitBB84Model:
    return QubitBB84Model(gamma, p_depol, loss_db, rel_floor)


def honest_key_rate_asymptotic(gamma: float, p_depol: float, loss_db: float,
                               f_ec: float) -> float:
    """(1-gamma)^2 p_det [1 - h2(Q)] - f_EC h_hon for the IID honest channel."""
    eta = transmittance(loss_db)
    q = p_depol / 2
    return (1 - gamma) ** 2 * eta * (1 - binary_entropy(q) - f_ec * binary_entropy(q))


__all__ = ["QubitBB84Model", "build_qubit_model", "honest_key_rate_asymptotic",
           "depolarizing_kraus", "honest_channel_kraus", "honest_output", "embed_qubit"]
