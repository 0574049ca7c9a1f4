"""Operators shared by the BB84 variants.

Bob's space is a qubit plus a no-detection flag: basis |0>, |1>, |vac>.
"""

from __future__ import annotations

import numpy as np

from ..quantum import BipartiteKet

KET0 = np.array([1.0, 0.0])
KET1 = np.array([0.0, 1.0])
PLUS = np.array([1.0, 1.0]) / np.sqrt(2)
MINUS = np.array([1.0, -1.0]) / np.sqrt(2)

ALICE_TEST_LABELS = ("+", "-")
BOB_LABELS = ("Z0", "Z1", "Zvac", "X0", "X1", "Xvac")


def proj(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def embed_qubit(v) -> np.ndarray:
    """Qubit ket into the 3-dim detection space."""
    return np.append(np.asarray(v, dtype=complex), 0.0)


VAC = np.array([0.0, 0.0, 1.0], dtype=complex)
QUBIT_PROJ = np.diag([1.0, 1.0, 0.0]).astype(complex)


def transmittance(loss_db: float) -> float:
    """Channel transmittance 10^(-loss/10); the loss probability is 1 minus this."""
    return 10.0 ** (-loss_db / 10.0)


def bell_source() -> BipartiteKet:
    return BipartiteKet.max_entangled(2)


def alice_test_povm() -> list[np.ndarray]:
    return [proj(PLUS), proj(MINUS)]


def bob_povm(gamma: float) -> list[np.ndarray]:
    """Active basis choice: X with probability gamma, Z otherwise."""
    z, x = 1 - gamma, gamma
    return [z * proj(embed_qubit(KET0)), z * proj(embed_qubit(KET1)), z * proj(VAC),
            x * proj(embed_qubit(PLUS)), x * proj(embed_qubit(MINUS)), x * proj(VAC)]


def key_map_kraus() -> tuple[list[np.ndarray], list[np.ndarray]]:
    """G-map and Z-map Kraus operators for a Z-basis key on Alice's qubit.

    The single G operator writes Alice's Z value into the register S and keeps
    only rounds where Bob detected something (his detection is announced).
    Output ordering is S (x) A (x) B.
    """
    g = sum(np.kron(np.kron(ks.reshape(2, 1), proj(ks)), QUBIT_PROJ) for ks in (KET0, KET1))
    z = [np.kron(proj(ks), np.eye(6)) for ks in (KET0, KET1)]
    return [g.astype(complex)], z


def loss_kraus(eta: float) -> list[np.ndarray]:
    """Beamsplitter loss from a qubit into the 3-dim detection space."""
    keep = np.sqrt(eta) * np.vstack([np.eye(2), np.zeros((1, 2))])
    lost = [np.sqrt(1 - eta) * np.outer(VAC, e) for e in np.eye(2)]
    return [keep.astype(complex)] + lost
