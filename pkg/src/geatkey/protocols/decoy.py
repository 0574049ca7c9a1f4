"""Decoy-state BB84 with phase-randomized weak coherent pulses.

Photon numbers are Poisson distributed.  Only the single-photon block carries
an entropy objective; its channel is a Choi variable J1 on a qubit input and
the 3-dim detection space.  Yields Y_n for the other photon numbers up to the
cut-off, plus bounded remainders for the truncated tail, enter the test
statistics linearly.

Auxiliary variable layout: Y_n for n in ``yield_numbers`` (each a 2 x 6
table over Alice's test state and Bob's outcome), then one remainder table per
intensity.  Test statistics are ordered intensity-major, then Alice's state,
then Bob's outcome.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.special import gammainc

from ..entropy import ConstraintOperators, ObjectiveSpec
from ..problem import ProtocolProblem
from ..quantum import DEFAULT_REL_FLOOR, ChoiVariable, binary_entropy
from .common import (ALICE_TEST_LABELS, BOB_LABELS, KET0, KET1, MINUS, PLUS, VAC,
                     alice_test_povm, bell_source, bob_povm, key_map_kraus, transmittance)

DEFAULT_INTENSITIES = (0.9, 0.02, 0.001)
DEFAULT_THETA = float(np.arcsin(0.1))
# smallest remainder bound kept open, so the feasible set keeps an interior
MIN_REMAINDER = 1e-12


def poisson(mu: float, n_max: int) -> np.ndarray:
    return np.array([np.exp(-mu) * mu ** n / factorial(n) for n in range(n_max + 1)])


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _click_probs(theta, state, basis_vecs):
    """Probability that one photon hits detector 0 / 1 of the given basis."""
    out = rotation(theta) @ state
    return np.array([abs(np.vdot(b, out)) ** 2 for b in basis_vecs])


_BASES = {"Z": (KET0, KET1), "X": (PLUS, MINUS)}


def n_photon_outcomes(n: int, eta: float, theta: float, state, basis: str) -> np.ndarray:
    """(out0, out1, no-click) for an n-photon pulse with squashed double clicks.

    Each photon survives with probability eta and picks a detector
    independently; double clicks are assigned uniformly to 0 or 1.
    """
    c2, s2 = _click_probs(theta, state, _BASES[basis])
    none = (1 - eta) ** n
    a_c = (1 - eta + eta * c2) ** n
    a_s = (1 - eta + eta * s2) ** n
    return np.array([0.5 * (a_c - a_s + 1 - none), 0.5 * (a_s - a_c + 1 - none), none])


def coherent_outcomes(mu: float, eta: float, theta: float, state, basis: str) -> np.ndarray:
    """(out0, out1, no-click) for a phase-randomized coherent pulse of mean mu."""
    c2, s2 = _click_probs(theta, state, _BASES[basis])
    m0, m1 = eta * mu * c2, eta * mu * s2
    only0 = (1 - np.exp(-m0)) * np.exp(-m1)
    only1 = np.exp(-m0) * (1 - np.exp(-m1))
    both = (1 - np.exp(-m0)) * (1 - np.exp(-m1))
    return np.array([only0 + both / 2, only1 + both / 2, np.exp(-m0 - m1)])


def _joint_table(outcome_fn, gamma):
    """2 x 6 table p(a, b) for Alice's test states and Bob's six outcomes."""
    rows = []
    for state in (PLUS, MINUS):
        z = outcome_fn(state, "Z")
        x = outcome_fn(state, "X")
        rows.append(0.5 * np.concatenate([(1 - gamma) * z, gamma * x]))
    return np.array(rows)


def single_photon_kraus(theta: float, eta: float) -> list[np.ndarray]:
    """Misalignment rotation followed by beamsplitter loss into the detection space."""
    u = rotation(theta).astype(complex)
    keep = np.sqrt(eta) * np.vstack([u, np.zeros((1, 2))])
    lost = [np.sqrt(1 - eta) * np.outer(VAC, e) for e in np.eye(2)]
    return [keep] + lost


@dataclass
class DecoyBB84Model:
    intensities: tuple = DEFAULT_INTENSITIES
    p_mu_given_t: tuple = (1 / 3, 1 / 3, 1 / 3)
    gamma: float = 0.1
    theta: float = DEFAULT_THETA
    loss_db: float = 0.0
    n_ph: int = 10
    rel_floor: float = DEFAULT_REL_FLOOR
    spec: ObjectiveSpec = field(init=False)
    ops: ConstraintOperators = field(init=False)
    photon_probs: np.ndarray = field(init=False)
    honest_yields: np.ndarray = field(init=False)
    q_hon: np.ndarray = field(init=False)
    honest_choi: ChoiVariable = field(init=False)

    def __post_init__(self):
        mus = tuple(float(m) for m in self.intensities)
        if len(set(mus)) != len(mus) or min(mus) <= 0:
            raise ValueError("intensities must be distinct and positive")
        if len(self.p_mu_given_t) != len(mus):
            raise ValueError("need one test probability per intensity")
        if abs(sum(self.p_mu_given_t) - 1) > 1e-12:
            raise ValueError("p(mu|t) must sum to 1")
        if self.n_ph < 0:
            raise ValueError("photon cut-off must be nonnegative")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        self.intensities = mus
        g, z = key_map_kraus()
        src = bell_source()
        self.spec = ObjectiveSpec(tuple(g), tuple(z), self.p_single * (1 - self.gamma) ** 2,
                                  src, src, 3, self.rel_floor)
        labels = [(a, b) for a in ALICE_TEST_LABELS for b in BOB_LABELS]
        self.ops = ConstraintOperators.build(src, alice_test_povm(), bob_povm(self.gamma),
                                             labels)
        self.photon_probs = np.array([poisson(mu, self.n_ph) for mu in mus])
        eta = self.eta
        self.honest_yields = np.array([
            _joint_table(lambda s, b, n=n: n_photon_outcomes(n, eta, self.theta, s, b),
                         self.gamma)
            for n in range(self.n_ph + 1)])
        self.honest_choi = ChoiVariable.from_kraus(single_photon_kraus(self.theta, eta))
        self.q_hon = np.concatenate([p * t.ravel() for p, t in
                                     zip(self.p_mu_given_t, self.intensity_statistics())])

    @property
    def eta(self) -> float:
        return transmittance(self.loss_db)

    @property
    def mu_signal(self) -> float:
        return self.intensities[0]

    @property
    def p_single(self) -> float:
        """Probability of a single photon in a generation (signal-intensity) pulse."""
        return self.mu_signal * np.exp(-self.mu_signal)

    @property
    def p_tot(self) -> np.ndarray:
        return self.photon_probs.sum(axis=1)

    @property
    def photon_tail(self) -> np.ndarray:
        """1 - p_tot per intensity, without the cancellation of the subtraction."""
        return gammainc(self.n_ph + 1, np.array(self.intensities))

    def intensity_statistics(self) -> np.ndarray:
        """Per-intensity 2 x 6 tables p(a, b | mu) from the coherent-state formula."""
        return np.array([
            _joint_table(lambda s, b, mu=mu: coherent_outcomes(mu, self.eta, self.theta, s, b),
                         self.gamma)
            for mu in self.intensities])

    @property
    def signal_detection(self) -> float:
        return 1 - np.exp(-self.eta * self.mu_signal)

    @property
    def qber(self) -> float:
        """Z-basis error rate of signal pulses given detection."""
        wrong = coherent_outcomes(self.mu_signal, self.eta, self.theta, KET0, "Z")[1]
        return float(wrong / self.signal_detection)

    @property
    def h_hon(self) -> float:
        return (1 - self.gamma) ** 2 * self.signal_detection * binary_entropy(self.qber)

    @property
    def yield_numbers(self) -> list[int]:
        return [n for n in range(self.n_ph + 1) if n != 1]

    def problem(self) -> ProtocolProblem:
        return decoy_objective_and_constraints(self)


def decoy_objective_and_constraints(model: DecoyBB84Model) -> ProtocolProblem:
    """Assemble the decoy feasible set over (J1, yields, remainders).

    The single-photon yield is eliminated in favour of Phi(J1).  The slack
    variables of the modified primal are added by the optimizer.
    """
    n_int = len(model.intensities)
    nb = len(model.ops)  # 12 outcomes per intensity
    ny = model.yield_numbers
    k = nb * (len(ny) + n_int)
    m = nb * n_int
    stat_choi = np.zeros((m, model.ops.matrix.shape[1]))
    stat_aux = np.zeros((m, k))
    for i, pt in enumerate(model.p_mu_given_t):
        rows = slice(i * nb, (i + 1) * nb)
        pn = model.photon_probs[i]
        if model.n_ph >= 1:
            stat_choi[rows] = pt * pn[1] * model.ops.matrix
        for j, n in enumerate(ny):
            stat_aux[rows, j * nb:(j + 1) * nb] = pt * pn[n] * np.eye(nb)
        off = nb * (len(ny) + i)
        stat_aux[rows, off:off + nb] = pt * np.eye(nb)
    lower = np.zeros(k)
    upper = np.ones(k)
    for i in range(n_int):
        off = nb * (len(ny) + i)
        upper[off:off + nb] = max(model.photon_tail[i], MIN_REMAINDER)
    # sum_b Y_n^{ab} = p(a|t,n) = 1/2
    n_a = len(ALICE_TEST_LABELS)
    n_b = nb // n_a
    aux_eq = np.zeros((len(ny) * n_a, k))
    for j in range(len(ny)):
        for a in range(n_a):
            aux_eq[j * n_a + a, j * nb + a * n_b:j * nb + (a + 1) * n_b] = 1.0
    aux_eq_rhs = np.full(aux_eq.shape[0], 0.5)
    honest_y = np.concatenate([model.honest_yields[n].ravel() for n in ny])
    tables = model.intensity_statistics()
    rem = []
    for i in range(n_int):
        pn = model.photon_probs[i]
        partial = sum(pn[n] * model.honest_yields[n] for n in range(model.n_ph + 1))
        rem.append(np.clip((tables[i] - partial).ravel(), 0.0, upper[nb * (len(ny) + i)]))
    honest_aux = np.concatenate([honest_y] + rem)
    labels = tuple((mu, a, b) for mu in model.intensities for (a, b) in model.ops.labels)
    return ProtocolProblem(spec=model.spec, stat_choi=stat_choi, q_hon=model.q_hon,
                           honest_choi=model.honest_choi.matrix, gamma=model.gamma,
                           stat_aux=stat_aux, aux_lower=lower, aux_upper=upper,
                           aux_eq=aux_eq, aux_eq_rhs=aux_eq_rhs, honest_aux=honest_aux,
                           labels=labels, h_hon=model.h_hon)


def build_decoy_model(intensities=DEFAULT_INTENSITIES, p_mu_given_t=(1 / 3, 1 / 3, 1 / 3),
                      gamma: float = 0.1, theta: float = DEFAULT_THETA, loss_db: float = 0.0,
                      N_ph: int = 10, rel_floor: float = DEFAULT_REL_FLOOR) -> DecoyBB84Model:
    return DecoyBB84Model(tuple(intensities), tuple(p_mu_given_t), gamma, theta, loss_db,
                          N_ph, rel_floor)
