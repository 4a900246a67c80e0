"""Equivalence of the prepare-and-measure and entanglement-based runs.

In the prepare-and-measure picture each party copies the rounds they
measure into a private register (CNOT) and the attack isometry consumes
the returned qubits. In the entanglement picture the parties receive the
attack's full pre-measurement state and measure each position in Z
(where they would have measured) or X (where they would have reflected),
aborting on any |-> outcome and relabeling |+> outcomes to bit 0.

Both runs end in a pure state over (private A, private B, message
registers, ancilla). This module builds both states for N in {1, 2}
rounds and checks they coincide on the non-abort branch, which is the
computational content of the security reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .protocol import AttackModel
from .qmath import StateVector

_ISO_TOL = 1e-9
_DIM_CAP = 4096

_IS2 = math.sqrt(0.5)


@dataclass(frozen=True)
class NRoundAttack:
    """Joint attack over N rounds (N in {1, 2}).

    ``alphas[i, j]``: real source amplitudes over the two parties' N-bit
    basis states, big-endian (round 1 is the high bit). Signs are
    allowed: the source in the entanglement picture is adversarial and
    may emit states outside the prepare-and-measure family (those are
    exactly the ones the X-basis test catches).
    ``eve_vectors[m, i, j, k]``: ancilla vector attached to joint message
    index m (base-4 digits, round 1 most significant) and returned state
    |i, j>. Isometry: sum_m <f^m_ij|f^m_pq> = delta_ip delta_jq.
    """

    n: int
    alphas: np.ndarray
    eve_vectors: np.ndarray

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("only N=1 and N=2 are supported")
        side = 2**self.n
        alphas = np.asarray(self.alphas, dtype=np.float64)
        vecs = np.asarray(self.eve_vectors, dtype=np.complex128)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "eve_vectors", vecs)
        if alphas.shape != (side, side):
            raise ValueError(f"alphas must be {side}x{side}, got {alphas.shape}")
        total = float(np.sum(alphas**2))
        if abs(total - 1.0) > _ISO_TOL:
            raise ValueError(f"sum of squared amplitudes is {total!r}, not 1")
        if vecs.ndim != 4 or vecs.shape[:3] != (4**self.n, side, side):
            raise ValueError(
                f"eve_vectors must have shape ({4**self.n}, {side}, {side}, d), got {vecs.shape}"
            )
        d = vecs.shape[3]
        if side * side * 4**self.n * d > _DIM_CAP:
            raise ValueError(f"total dimension exceeds {_DIM_CAP}")
        gram = np.einsum("mijk,mpqk->ijpq", vecs.conj(), vecs)
        eye = np.eye(side * side).reshape(side, side, side, side)
        if not np.allclose(gram, eye, atol=_ISO_TOL, rtol=0.0):
            raise ValueError("eve_vectors do not satisfy the isometry condition")

    @property
    def eve_dim(self) -> int:
        return self.eve_vectors.shape[3]

    @property
    def dims(self) -> tuple[int, int, int, int]:
        side = 2**self.n
        return (side, side, 4**self.n, self.eve_dim)

    @classmethod
    def from_single(cls, attack: AttackModel) -> "NRoundAttack":
        vecs = attack.eve_vectors.reshape(4, 2, 2, attack.eve_dim)
        return cls(1, attack.alphas.reshape(2, 2), vecs)

    @classmethod
    def product(cls, first: AttackModel, second: AttackModel) -> "NRoundAttack":
        """Two independent single-round attacks acting round by round."""
        a1 = first.alphas.reshape(2, 2)
        a2 = second.alphas.reshape(2, 2)
        alphas = np.einsum("ab,cd->acbd", a1, a2).reshape(4, 4)
        v1 = first.eve_vectors.reshape(4, 2, 2, first.eve_dim)
        v2 = second.eve_vectors.reshape(4, 2, 2, second.eve_dim)
        vecs = np.einsum("aijk,bpql->abipjqkl", v1, v2).reshape(
            16, 4, 4, first.eve_dim * second.eve_dim
        )
        return cls(2, alphas, vecs)

    @classmethod
    def random(cls, n: int, eve_dim: int, rng: np.random.Generator) -> "NRoundAttack":
        side = 2**n
        cols = side * side
        rows = (4**n) * eve_dim
        if side * side * 4**n * eve_dim > _DIM_CAP:
            raise ValueError(f"total dimension exceeds {_DIM_CAP}")
        raw = rng.standard_normal((side, side))
        alphas = np.abs(raw)
        alphas /= math.sqrt(float(np.sum(alphas**2)))
        m = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
        q, _ = np.linalg.qr(m)
        vecs = np.ascontiguousarray(
            q.T.reshape(side, side, 4**n, eve_dim).transpose(2, 0, 1, 3)
        )
        return cls(n, alphas, vecs)


@dataclass(frozen=True)
class BasisChoice:
    """Per-round choices: bit 1 = measure-resend (Z), 0 = reflect (X)."""

    theta_a: tuple[int, ...]
    theta_b: tuple[int, ...]

    def __post_init__(self):
        ta = tuple(int(b) for b in self.theta_a)
        tb = tuple(int(b) for b in self.theta_b)
        object.__setattr__(self, "theta_a", ta)
        object.__setattr__(self, "theta_b", tb)
        if len(ta) != len(tb):
            raise ValueError("theta_a and theta_b must have equal length")
        if not ta:
            raise ValueError("choices must cover at least one round")
        if any(b not in (0, 1) for b in ta + tb):
            raise ValueError("choice entries must be bits")

    @property
    def n(self) -> int:
        return len(self.theta_a)

    @staticmethod
    def _mask(bits: tuple[int, ...]) -> int:
        out = 0
        for b in bits:
            out = (out << 1) | b
        return out

    @property
    def mask_a(self) -> int:
        return self._mask(self.theta_a)

    @property
    def mask_b(self) -> int:
        return self._mask(self.theta_b)


@dataclass(frozen=True)
class EquivalenceResult:
    fidelity: float
    non_abort_prob: float
    abort_only: bool
    passed: bool


def _check_choice(attack: NRoundAttack, choice: BasisChoice):
    if choice.n != attack.n:
        raise ValueError(f"choice covers {choice.n} rounds, attack {attack.n}")


def build_pm_state(attack: NRoundAttack, choice: BasisChoice) -> StateVector:
    """Post-attack state of the prepare-and-measure run.

    Private registers hold the measured bits (zero at reflected
    positions); the attack consumed the returned qubits, leaving the
    message registers and the ancilla.
    """
    _check_choice(attack, choice)
    side, _, msgs, d = attack.dims
    mask_a, mask_b = choice.mask_a, choice.mask_b
    acc = np.zeros((side, side, msgs, d), dtype=np.complex128)
    for i in range(side):
        for j in range(side):
            a = float(attack.alphas[i, j])
            if a == 0.0:
                continue
            acc[i & mask_a, j & mask_b] += a * attack.eve_vectors[:, i, j]
    return StateVector(acc.reshape(-1), attack.dims)


def source_state(attack: NRoundAttack) -> StateVector:
    """The attack's full pre-measurement state over (A, B, messages, ancilla)."""
    amps = np.einsum("ij,mijk->ijmk", attack.alphas, attack.eve_vectors)
    return StateVector(amps.reshape(-1), attack.dims)


def project_non_abort(source: StateVector, choice: BasisChoice):
    """Measure the entanglement-based run's qubits and keep the non-abort branch.

    Z positions stay as bits; X positions are projected onto |+> and
    relabeled to 0. Returns (conditional state or None, non_abort_prob).
    """
    n = choice.n
    side = 2**n
    dims = source.dims
    if len(dims) != 4 or dims[0] != side or dims[1] != side:
        raise ValueError(f"source dims {dims} do not match {n} rounds")
    amps = source.amplitudes.reshape(dims)
    mask_a, mask_b = choice.mask_a, choice.mask_b
    zeros = (2 * n) - bin(mask_a).count("1") - bin(mask_b).count("1")
    weight = _IS2**zeros
    acc = np.zeros_like(amps)
    for i in range(side):
        for j in range(side):
            acc[i & mask_a, j & mask_b] += weight * amps[i, j]
    prob = float(np.vdot(acc, acc).real)
    if prob <= 0.0:
        return None, 0.0
    cond = acc.reshape(-1) / math.sqrt(prob)
    return StateVector(cond, dims, normalized=False), prob


def run_entanglement(attack: NRoundAttack, choice: BasisChoice):
    """Entanglement-based run against the attack's own source state."""
    _check_choice(attack, choice)
    return project_non_abort(source_state(attack), choice)


def verify_equivalence(
    attack: NRoundAttack, choice: BasisChoice, tol: float = 1e-9
) -> EquivalenceResult:
    """Compare both runs: fidelity of the non-abort conditional state
    against the prepare-and-measure state.

    Passing requires both a matching state and a positive non-abort
    probability; a run that aborts with certainty reports abort_only
    and does not pass (sources doing that sit outside the
    prepare-and-measure family).
    """
    pm = build_pm_state(attack, choice)
    cond, prob = run_entanglement(attack, choice)
    if cond is None:
        return EquivalenceResult(0.0, 0.0, True, False)
    overlap = np.vdot(pm.amplitudes, cond.amplitudes)
    fidelity = float(abs(overlap) ** 2)
    passed = fidelity >= 1.0 - tol and prob > 0.0
    return EquivalenceResult(fidelity, prob, False, passed)
