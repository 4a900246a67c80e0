"""Two-qubit depolarizing noise and its Pauli unraveling.

The channel acts on a two-qubit state as

    E_Q(rho) = (1 - 2Q) rho + Q/2 * I_4,

which mixes toward the maximally mixed state (Q = 1/2 erases everything).
The same map is realized stochastically by leaving the state alone with
probability ``1 - 2Q + Q/8`` and otherwise applying one of the fifteen
non-identity two-qubit Pauli operators, each with probability ``Q/8``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qmath import DensityMatrix

_I2 = np.eye(2, dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

_SINGLE = (_I2, _X, _Y, _Z)

# Index 4*a + b encodes P_a (x) P_b with a, b over (I, X, Y, Z); index 0
# is the identity. The sampling kernel relies on this ordering.
TWO_QUBIT_PAULIS = tuple(np.kron(_SINGLE[a], _SINGLE[b]) for a in range(4) for b in range(4))

PAULI_NAMES = tuple(f"{a}{b}" for a in "IXYZ" for b in "IXYZ")


def twirl_weights(q):
    """Probabilities (identity, each of the 15 other Paulis) realizing E_q.

    Works with exact rational inputs as well as floats; the total is
    ``p_id + 15 * p_other = 1`` identically.
    """
    p_other = q / 8
    p_id = 1 - 2 * q + q / 8
    return p_id, p_other


@dataclass(frozen=True)
class DepolarizingChannel:
    """Two-qubit depolarizing channel with strength ``q`` in [0, 1/2]."""

    q: float

    def __post_init__(self):
        q = float(self.q)
        object.__setattr__(self, "q", q)
        if not 0.0 <= q <= 0.5:
            raise ValueError(f"depolarizing strength must lie in [0, 1/2], got {q!r}")

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        """Apply the channel to a two-qubit density matrix."""
        if rho.dim != 4:
            raise ValueError(f"channel acts on dimension 4, got {rho.dim}")
        mixed = (1.0 - 2.0 * self.q) * rho.entries + (self.q / 2.0) * np.eye(4)
        return DensityMatrix(mixed, rho.dims, validate=False)


def apply(channel: DepolarizingChannel, rho: DensityMatrix) -> DensityMatrix:
    return channel.apply(rho)


def sample_pauli(channel: DepolarizingChannel, rand: float) -> int:
    """Draw a Pauli index from the twirl realizing the channel.

    ``rand`` is one uniform draw in [0, 1). Returns an index into
    ``TWO_QUBIT_PAULIS``; 0 means the identity was applied.
    """
    if not 0.0 <= rand < 1.0:
        raise ValueError(f"rand must lie in [0, 1), got {rand!r}")
    p_id, p_other = twirl_weights(channel.q)
    if rand < p_id:
        return 0
    # The remaining mass is 15 equal slabs of width q/8.
    k = 1 + int((rand - p_id) / p_other)
    return 15 if k > 15 else k


def compose(first: DepolarizingChannel, second: DepolarizingChannel):
    """Map equal to applying ``first`` and then ``second``."""

    def composed(rho: DensityMatrix) -> DensityMatrix:
        return second.apply(first.apply(rho))

    return composed
