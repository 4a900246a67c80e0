"""Dense linear-algebra primitives for small multipartite quantum systems.

States and density matrices carry an explicit subsystem dimension tuple.
Basis ordering is big-endian: the first subsystem is the most significant
index, matching numpy's C-order reshape, so ``|i, j>`` lives at flat index
``i * dim_j + j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import log2, sqrt

import numpy as np

ATOL = 1e-9

# Eigenvalues of a valid density matrix may round slightly negative.
# Anything in [-ATOL, 0) is treated as 0; below that is a real error.
_EIG_FLOOR = -1e-9

_H_SLACK = 1e-12


def _prod(dims) -> int:
    out = 1
    for d in dims:
        out *= int(d)
    return out


@dataclass(frozen=True)
class StateVector:
    """Pure state over an ordered list of subsystems.

    ``normalized=False`` skips the unit-norm check, for intermediate
    (sub-normalized) vectors such as post-selected branches.
    """

    amplitudes: np.ndarray
    dims: tuple[int, ...]
    normalized: bool = field(default=True, compare=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if _prod(self.dims) != amps.size:
            raise ValueError(
                f"dims {self.dims} imply length {_prod(self.dims)}, "
                f"got {amps.size} amplitudes"
            )
        if self.normalized:
            nrm = float(np.vdot(amps, amps).real)
            if abs(nrm - 1.0) > ATOL:
                raise ValueError(f"squared norm {nrm!r} is not 1 within {ATOL}")

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.dims)


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state over an ordered list of subsystems.

    Construction checks hermiticity, unit trace and positivity within
    ``ATOL`` unless ``validate=False``.
    """

    entries: np.ndarray
    dims: tuple[int, ...]
    validate: bool = field(default=True, compare=False)

    def __post_init__(self):
        mat = np.asarray(self.entries, dtype=np.complex128)
        object.__setattr__(self, "entries", mat)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        d = _prod(self.dims)
        if mat.shape != (d, d):
            raise ValueError(f"dims {self.dims} imply shape {(d, d)}, got {mat.shape}")
        if self.validate:
            if not np.allclose(mat, mat.conj().T, atol=ATOL, rtol=0.0):
                raise ValueError("matrix is not hermitian")
            tr = float(np.trace(mat).real)
            if abs(tr - 1.0) > ATOL:
                raise ValueError(f"trace {tr!r} is not 1 within {ATOL}")
            lo = float(np.linalg.eigvalsh(mat).min())
            if lo < _EIG_FLOOR:
                raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {lo})")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityMatrix":
        return state.to_density()


def tensor(a, b):
    """Kronecker product of two states or two density matrices."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(
            np.kron(a.amplitudes, b.amplitudes),
            a.dims + b.dims,
            normalized=a.normalized and b.normalized,
        )
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(np.kron(a.entries, b.entries), a.dims + b.dims, validate=False)
    raise TypeError("tensor expects two StateVector or two DensityMatrix operands")


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Trace out every subsystem not listed in ``keep``.

    ``keep`` holds subsystem indices; the result orders them as in the
    original system.
    """
    keep = sorted(set(int(k) for k in keep))
    n = len(rho.dims)
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {n} subsystems")
    tensor_form = rho.entries.reshape(rho.dims + rho.dims)
    # Row/column axes of traced subsystems get the same einsum label.
    row = list(range(n))
    col = [i + n if i in keep else i for i in range(n)]
    out_axes = [i for i in row if i in keep] + [i + n for i in keep]
    reduced = np.einsum(tensor_form, row + col, out_axes)
    kept_dims = tuple(rho.dims[k] for k in keep)
    d = _prod(kept_dims)
    return DensityMatrix(reduced.reshape(d, d), kept_dims, validate=False)


def measure_projective(state: StateVector, projectors, rand: float):
    """Projective measurement driven by one uniform draw ``rand`` in [0, 1).

    Returns ``(outcome_index, collapsed_state, probability)``. The
    projector family must be complete and pairwise orthogonal within
    ``ATOL``.
    """
    mats = [np.asarray(p, dtype=np.complex128) for p in projectors]
    d = state.dim
    total = np.zeros((d, d), dtype=np.complex128)
    for m in mats:
        if m.shape != (d, d):
            raise ValueError(f"projector shape {m.shape} does not match dimension {d}")
        total += m
    if not np.allclose(total, np.eye(d), atol=ATOL, rtol=0.0):
        raise ValueError("projectors do not sum to the identity")
    for i, a in enumerate(mats):
        for j, b in enumerate(mats):
            prod = a @ b
            ref = a if i == j else np.zeros_like(prod)
            if not np.allclose(prod, ref, atol=ATOL, rtol=0.0):
                raise ValueError(f"projectors {i} and {j} are not orthogonal idempotents")
    if not 0.0 <= rand < 1.0:
        raise ValueError(f"rand must lie in [0, 1), got {rand!r}")

    psi = state.amplitudes
    probs = [float(np.vdot(psi, m @ psi).real) for m in mats]
    probs = [0.0 if p < 0.0 else p for p in probs]

    outcome = None
    acc = 0.0
    for k, p in enumerate(probs):
        acc += p
        if rand < acc:
            outcome = k
            break
    if outcome is None:
        # rand fell into the rounding gap above the accumulated total;
        # assign the last outcome that has any weight.
        outcome = max(k for k, p in enumerate(probs) if p > 0.0)

    p = probs[outcome]
    collapsed = (mats[outcome] @ psi) / sqrt(p)
    return outcome, StateVector(collapsed, state.dims), p


def von_neumann_entropy(rho) -> float:
    """Entropy in bits, ``-sum(lam * log2(lam))`` with ``0 log 0 = 0``."""
    mat = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    eigs = np.linalg.eigvalsh(mat)
    lo = float(eigs.min())
    if lo < _EIG_FLOOR:
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {lo})")
    out = 0.0
    for lam in eigs:
        lam = float(lam)
        if lam > 0.0:
            out -= lam * log2(lam)
    return out


def binary_entropy(x: float) -> float:
    """Shannon entropy of a bit, with the 0 log 0 = 0 convention.

    Arguments may overshoot [0, 1] by at most 1e-12 (floating-point slack)
    and are clamped; anything further out is rejected.
    """
    x = float(x)
    if x < -_H_SLACK or x > 1.0 + _H_SLACK:
        raise ValueError(f"binary_entropy argument {x!r} outside [0, 1]")
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * log2(x) - (1.0 - x) * log2(1.0 - x)


_INV_SQRT2 = sqrt(0.5)


def bell_state(m: int) -> StateVector:
    """The four Bell states on two qubits, indexed 0..3.

    0: (|00> + |11>)/sqrt(2)    1: (|00> - |11>)/sqrt(2)
    2: (|01> + |10>)/sqrt(2)    3: (|01> - |10>)/sqrt(2)
    """
    if m not in (0, 1, 2, 3):
        raise ValueError(f"Bell index must be 0..3, got {m}")
    amps = np.zeros(4, dtype=np.complex128)
    if m < 2:
        amps[0] = _INV_SQRT2
        amps[3] = _INV_SQRT2 if m == 0 else -_INV_SQRT2
    else:
        amps[1] = _INV_SQRT2
        amps[2] = _INV_SQRT2 if m == 2 else -_INV_SQRT2
    return StateVector(amps, (2, 2))


def bell_projectors():
    """Rank-one projectors onto the four Bell states, in index order."""
    out = []
    for m in range(4):
        v = bell_state(m).amplitudes
        out.append(np.outer(v, v.conj()))
    return out
