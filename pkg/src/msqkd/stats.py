"""Observable statistics: estimation from transcripts and closed forms.

The key-rate analysis consumes conditional message distributions
P^m_{x,y} where x is Alice's disclosure (her bit, or R for reflect), y
Bob's, and m the server's broadcast message, plus the joint bit table
P_{i,j} for rounds where both measured. Estimation respects the
protocol's disclosure rules: measurement outcomes are only usable on
sampled rounds, while choices and messages are public on every round.

Cells whose conditioning event never occurred are NaN; downstream
consumers must check ``is_complete`` (the key-rate bound refuses to run
on missing cells rather than guessing).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .protocol import AttackModel, Choice, RoundRecord

R = 2  # index of the "reflected" symbol on each p_msg axis

_AXIS_NAMES = ("0", "1", "R")

LOW_CONFIDENCE_THRESHOLD = 100


@dataclass(frozen=True)
class ObservedStats:
    """Joint bit table and per-cell message distributions.

    ``p_joint[i, j]``: probability both measure and see (i, j), given
    both measured. ``p_msg[x, y, m]``: probability of message m given
    disclosures (x, y); the R axis value means that party reflected.
    Count arrays (same shapes) are present for tallied statistics and
    None for closed-form predictions.
    """

    p_joint: np.ndarray
    p_msg: np.ndarray
    joint_counts: Optional[np.ndarray] = field(default=None)
    msg_counts: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        pj = np.asarray(self.p_joint, dtype=np.float64)
        pm = np.asarray(self.p_msg, dtype=np.float64)
        object.__setattr__(self, "p_joint", pj)
        object.__setattr__(self, "p_msg", pm)
        if pj.shape != (2, 2):
            raise ValueError(f"p_joint must be 2x2, got {pj.shape}")
        if pm.shape != (3, 3, 4):
            raise ValueError(f"p_msg must be 3x3x4, got {pm.shape}")
        for name, arr in (("joint_counts", self.joint_counts), ("msg_counts", self.msg_counts)):
            if arr is not None:
                object.__setattr__(self, name, np.asarray(arr, dtype=np.int64))

    def is_complete(self) -> bool:
        return bool(np.all(np.isfinite(self.p_joint)) and np.all(np.isfinite(self.p_msg)))

    def missing_cells(self) -> list[str]:
        out = [
            f"P_{i}{j}"
            for i in range(2)
            for j in range(2)
            if not np.isfinite(self.p_joint[i, j])
        ]
        for x in range(3):
            for y in range(3):
                for m in range(4):
                    if not np.isfinite(self.p_msg[x, y, m]):
                        out.append(f"Pm_{_AXIS_NAMES[x]}{_AXIS_NAMES[y]}_{m}")
        return out

    def low_confidence_cells(self, threshold: int = LOW_CONFIDENCE_THRESHOLD) -> list[str]:
        """Cells estimated from fewer than ``threshold`` samples."""
        if self.joint_counts is None or self.msg_counts is None:
            return []
        out = []
        total = int(self.joint_counts.sum())
        for i in range(2):
            for j in range(2):
                if total > 0 and int(self.joint_counts[i, j]) < threshold:
                    out.append(f"P_{i}{j}")
        for x in range(3):
            for y in range(3):
                denom = int(self.msg_counts[x, y].sum())
                for m in range(4):
                    if denom > 0 and int(self.msg_counts[x, y, m]) < threshold:
                        out.append(f"Pm_{_AXIS_NAMES[x]}{_AXIS_NAMES[y]}_{m}")
        return out


def _finalize(joint_counts: np.ndarray, msg_counts: np.ndarray) -> ObservedStats:
    p_joint = np.full((2, 2), np.nan)
    total = joint_counts.sum()
    if total > 0:
        p_joint = joint_counts / float(total)
    p_msg = np.full((3, 3, 4), np.nan)
    for x in range(3):
        for y in range(3):
            denom = msg_counts[x, y].sum()
            if denom > 0:
                p_msg[x, y] = msg_counts[x, y] / float(denom)
    return ObservedStats(p_joint, p_msg, joint_counts.copy(), msg_counts.copy())


def tally(records: list[RoundRecord]) -> ObservedStats:
    """Maximum-likelihood cell frequencies from a sampled transcript.

    Outcome-conditioned cells use in-sample rounds only. Both-reflect
    message counts use every round, since choices and messages are
    public. Cells that never occurred stay NaN.
    """
    if not records:
        raise ValueError("tally needs a nonempty record list")
    joint_counts = np.zeros((2, 2), dtype=np.int64)
    msg_counts = np.zeros((3, 3, 4), dtype=np.int64)
    mr = Choice.MEASURE_RESEND
    for rec in records:
        a_measured = rec.choice_a is mr
        b_measured = rec.choice_b is mr
        m = rec.msg_to_a
        if not a_measured and not b_measured:
            msg_counts[R, R, m] += 1
        elif rec.in_sample:
            if a_measured and b_measured:
                joint_counts[rec.outcome_a, rec.outcome_b] += 1
                msg_counts[rec.outcome_a, rec.outcome_b, m] += 1
            elif a_measured:
                msg_counts[rec.outcome_a, R, m] += 1
            else:
                msg_counts[R, rec.outcome_b, m] += 1
    return _finalize(joint_counts, msg_counts)


def merge(a: ObservedStats, b: ObservedStats) -> ObservedStats:
    """Combine two partial tallies; associative and commutative."""
    if a.joint_counts is None or b.joint_counts is None:
        raise ValueError("merge needs tallied statistics (with counts)")
    return _finalize(a.joint_counts + b.joint_counts, a.msg_counts + b.msg_counts)


def depolarization_tables(q_f, q_r):
    """Closed-form tables as nested lists, preserving the input arithmetic
    type (exact with Fraction inputs)."""
    one = 1 - 0 * q_f  # unit of the input type
    p_joint = [
        [(one - q_f) / 2, q_f / 2],
        [q_f / 2, (one - q_f) / 2],
    ]
    keep = (one - q_r) / 2
    flip = q_r / 2
    same_bits = [keep, keep, flip, flip]
    diff_bits = [flip, flip, keep, keep]
    # Both reflect: the pair traverses both channels around the fixed
    # Bell source.
    rr_hold = (one - 2 * q_r) * (one - 2 * q_f) + (one - 2 * q_r) * q_f / 2 + q_r / 2
    rr_other = (one - 2 * q_r) * q_f / 2 + q_r / 2
    both_reflect = [rr_hold, rr_other, rr_other, rr_other]
    # One measured, one reflected: forward noise on the reflected half,
    # then the return pass.
    mixed_01 = ((one - 2 * q_r) * (one - 2 * q_f) + (one - 2 * q_r) * q_f + q_r) / 2
    mixed_23 = ((one - 2 * q_r) * q_f + q_r) / 2
    mixed = [mixed_01, mixed_01, mixed_23, mixed_23]
    p_msg = [[None] * 3 for _ in range(3)]
    for i in range(2):
        for j in range(2):
            p_msg[i][j] = same_bits if i == j else diff_bits
        p_msg[i][R] = mixed
        p_msg[R][i] = mixed
    p_msg[R][R] = both_reflect
    return p_joint, p_msg


def predict_depolarization(q_f: float, q_r: float) -> ObservedStats:
    """Exact statistics of the honest server under depolarizing noise."""
    q_f, q_r = float(q_f), float(q_r)
    for q in (q_f, q_r):
        if not 0.0 <= q <= 0.5:
            raise ValueError(f"depolarizing strength must lie in [0, 1/2], got {q!r}")
    p_joint, p_msg = depolarization_tables(q_f, q_r)
    return ObservedStats(np.array(p_joint), np.array(p_msg, dtype=np.float64))


def predict_from_attack(attack: AttackModel) -> ObservedStats:
    """Exact statistics induced by an attack's amplitudes and ancillas."""
    alphas = attack.alphas.reshape(2, 2)
    vecs = attack.eve_vectors  # [m, ij, k]
    p_joint = alphas**2

    p_msg = np.full((3, 3, 4), np.nan)
    norms = np.einsum("mik,mik->mi", vecs.conj(), vecs).real  # ||e^m_ij||^2
    for i in range(2):
        for j in range(2):
            p_msg[i, j] = norms[:, 2 * i + j]
    for i in range(2):
        # Alice measured i, Bob reflected: his branch stays coherent.
        denom = float(p_joint[i, 0] + p_joint[i, 1])
        if denom > 0.0:
            combo = alphas[i, 0] * vecs[:, 2 * i] + alphas[i, 1] * vecs[:, 2 * i + 1]
            p_msg[i, R] = np.einsum("mk,mk->m", combo.conj(), combo).real / denom
    for j in range(2):
        denom = float(p_joint[0, j] + p_joint[1, j])
        if denom > 0.0:
            combo = alphas[0, j] * vecs[:, j] + alphas[1, j] * vecs[:, 2 + j]
            p_msg[R, j] = np.einsum("mk,mk->m", combo.conj(), combo).real / denom
    both = np.einsum("i,mik->mk", attack.alphas, vecs)
    p_msg[R, R] = np.einsum("mk,mk->m", both.conj(), both).real
    return ObservedStats(p_joint.astype(np.float64), p_msg)


_CELL_ORDER = [f"P_{i}{j}" for i in range(2) for j in range(2)] + [
    f"Pm_{x}{y}_{m}" for x in _AXIS_NAMES for y in _AXIS_NAMES for m in range(4)
]


def _cell_ref(name: str):
    """(table kind, index tuple) for a cell name."""
    if name.startswith("P_"):
        i, j = int(name[2]), int(name[3])
        return "joint", (i, j)
    body, m = name[3:].split("_")
    x = _AXIS_NAMES.index(body[0])
    y = _AXIS_NAMES.index(body[1])
    return "msg", (x, y, int(m))


def to_text(stats: ObservedStats) -> str:
    """Flat `cell,value,count` table; values round-trip exactly via repr."""
    lines = ["cell,value,count"]
    for name in _CELL_ORDER:
        kind, idx = _cell_ref(name)
        if kind == "joint":
            value = stats.p_joint[idx]
            count = None if stats.joint_counts is None else stats.joint_counts[idx]
        else:
            value = stats.p_msg[idx]
            count = None if stats.msg_counts is None else stats.msg_counts[idx]
        count_text = "" if count is None else str(int(count))
        lines.append(f"{name},{float(value)!r},{count_text}")
    return "\n".join(lines) + "\n"


def from_text(text: str) -> ObservedStats:
    p_joint = np.full((2, 2), np.nan)
    p_msg = np.full((3, 3, 4), np.nan)
    joint_counts = np.zeros((2, 2), dtype=np.int64)
    msg_counts = np.zeros((3, 3, 4), dtype=np.int64)
    have_counts = False
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("cell,"):
            continue
        name, value, count = line.split(",")
        kind, idx = _cell_ref(name)
        if kind == "joint":
            p_joint[idx] = float(value)
            if count:
                joint_counts[idx] = int(count)
                have_counts = True
        else:
            p_msg[idx] = float(value)
            if count:
                msg_counts[idx] = int(count)
                have_counts = True
    if have_counts:
        return ObservedStats(p_joint, p_msg, joint_counts, msg_counts)
    return ObservedStats(p_joint, p_msg)
