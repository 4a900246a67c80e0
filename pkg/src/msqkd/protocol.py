"""Round-by-round simulation of the mediated semi-quantum protocol.

A server (trusted or adversarial) prepares two qubits and sends one to
Alice and one to Bob. Each party independently either measures in the
computational basis and resends what they saw (measure-resend) or
reflects the qubit untouched. The server Bell-measures the returns and
broadcasts a message 0..3 naming the outcome. Raw key bits come from
rounds where both parties measured; a public sample of rounds is
disclosed to estimate statistics.

Honest runs model both channel passes as two-qubit depolarizing noise
(Pauli-twirl sampled, so every round stays a pure-state computation).
Adversarial runs replace source and server by an AttackModel: a source
amplitude vector plus an isometry attaching an ancilla to each possible
returned basis state, with the broadcast message its classical output.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import engine
from ._engine_py import attack_round, eve_tables, honest_round
from .rng import Stream

_ISO_TOL = 1e-9

EVE_DIM_CAP = 16


class Choice(enum.Enum):
    MEASURE_RESEND = "M"
    REFLECT = "R"


class Mode(enum.Enum):
    FLIP = "FLIP"
    NOFLIP = "NOFLIP"


class ModePolicy(enum.Enum):
    AUTO = "auto"
    FORCE_FLIP = "flip"
    FORCE_NOFLIP = "noflip"


@dataclass(frozen=True)
class AttackModel:
    """Adversarial source and server.

    ``alphas`` holds the four non-negative source amplitudes over |ab>
    (indexed a*2+b). ``eve_vectors`` has shape (4, 4, d) indexed by
    [message m, joint index ij, ancilla coordinate]; column (i, j) of the
    stacked (m, coordinate) axis must be orthonormal, which is exactly
    the isometry condition sum_m <e^m_ij|e^m_kl> = delta_ik delta_jl.
    """

    alphas: np.ndarray
    eve_vectors: np.ndarray

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=np.float64).reshape(-1)
        vecs = np.asarray(self.eve_vectors, dtype=np.complex128)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "eve_vectors", vecs)
        if alphas.shape != (4,):
            raise ValueError(f"alphas must have length 4, got shape {alphas.shape}")
        if np.any(alphas < 0.0):
            raise ValueError("source amplitudes must be non-negative")
        total = float(np.dot(alphas, alphas))
        if abs(total - 1.0) > _ISO_TOL:
            raise ValueError(f"sum of squared amplitudes is {total!r}, not 1")
        if vecs.ndim != 3 or vecs.shape[:2] != (4, 4):
            raise ValueError(f"eve_vectors must have shape (4, 4, d), got {vecs.shape}")
        if not 1 <= vecs.shape[2] <= EVE_DIM_CAP:
            raise ValueError(f"ancilla dimension must lie in 1..{EVE_DIM_CAP}")
        gram = np.einsum("mik,mjk->ij", vecs.conj(), vecs)
        if not np.allclose(gram, np.eye(4), atol=_ISO_TOL, rtol=0.0):
            raise ValueError("eve_vectors do not satisfy the isometry condition")

    @property
    def eve_dim(self) -> int:
        return self.eve_vectors.shape[2]

    def vector(self, m: int, i: int, j: int) -> np.ndarray:
        """Ancilla vector attached to message ``m`` and returned state |ij>."""
        return self.eve_vectors[m, 2 * i + j]

    @classmethod
    def honest(cls, q_return: float = 0.0) -> "AttackModel":
        """The honest server, optionally preceded by return-channel noise.

        With ``q_return`` > 0 the ancilla records which twirl Pauli acted,
        one coordinate per Kraus branch, so the induced statistics match
        an honest run whose return channel depolarizes at that strength.
        """
        bell = np.array(
            [
                [1.0, 0.0, 0.0, 1.0],
                [1.0, 0.0, 0.0, -1.0],
                [0.0, 1.0, 1.0, 0.0],
                [0.0, 1.0, -1.0, 0.0],
            ]
        ) * math.sqrt(0.5)
        alphas = np.array([1.0, 0.0, 0.0, 1.0]) * math.sqrt(0.5)
        if q_return == 0.0:
            vecs = bell.astype(np.complex128).reshape(4, 4, 1)
            return cls(alphas, vecs)
        from .channels import TWO_QUBIT_PAULIS, twirl_weights

        p_id, p_other = twirl_weights(float(q_return))
        weights = np.array([p_id] + [p_other] * 15)
        vecs = np.zeros((4, 4, 16), dtype=np.complex128)
        for k, pauli in enumerate(TWO_QUBIT_PAULIS):
            # <phi_m| P_k |ij> scaled by the branch weight's square root.
            amp = bell @ pauli
            vecs[:, :, k] = math.sqrt(weights[k]) * amp
        return cls(alphas, vecs)

    @classmethod
    def random(cls, eve_dim: int, rng: np.random.Generator) -> "AttackModel":
        """Haar-ish random valid attack with the given ancilla dimension."""
        if not 1 <= eve_dim <= EVE_DIM_CAP:
            raise ValueError(f"ancilla dimension must lie in 1..{EVE_DIM_CAP}")
        raw = rng.standard_normal(4)
        alphas = np.abs(raw)
        alphas /= math.sqrt(float(np.dot(alphas, alphas)))
        m = rng.standard_normal((4 * eve_dim, 4)) + 1j * rng.standard_normal((4 * eve_dim, 4))
        q, _ = np.linalg.qr(m)
        vecs = np.ascontiguousarray(q.T.reshape(4, 4, eve_dim).transpose(1, 0, 2))
        return cls(alphas, vecs)


NoisePair = tuple[float, float]


@dataclass(frozen=True)
class ProtocolConfig:
    """One experiment's parameters.

    ``noise`` is either an (forward, return) depolarizing pair for the
    honest server or an AttackModel. ``p_m`` is each party's independent
    probability of choosing measure-resend.
    """

    rounds: int
    p_m: float = 0.5
    sample_fraction: float = 0.1
    noise: Union[NoisePair, AttackModel] = (0.0, 0.0)
    seed: int = 0
    mode_policy: ModePolicy = ModePolicy.AUTO

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be non-negative")
        if not 0.0 < self.p_m < 1.0:
            raise ValueError("p_m must lie strictly between 0 and 1")
        if not 0.0 < self.sample_fraction < 1.0:
            raise ValueError("sample_fraction must lie strictly between 0 and 1")
        if not isinstance(self.noise, AttackModel):
            qf, qr = self.noise
            qf, qr = float(qf), float(qr)
            if not (0.0 <= qf <= 0.5 and 0.0 <= qr <= 0.5):
                raise ValueError("depolarizing strengths must lie in [0, 1/2]")
            object.__setattr__(self, "noise", (qf, qr))
        if not isinstance(self.mode_policy, ModePolicy):
            raise ValueError(f"mode_policy must be a ModePolicy, got {self.mode_policy!r}")

    @property
    def adversarial(self) -> bool:
        return isinstance(self.noise, AttackModel)


@dataclass(frozen=True)
class RoundRecord:
    index: int
    choice_a: Choice
    choice_b: Choice
    outcome_a: Optional[int]
    outcome_b: Optional[int]
    msg_to_a: int
    msg_to_b: int
    in_sample: bool = False

    def __post_init__(self):
        for choice, outcome, who in (
            (self.choice_a, self.outcome_a, "a"),
            (self.choice_b, self.outcome_b, "b"),
        ):
            measured = choice is Choice.MEASURE_RESEND
            if measured != (outcome is not None):
                raise ValueError(f"outcome_{who} must be present iff choice_{who} measures")
        for msg in (self.msg_to_a, self.msg_to_b):
            if msg not in (0, 1, 2, 3):
                raise ValueError(f"message must be 0..3, got {msg!r}")


def _attack_buffers(attack: AttackModel):
    re = np.ascontiguousarray(attack.eve_vectors.real)
    im = np.ascontiguousarray(attack.eve_vectors.imag)
    return np.ascontiguousarray(attack.alphas), re, im


def _records_from_arrays(ca, cb, oa, ob, msg) -> list[RoundRecord]:
    mr, refl = Choice.MEASURE_RESEND, Choice.REFLECT
    out = []
    for idx in range(len(ca)):
        a_measured = ca[idx] == 1
        b_measured = cb[idx] == 1
        m = int(msg[idx])
        out.append(
            RoundRecord(
                index=idx,
                choice_a=mr if a_measured else refl,
                choice_b=mr if b_measured else refl,
                outcome_a=int(oa[idx]) if a_measured else None,
                outcome_b=int(ob[idx]) if b_measured else None,
                msg_to_a=m,
                msg_to_b=m,
            )
        )
    return out


def simulate(cfg: ProtocolConfig, workers: int = 1) -> list[RoundRecord]:
    """Run all rounds; identical output for identical seed at any worker count."""
    n = cfg.rounds
    if n == 0:
        return []
    ca = np.empty(n, dtype=np.int8)
    cb = np.empty(n, dtype=np.int8)
    oa = np.empty(n, dtype=np.int8)
    ob = np.empty(n, dtype=np.int8)
    msg = np.empty(n, dtype=np.int8)

    if cfg.adversarial:
        alphas, eve_re, eve_im = _attack_buffers(cfg.noise)

        def run_chunk(start: int, count: int):
            sl = slice(start, start + count)
            engine.run_rounds_attack(
                cfg.seed, start, count, cfg.p_m, alphas, eve_re, eve_im,
                ca[sl], cb[sl], oa[sl], ob[sl], msg[sl],
            )

    else:
        qf, qr = cfg.noise

        def run_chunk(start: int, count: int):
            sl = slice(start, start + count)
            engine.run_rounds_honest(
                cfg.seed, start, count, cfg.p_m, qf, qr,
                ca[sl], cb[sl], oa[sl], ob[sl], msg[sl],
            )

    if workers <= 1 or n < 2 * workers:
        run_chunk(0, n)
    else:
        from concurrent.futures import ThreadPoolExecutor

        chunk = -(-n // workers)
        starts = list(range(0, n, chunk))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_chunk, s, min(chunk, n - s)) for s in starts]
            for f in futures:
                f.result()

    return _records_from_arrays(ca, cb, oa, ob, msg)


def run_round(cfg: ProtocolConfig, index: int, rand: Optional[Stream] = None) -> RoundRecord:
    """Simulate a single round; ``rand`` defaults to the round's own stream."""
    stream = rand if rand is not None else Stream(cfg.seed, index)
    if cfg.adversarial:
        alphas, eve_re, eve_im = _attack_buffers(cfg.noise)
        er, ei, d = eve_tables(eve_re, eve_im)
        a = tuple(float(x) for x in alphas)
        ca, cb, oa, ob, m = attack_round(stream, cfg.p_m, a, er, ei, d)
    else:
        qf, qr = cfg.noise
        ca, cb, oa, ob, m = honest_round(stream, cfg.p_m, qf, qr)
    mr, refl = Choice.MEASURE_RESEND, Choice.REFLECT
    return RoundRecord(
        index=index,
        choice_a=mr if ca else refl,
        choice_b=mr if cb else refl,
        outcome_a=oa if ca else None,
        outcome_b=ob if cb else None,
        msg_to_a=m,
        msg_to_b=m,
    )


def sampling_stage(records: list[RoundRecord], sample_fraction: float, rand: Stream):
    """Flag a uniform ceil(fraction*N) subset for disclosure.

    Returns (new records, abort flag). The abort flag is true when any
    record shows different messages to the two parties, which the
    protocol treats as a broken server.
    """
    n = len(records)
    if n == 0:
        raise ValueError("sampling_stage needs a nonempty record list")
    if not 0.0 < sample_fraction <= 1.0:
        raise ValueError("sample_fraction must lie in (0, 1]")
    k = math.ceil(sample_fraction * n)
    order = list(range(n))
    for i in range(k):
        j = i + int(rand.uniform() * (n - i))
        order[i], order[j] = order[j], order[i]
    chosen = set(order[:k])
    out = [
        replace(rec, in_sample=True) if idx in chosen else rec
        for idx, rec in enumerate(records)
    ]
    abort = any(rec.msg_to_a != rec.msg_to_b for rec in records)
    return out, abort


def choose_mode(stats) -> Mode:
    """Pick the raw-key mode minimizing H(A|B); ties go to NOFLIP."""
    from .keyrate import conditional_entropy_ab

    h_flip = conditional_entropy_ab(stats, Mode.FLIP)
    h_noflip = conditional_entropy_ab(stats, Mode.NOFLIP)
    return Mode.FLIP if h_flip < h_noflip - 1e-12 else Mode.NOFLIP


def extract_raw_key(records: list[RoundRecord], mode: Mode) -> tuple[str, str]:
    """Raw key bits from non-sampled rounds where both parties measured.

    Under FLIP, Bob inverts his bit whenever the broadcast message was 2
    or 3.
    """
    bits_a = []
    bits_b = []
    for rec in records:
        if rec.in_sample:
            continue
        if rec.choice_a is not Choice.MEASURE_RESEND or rec.choice_b is not Choice.MEASURE_RESEND:
            continue
        a = rec.outcome_a
        b = rec.outcome_b
        if mode is Mode.FLIP and rec.msg_to_b in (2, 3):
            b = 1 - b
        bits_a.append(str(a))
        bits_b.append(str(b))
    return "".join(bits_a), "".join(bits_b)


def write_transcript(records: list[RoundRecord], path) -> None:
    """One line per round: index,choice_a,choice_b,outcome_a,outcome_b,msg,in_sample.

    Absent outcomes print as '-'. The format stores the single broadcast
    message, so records with differing per-party messages are rejected.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            if rec.msg_to_a != rec.msg_to_b:
                raise ValueError("transcript format stores a single message per round")
            oa = "-" if rec.outcome_a is None else str(rec.outcome_a)
            ob = "-" if rec.outcome_b is None else str(rec.outcome_b)
            fh.write(
                f"{rec.index},{rec.choice_a.value},{rec.choice_b.value},"
                f"{oa},{ob},{rec.msg_to_a},{int(rec.in_sample)}\n"
            )


def read_transcript(path) -> list[RoundRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            idx, ca, cb, oa, ob, msg, in_sample = line.split(",")
            m = int(msg)
            records.append(
                RoundRecord(
                    index=int(idx),
                    choice_a=Choice(ca),
                    choice_b=Choice(cb),
                    outcome_a=None if oa == "-" else int(oa),
                    outcome_b=None if ob == "-" else int(ob),
                    msg_to_a=m,
                    msg_to_b=m,
                    in_sample=bool(int(in_sample)),
                )
            )
    return records
