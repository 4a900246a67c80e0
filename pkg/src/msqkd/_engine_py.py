"""Pure-Python round engine.

This module and the compiled twin in ``_kernel.pyx`` implement the same
per-round algorithm with the same floating-point operations in the same
order, so transcripts are bit-identical whichever one is active. Keep
arithmetic expressions in the two files structurally identical: CPython
evaluates plain double expressions exactly like C compiled with FMA
contraction disabled.

Per-round draw order (one counter stream per (seed, index)):

  1. uniform -> Alice's choice (measure-resend iff u < p_m)
  2. uniform -> Bob's choice
  honest path:
  3. uniform -> forward-channel Pauli
  4. uniform -> Alice's Z measurement  (only if she measures)
  5. uniform -> Bob's Z measurement    (only if he measures)
  6. uniform -> return-channel Pauli
  7. uniform -> server's Bell measurement message
  adversarial path:
  3. uniform -> Alice's Z measurement  (only if she measures)
  4. uniform -> Bob's Z measurement    (only if he measures)
  5. uniform -> message drawn from the attack isometry's distribution

State is four complex amplitudes over |ab>, big-endian (a is the high
bit), stored as separate real/imaginary doubles.
"""

from __future__ import annotations

from math import sqrt

from .rng import Stream

_IS2 = sqrt(0.5)


def _pauli_pair(ar, ai, p, i0, i1):
    # One single-qubit Pauli on the amplitude pair (|0> slot i0, |1> slot i1).
    # All branches are permutations and sign/quadrature flips: exact in floats.
    if p == 1:  # X
        ar[i0], ar[i1] = ar[i1], ar[i0]
        ai[i0], ai[i1] = ai[i1], ai[i0]
    elif p == 2:  # Y: |0> -> i|1>, |1> -> -i|0>
        r0, m0 = ar[i0], ai[i0]
        r1, m1 = ar[i1], ai[i1]
        ar[i1] = -m0
        ai[i1] = r0
        ar[i0] = m1
        ai[i0] = -r1
    elif p == 3:  # Z
        ar[i1] = -ar[i1]
        ai[i1] = -ai[i1]


def _apply_pauli(ar, ai, k):
    pa = k >> 2
    pb = k & 3
    if pa:
        _pauli_pair(ar, ai, pa, 0, 2)
        _pauli_pair(ar, ai, pa, 1, 3)
    if pb:
        _pauli_pair(ar, ai, pb, 0, 1)
        _pauli_pair(ar, ai, pb, 2, 3)


def _pauli_index(u, p_id, p_slab):
    if u < p_id:
        return 0
    k = 1 + int((u - p_id) / p_slab)
    return 15 if k > 15 else k


def _measure(ar, ai, qubit, u):
    # Z measurement of one qubit; collapses and renormalizes in place.
    if qubit == 0:
        p0 = (ar[0] * ar[0] + ai[0] * ai[0]) + (ar[1] * ar[1] + ai[1] * ai[1])
        p1 = (ar[2] * ar[2] + ai[2] * ai[2]) + (ar[3] * ar[3] + ai[3] * ai[3])
        keep0, keep1 = (0, 1), (2, 3)
    else:
        p0 = (ar[0] * ar[0] + ai[0] * ai[0]) + (ar[2] * ar[2] + ai[2] * ai[2])
        p1 = (ar[1] * ar[1] + ai[1] * ai[1]) + (ar[3] * ar[3] + ai[3] * ai[3])
        keep0, keep1 = (0, 2), (1, 3)
    out = 0 if u < p0 else 1
    if out == 1 and p1 <= 0.0:
        out = 0
    keep = keep0 if out == 0 else keep1
    drop = keep1 if out == 0 else keep0
    inv = 1.0 / sqrt(p0 if out == 0 else p1)
    for idx in drop:
        ar[idx] = 0.0
        ai[idx] = 0.0
    for idx in keep:
        ar[idx] = ar[idx] * inv
        ai[idx] = ai[idx] * inv
    return out


def _pick(u, probs):
    acc = 0.0
    for m in range(4):
        acc += probs[m]
        if u < acc:
            return m
    # Rounding left a gap below 1; take the last outcome with weight.
    for m in range(3, -1, -1):
        if probs[m] > 0.0:
            return m
    return 0


def _bell_probs(ar, ai):
    b0r = (ar[0] + ar[3]) * _IS2
    b0i = (ai[0] + ai[3]) * _IS2
    b1r = (ar[0] - ar[3]) * _IS2
    b1i = (ai[0] - ai[3]) * _IS2
    b2r = (ar[1] + ar[2]) * _IS2
    b2i = (ai[1] + ai[2]) * _IS2
    b3r = (ar[1] - ar[2]) * _IS2
    b3i = (ai[1] - ai[2]) * _IS2
    return (
        b0r * b0r + b0i * b0i,
        b1r * b1r + b1i * b1i,
        b2r * b2r + b2i * b2i,
        b3r * b3r + b3i * b3i,
    )


def honest_round(stream, p_m, qf, qr):
    """One honest-server round; returns (choice_a, choice_b, out_a, out_b, msg)."""
    pf_id = 1.0 - 2.0 * qf + qf / 8.0
    pf_slab = qf / 8.0
    pr_id = 1.0 - 2.0 * qr + qr / 8.0
    pr_slab = qr / 8.0
    ca = 1 if stream.uniform() < p_m else 0
    cb = 1 if stream.uniform() < p_m else 0
    ar = [_IS2, 0.0, 0.0, _IS2]
    ai = [0.0, 0.0, 0.0, 0.0]
    _apply_pauli(ar, ai, _pauli_index(stream.uniform(), pf_id, pf_slab))
    oa = _measure(ar, ai, 0, stream.uniform()) if ca else -1
    ob = _measure(ar, ai, 1, stream.uniform()) if cb else -1
    _apply_pauli(ar, ai, _pauli_index(stream.uniform(), pr_id, pr_slab))
    m = _pick(stream.uniform(), _bell_probs(ar, ai))
    return ca, cb, oa, ob, m


def attack_round(stream, p_m, alphas, er, ei, d):
    """One adversarial round; ``er``/``ei`` are nested [m][ij][k] float lists."""
    ca = 1 if stream.uniform() < p_m else 0
    cb = 1 if stream.uniform() < p_m else 0
    ar = list(alphas)
    ai = [0.0, 0.0, 0.0, 0.0]
    oa = _measure(ar, ai, 0, stream.uniform()) if ca else -1
    ob = _measure(ar, ai, 1, stream.uniform()) if cb else -1
    probs = [0.0, 0.0, 0.0, 0.0]
    for m in range(4):
        pm = 0.0
        erm = er[m]
        eim = ei[m]
        for k in range(d):
            sr = 0.0
            si = 0.0
            for ij in range(4):
                cr = ar[ij]
                ci = ai[ij]
                vr = erm[ij][k]
                vi = eim[ij][k]
                sr += cr * vr - ci * vi
                si += cr * vi + ci * vr
            pm += sr * sr + si * si
        probs[m] = pm
    m = _pick(stream.uniform(), probs)
    return ca, cb, oa, ob, m


def eve_tables(eve_re, eve_im):
    """Convert the (4, 4, d) ancilla arrays to nested float lists."""
    d = eve_re.shape[2]
    er = [[[float(eve_re[m, ij, k]) for k in range(d)] for ij in range(4)] for m in range(4)]
    ei = [[[float(eve_im[m, ij, k]) for k in range(d)] for ij in range(4)] for m in range(4)]
    return er, ei, d


def run_rounds_honest(seed, start, count, p_m, qf, qr, choice_a, choice_b, out_a, out_b, msg):
    """Fill the five int8 output arrays for rounds start..start+count-1."""
    for r in range(count):
        ca, cb, oa, ob, m = honest_round(Stream(seed, start + r), p_m, qf, qr)
        choice_a[r] = ca
        choice_b[r] = cb
        out_a[r] = oa
        out_b[r] = ob
        msg[r] = m


def run_rounds_attack(
    seed, start, count, p_m, alphas, eve_re, eve_im, choice_a, choice_b, out_a, out_b, msg
):
    """Adversarial rounds: source amplitudes ``alphas`` (length 4, real),
    ancilla vectors ``eve_re/eve_im`` indexed [message, joint index, eve dim]."""
    er, ei, d = eve_tables(eve_re, eve_im)
    a = tuple(float(x) for x in alphas)
    for r in range(count):
        ca, cb, oa, ob, m = attack_round(Stream(seed, start + r), p_m, a, er, ei, d)
        choice_a[r] = ca
        choice_b[r] = cb
        out_a[r] = oa
        out_b[r] = ob
        msg[r] = m
