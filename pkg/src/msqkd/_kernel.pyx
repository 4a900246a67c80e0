# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled round engine.

Structural twin of ``_engine_py``: identical draw order and identical
floating-point expressions (the build disables FMA contraction), so the
two engines emit bit-identical transcripts. Any change here must be
mirrored there and vice versa; the test suite compares them directly.
"""

from libc.math cimport sqrt

cdef double _IS2 = sqrt(0.5)
cdef double _TO_DOUBLE = 1.0 / 9007199254740992.0  # 2**-53

cdef unsigned long long _GAMMA = 0x9E3779B97F4A7C15u
cdef unsigned long long _DOMAIN = 0xA0761D6478BD642Fu


cdef inline unsigned long long _mix64(unsigned long long z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9u
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBu
    return z ^ (z >> 31)


cdef inline unsigned long long _stream_init(unsigned long long seed, unsigned long long index) nogil:
    return _mix64(_mix64(seed ^ _DOMAIN) ^ index)


cdef inline double _uniform(unsigned long long *state) nogil:
    state[0] = state[0] + _GAMMA
    return <double> (_mix64(state[0]) >> 11) * _TO_DOUBLE


cdef inline void _pauli_pair(double *ar, double *ai, int p, int i0, int i1) nogil:
    cdef double r0, m0, r1, m1
    if p == 1:
        r0 = ar[i0]; ar[i0] = ar[i1]; ar[i1] = r0
        m0 = ai[i0]; ai[i0] = ai[i1]; ai[i1] = m0
    elif p == 2:
        r0 = ar[i0]; m0 = ai[i0]
        r1 = ar[i1]; m1 = ai[i1]
        ar[i1] = -m0
        ai[i1] = r0
        ar[i0] = m1
        ai[i0] = -r1
    elif p == 3:
        ar[i1] = -ar[i1]
        ai[i1] = -ai[i1]


cdef inline void _apply_pauli(double *ar, double *ai, int k) nogil:
    cdef int pa = k >> 2
    cdef int pb = k & 3
    if pa:
        _pauli_pair(ar, ai, pa, 0, 2)
        _pauli_pair(ar, ai, pa, 1, 3)
    if pb:
        _pauli_pair(ar, ai, pb, 0, 1)
        _pauli_pair(ar, ai, pb, 2, 3)


cdef inline int _pauli_index(double u, double p_id, double p_slab) nogil:
    cdef int k
    if u < p_id:
        return 0
    k = 1 + <int> ((u - p_id) / p_slab)
    return 15 if k > 15 else k


cdef inline int _measure(double *ar, double *ai, int qubit, double u) nogil:
    cdef double p0, p1, inv
    cdef int out
    cdef int k0a, k0b, k1a, k1b
    if qubit == 0:
        p0 = (ar[0] * ar[0] + ai[0] * ai[0]) + (ar[1] * ar[1] + ai[1] * ai[1])
        p1 = (ar[2] * ar[2] + ai[2] * ai[2]) + (ar[3] * ar[3] + ai[3] * ai[3])
        k0a = 0; k0b = 1; k1a = 2; k1b = 3
    else:
        p0 = (ar[0] * ar[0] + ai[0] * ai[0]) + (ar[2] * ar[2] + ai[2] * ai[2])
        p1 = (ar[1] * ar[1] + ai[1] * ai[1]) + (ar[3] * ar[3] + ai[3] * ai[3])
        k0a = 0; k0b = 2; k1a = 1; k1b = 3
    out = 0 if u < p0 else 1
    if out == 1 and p1 <= 0.0:
        out = 0
    if out == 0:
        inv = 1.0 / sqrt(p0)
        ar[k1a] = 0.0; ai[k1a] = 0.0
        ar[k1b] = 0.0; ai[k1b] = 0.0
        ar[k0a] = ar[k0a] * inv; ai[k0a] = ai[k0a] * inv
        ar[k0b] = ar[k0b] * inv; ai[k0b] = ai[k0b] * inv
    else:
        inv = 1.0 / sqrt(p1)
        ar[k0a] = 0.0; ai[k0a] = 0.0
        ar[k0b] = 0.0; ai[k0b] = 0.0
        ar[k1a] = ar[k1a] * inv; ai[k1a] = ai[k1a] * inv
        ar[k1b] = ar[k1b] * inv; ai[k1b] = ai[k1b] * inv
    return out


cdef inline int _pick(double u, double *probs) nogil:
    cdef double acc = 0.0
    cdef int m
    for m in range(4):
        acc += probs[m]
        if u < acc:
            return m
    for m in range(3, -1, -1):
        if probs[m] > 0.0:
            return m
    return 0


cdef inline void _bell_probs(double *ar, double *ai, double *probs) nogil:
    cdef double b0r = (ar[0] + ar[3]) * _IS2
    cdef double b0i = (ai[0] + ai[3]) * _IS2
    cdef double b1r = (ar[0] - ar[3]) * _IS2
    cdef double b1i = (ai[0] - ai[3]) * _IS2
    cdef double b2r = (ar[1] + ar[2]) * _IS2
    cdef double b2i = (ai[1] + ai[2]) * _IS2
    cdef double b3r = (ar[1] - ar[2]) * _IS2
    cdef double b3i = (ai[1] - ai[2]) * _IS2
    probs[0] = b0r * b0r + b0i * b0i
    probs[1] = b1r * b1r + b1i * b1i
    probs[2] = b2r * b2r + b2i * b2i
    probs[3] = b3r * b3r + b3i * b3i


def run_rounds_honest(unsigned long long seed, long long start, long long count,
                      double p_m, double qf, double qr,
                      signed char[::1] choice_a, signed char[::1] choice_b,
                      signed char[::1] out_a, signed char[::1] out_b,
                      signed char[::1] msg):
    """Fill the five int8 output arrays for rounds start..start+count-1."""
    cdef double pf_id = 1.0 - 2.0 * qf + qf / 8.0
    cdef double pf_slab = qf / 8.0
    cdef double pr_id = 1.0 - 2.0 * qr + qr / 8.0
    cdef double pr_slab = qr / 8.0
    cdef unsigned long long state
    cdef long long r
    cdef int ca, cb, oa, ob, m
    cdef double ar[4]
    cdef double ai[4]
    cdef double probs[4]
    with nogil:
        for r in range(count):
            state = _stream_init(seed, <unsigned long long> (start + r))
            ca = 1 if _uniform(&state) < p_m else 0
            cb = 1 if _uniform(&state) < p_m else 0
            ar[0] = _IS2; ar[1] = 0.0; ar[2] = 0.0; ar[3] = _IS2
            ai[0] = 0.0; ai[1] = 0.0; ai[2] = 0.0; ai[3] = 0.0
            _apply_pauli(ar, ai, _pauli_index(_uniform(&state), pf_id, pf_slab))
            oa = _measure(ar, ai, 0, _uniform(&state)) if ca else -1
            ob = _measure(ar, ai, 1, _uniform(&state)) if cb else -1
            _apply_pauli(ar, ai, _pauli_index(_uniform(&state), pr_id, pr_slab))
            _bell_probs(ar, ai, probs)
            m = _pick(_uniform(&state), probs)
            choice_a[r] = <signed char> ca
            choice_b[r] = <signed char> cb
            out_a[r] = <signed char> oa
            out_b[r] = <signed char> ob
            msg[r] = <signed char> m


def run_rounds_attack(unsigned long long seed, long long start, long long count,
                      double p_m, double[::1] alphas,
                      double[:, :, ::1] eve_re, double[:, :, ::1] eve_im,
                      signed char[::1] choice_a, signed char[::1] choice_b,
                      signed char[::1] out_a, signed char[::1] out_b,
                      signed char[::1] msg):
    """Adversarial rounds: source amplitudes ``alphas`` (length 4, real),
    ancilla vectors ``eve_re/eve_im`` indexed [message, joint index, eve dim]."""
    cdef long long d = eve_re.shape[2]
    cdef double a0 = alphas[0], a1 = alphas[1], a2 = alphas[2], a3 = alphas[3]
    cdef unsigned long long state
    cdef long long r, k
    cdef int ca, cb, oa, ob, m, ij
    cdef double ar[4]
    cdef double ai[4]
    cdef double probs[4]
    cdef double pm, sr, si, cr, ci, vr, vi
    with nogil:
        for r in range(count):
            state = _stream_init(seed, <unsigned long long> (start + r))
            ca = 1 if _uniform(&state) < p_m else 0
            cb = 1 if _uniform(&state) < p_m else 0
            ar[0] = a0; ar[1] = a1; ar[2] = a2; ar[3] = a3
            ai[0] = 0.0; ai[1] = 0.0; ai[2] = 0.0; ai[3] = 0.0
            oa = _measure(ar, ai, 0, _uniform(&state)) if ca else -1
            ob = _measure(ar, ai, 1, _uniform(&state)) if cb else -1
            for m in range(4):
                pm = 0.0
                for k in range(d):
                    sr = 0.0
                    si = 0.0
                    for ij in range(4):
                        cr = ar[ij]
                        ci = ai[ij]
                        vr = eve_re[m, ij, k]
                        vi = eve_im[m, ij, k]
                        sr += cr * vr - ci * vi
                        si += cr * vi + ci * vr
                    pm += sr * sr + si * si
                probs[m] = pm
            m = _pick(_uniform(&state), probs)
            choice_a[r] = <signed char> ca
            choice_b[r] = <signed char> cb
            out_a[r] = <signed char> oa
            out_b[r] = <signed char> ob
            msg[r] = <signed char> m
