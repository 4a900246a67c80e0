"""Key-rate bound: constraint assembly, entropy minimization, reporting.

The asymptotic rate is H(A|E) - H(A|B), evaluated on key rounds (both
parties measured). Eve's uncertainty H(A|E) is lower-bounded by a sum of
two-term contributions, one per (Bob bit j, message m): each pairs the
ancilla attached to Alice 0 / Bob j against the one attached to Alice 1
/ Bob 1-j, and only the real part of their inner product enters. The
observable statistics pin every such cross term except, per message m,
a one-parameter family: the split of the observable sum s_m between the
(0,0)/(1,1) and (0,1)/(1,0) pairings. The bound is minimized over that
split within Cauchy-Schwarz limits, independently for each m.

H(A|B) depends on the chosen raw-key mode: NOFLIP keeps Bob's bit,
FLIP inverts it on messages 2 and 3. All entropies are per key bit, so
the key table is renormalized before entropies are taken.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .protocol import AttackModel, Mode
from .qmath import binary_entropy, von_neumann_entropy
from .stats import ObservedStats, R

_FEAS_SLACK = 1e-9
_SPLIT_TOL = 1e-9
_GRID_POINTS = 2001
_TIE_TOL = 1e-12


class InfeasibleStats(Exception):
    """Statistics admit no quantum model: a split interval is empty."""


class MissingStatsError(Exception):
    """Required cells are undefined (their conditioning events occurred
    with positive probability but were never observed)."""

    def __init__(self, cells):
        self.cells = list(cells)
        super().__init__("missing statistics cells: " + ", ".join(self.cells))


@dataclass(frozen=True)
class ConstraintSet:
    """Exact cross terms and the per-message split freedom.

    ``r_same_alice[i][m]`` is the cross term pairing (i,0) with (i,1);
    ``r_same_bob[j][m]`` pairs (0,j) with (1,j). ``s[m]`` is the sum of
    the two unresolved key-pair cross terms, whose split is bounded by
    the Cauchy-Schwarz radii ``cs_0011`` and ``cs_0110``.
    """

    r_same_alice: np.ndarray
    r_same_bob: np.ndarray
    s: np.ndarray
    cs_0011: np.ndarray
    cs_0110: np.ndarray

    def split_interval(self, m: int) -> tuple[float, float]:
        """Feasible range of the (0,0)/(1,1) cross term for message m."""
        lo = max(-float(self.cs_0011[m]), float(self.s[m]) - float(self.cs_0110[m]))
        hi = min(float(self.cs_0011[m]), float(self.s[m]) + float(self.cs_0110[m]))
        return lo, hi


@dataclass(frozen=True)
class KeyRateReport:
    h_ae_lower: float
    splits: tuple[float, float, float, float]
    h_ab_flip: float
    h_ab_noflip: float
    rate_flip: float
    rate_noflip: float
    chosen_mode: Mode
    p_key: dict

    @property
    def rate_best(self) -> float:
        return self.rate_flip if self.chosen_mode is Mode.FLIP else self.rate_noflip


def _wprod(prob: float, cell: float, name: str, missing: list) -> float:
    """prob * cell with the convention 0 * undefined = 0."""
    if prob == 0.0:
        return 0.0
    if not np.isfinite(cell):
        missing.append(name)
        return 0.0
    return prob * cell


def _check_joint(stats: ObservedStats):
    if not np.all(np.isfinite(stats.p_joint)):
        raise MissingStatsError(
            f"P_{i}{j}"
            for i in range(2)
            for j in range(2)
            if not np.isfinite(stats.p_joint[i, j])
        )


def _assemble_arrays(stats: ObservedStats) -> ConstraintSet:
    _check_joint(stats)
    pj = stats.p_joint
    pm = stats.p_msg
    missing: list[str] = []

    r_same_alice = np.zeros((2, 4))
    r_same_bob = np.zeros((2, 4))
    for m in range(4):
        for i in range(2):
            row = float(pj[i, 0] + pj[i, 1])
            r_same_alice[i, m] = (
                _wprod(row, pm[i, R, m], f"Pm_{i}R_{m}", missing)
                - _wprod(float(pj[i, 0]), pm[i, 0, m], f"Pm_{i}0_{m}", missing)
                - _wprod(float(pj[i, 1]), pm[i, 1, m], f"Pm_{i}1_{m}", missing)
            )
        for j in range(2):
            col = float(pj[0, j] + pj[1, j])
            r_same_bob[j, m] = (
                _wprod(col, pm[R, j, m], f"Pm_R{j}_{m}", missing)
                - _wprod(float(pj[0, j]), pm[0, j, m], f"Pm_0{j}_{m}", missing)
                - _wprod(float(pj[1, j]), pm[1, j, m], f"Pm_1{j}_{m}", missing)
            )

    s = np.zeros(4)
    for m in range(4):
        if not np.isfinite(pm[R, R, m]):
            missing.append(f"Pm_RR_{m}")
            continue
        diag = sum(
            _wprod(float(pj[i, j]), pm[i, j, m], f"Pm_{i}{j}_{m}", missing)
            for i in range(2)
            for j in range(2)
        )
        s[m] = (
            float(pm[R, R, m])
            - diag
            - r_same_alice[0, m]
            - r_same_alice[1, m]
            - r_same_bob[0, m]
            - r_same_bob[1, m]
        )

    cs_0011 = np.zeros(4)
    cs_0110 = np.zeros(4)
    for m in range(4):
        pre = float(pj[0, 0] * pj[1, 1])
        if pre > 0.0:
            a = _wprod(1.0, pm[0, 0, m], f"Pm_00_{m}", missing)
            b = _wprod(1.0, pm[1, 1, m], f"Pm_11_{m}", missing)
            cs_0011[m] = 2.0 * sqrt(max(pre * a * b, 0.0))
        pre = float(pj[0, 1] * pj[1, 0])
        if pre > 0.0:
            a = _wprod(1.0, pm[0, 1, m], f"Pm_01_{m}", missing)
            b = _wprod(1.0, pm[1, 0, m], f"Pm_10_{m}", missing)
            cs_0110[m] = 2.0 * sqrt(max(pre * a * b, 0.0))

    if missing:
        raise MissingStatsError(sorted(set(missing)))

    return ConstraintSet(r_same_alice, r_same_bob, s, cs_0011, cs_0110)


def assemble_constraints(stats: ObservedStats) -> ConstraintSet:
    """Compute all cross terms fixed by the statistics.

    Raises MissingStatsError when a cell with positive conditioning
    probability is undefined, and InfeasibleStats when some message's
    split interval is empty beyond floating-point slack.
    """
    cons = _assemble_arrays(stats)
    for m in range(4):
        lo, hi = cons.split_interval(m)
        if lo > hi + _FEAS_SLACK:
            raise InfeasibleStats(
                f"message {m}: split interval [{lo!r}, {hi!r}] is empty; "
                "statistics are inconsistent with any attack"
            )
    return cons


def _h_array(x: np.ndarray) -> np.ndarray:
    # Binary entropy, elementwise, with arguments clamped into [0, 1].
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    out = np.zeros_like(x)
    inner = (x > 0.0) & (x < 1.0)
    xi = x[inner]
    out[inner] = -xi * np.log2(xi) - (1.0 - xi) * np.log2(1.0 - xi)
    return out


def _term(w_e: float, w_f: float, cross) -> np.ndarray:
    """One entropy-pair contribution, vectorized over the cross term."""
    cross = np.asarray(cross, dtype=np.float64)
    w = w_e + w_f
    if w <= 0.0:
        return np.zeros_like(cross)
    lam = 0.5 * (1.0 + np.sqrt((w_e - w_f) ** 2 + cross**2) / w)
    lam = np.clip(lam, 0.5, 1.0)
    return w * (binary_entropy(w_e / w) - _h_array(lam))


def _pair_weights(stats: ObservedStats):
    """Weights (w_e, w_f) for each (j, m) pair; undefined cells of
    zero-probability outcomes count as weight 0."""
    pj = stats.p_joint
    pm = stats.p_msg
    missing: list[str] = []
    weights = np.zeros((2, 4, 2))
    for m in range(4):
        for j in range(2):
            weights[j, m, 0] = _wprod(float(pj[0, j]), pm[0, j, m], f"Pm_0{j}_{m}", missing)
            weights[j, m, 1] = _wprod(
                float(pj[1, 1 - j]), pm[1, 1 - j, m], f"Pm_1{1 - j}_{m}", missing
            )
    if missing:
        raise MissingStatsError(sorted(set(missing)))
    return weights


def entropy_bound(stats: ObservedStats, splits) -> float:
    """Lower bound on H(A|E) in bits at the given per-message splits.

    ``splits[m]`` is the (0,0)/(1,1) cross term for message m; the
    (0,1)/(1,0) one is determined as s[m] - splits[m].
    """
    _check_joint(stats)
    weights = _pair_weights(stats)
    s = _cross_sums(stats)
    total = 0.0
    for m in range(4):
        t = float(splits[m])
        total += float(_term(weights[0, m, 0], weights[0, m, 1], np.float64(t)))
        total += float(_term(weights[1, m, 0], weights[1, m, 1], np.float64(s[m] - t)))
    return total


def _cross_sums(stats: ObservedStats) -> np.ndarray:
    return _assemble_arrays(stats).s


def minimize_entropy(stats: ObservedStats, cons: ConstraintSet):
    """Minimum of the entropy bound over the free splits.

    The objective separates per message, so each split is a 1-D problem:
    a dense grid locates the basin, golden-section refines it. Returns
    (minimum bound, splits).
    """
    weights = _pair_weights(stats)
    s = cons.s
    total = 0.0
    splits = []
    for m in range(4):
        lo, hi = cons.split_interval(m)
        if lo > hi:
            if lo - hi > _FEAS_SLACK:
                raise InfeasibleStats(
                    f"message {m}: split interval [{lo!r}, {hi!r}] is empty"
                )
            lo = hi = 0.5 * (lo + hi)
        w_e0, w_f0 = weights[0, m]
        w_e1, w_f1 = weights[1, m]
        s_m = float(s[m])

        def objective(t: np.ndarray) -> np.ndarray:
            return _term(w_e0, w_f0, t) + _term(w_e1, w_f1, s_m - t)

        if hi - lo <= _SPLIT_TOL:
            t_best = 0.5 * (lo + hi)
        else:
            grid = np.linspace(lo, hi, _GRID_POINTS)
            values = objective(grid)
            k = int(np.argmin(values))
            step = (hi - lo) / (_GRID_POINTS - 1)
            a = max(lo, grid[k] - step)
            b = min(hi, grid[k] + step)
            t_best = _golden_section(lambda t: float(objective(np.float64(t))), a, b)
        total += float(objective(np.float64(t_best)))
        splits.append(t_best)
    return total, tuple(splits)


def _golden_section(f, a: float, b: float, tol: float = _SPLIT_TOL) -> float:
    inv_phi = (sqrt(5.0) - 1.0) / 2.0
    while b - a > tol:
        c = b - (b - a) * inv_phi
        d = a + (b - a) * inv_phi
        if f(c) <= f(d):
            b = d
        else:
            a = c
    return 0.5 * (a + b)


def _key_table(stats: ObservedStats, mode: Mode) -> np.ndarray:
    """Unnormalized joint key-bit table P(key_a, key_b) per key round."""
    pj = stats.p_joint
    pm = stats.p_msg
    missing: list[str] = []
    table = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            if mode is Mode.NOFLIP:
                hold = sum(
                    _wprod(float(pj[i, j]), pm[i, j, m], f"Pm_{i}{j}_{m}", missing)
                    for m in range(4)
                )
                table[i, j] = hold
            else:
                hold = sum(
                    _wprod(float(pj[i, j]), pm[i, j, m], f"Pm_{i}{j}_{m}", missing)
                    for m in (0, 1)
                )
                flip = sum(
                    _wprod(float(pj[i, 1 - j]), pm[i, 1 - j, m], f"Pm_{i}{1 - j}_{m}", missing)
                    for m in (2, 3)
                )
                table[i, j] = hold + flip
    if missing:
        raise MissingStatsError(sorted(set(missing)))
    return table


def conditional_entropy_ab(stats: ObservedStats, mode: Mode) -> float:
    """H(A|B) in bits per raw key bit, under the given mode."""
    _check_joint(stats)
    table = _key_table(stats, mode)
    total = float(table.sum())
    if total <= 0.0:
        raise ValueError("key table is all zero: no key rounds are possible")
    dist = table / total
    h_joint = float(np.sum(_h_terms(dist)))
    bob0 = float(dist[0, 0] + dist[1, 0])
    return h_joint - binary_entropy(bob0)


def _h_terms(dist: np.ndarray) -> np.ndarray:
    out = np.zeros_like(dist)
    pos = dist > 0.0
    out[pos] = -dist[pos] * np.log2(dist[pos])
    return out


def key_rate(stats: ObservedStats) -> KeyRateReport:
    """Full report: H(A|E) lower bound, both modes' H(A|B), both rates.

    The chosen mode maximizes the rate; ties go to NOFLIP. Negative
    rates are reported as-is.
    """
    cons = assemble_constraints(stats)
    h_ae, splits = minimize_entropy(stats, cons)
    h_flip = conditional_entropy_ab(stats, Mode.FLIP)
    h_noflip = conditional_entropy_ab(stats, Mode.NOFLIP)
    rate_flip = h_ae - h_flip
    rate_noflip = h_ae - h_noflip
    chosen = Mode.FLIP if rate_flip > rate_noflip + _TIE_TOL else Mode.NOFLIP
    return KeyRateReport(
        h_ae_lower=h_ae,
        splits=splits,
        h_ab_flip=h_flip,
        h_ab_noflip=h_noflip,
        rate_flip=rate_flip,
        rate_noflip=rate_noflip,
        chosen_mode=chosen,
        p_key={
            Mode.FLIP: _key_table(stats, Mode.FLIP),
            Mode.NOFLIP: _key_table(stats, Mode.NOFLIP),
        },
    )


def exact_entropy_oracle(attack: AttackModel) -> float:
    """H(A|E) computed directly from the attack's key-round state.

    Eve's side holds the broadcast message register and her ancilla;
    Bob's bit is traced out. Serves as the independent reference the
    minimized bound must never exceed.
    """
    d = attack.eve_dim
    alphas = attack.alphas.reshape(2, 2)
    vecs = attack.eve_vectors  # [m, ij, k]
    dim_e = 4 * d
    rho_ae = np.zeros((2 * dim_e, 2 * dim_e), dtype=np.complex128)
    for a in range(2):
        sigma = np.zeros((dim_e, dim_e), dtype=np.complex128)
        for j in range(2):
            w = float(alphas[a, j] ** 2)
            if w == 0.0:
                continue
            for m in range(4):
                v = vecs[m, 2 * a + j]
                block = w * np.outer(v, v.conj())
                sigma[m * d : (m + 1) * d, m * d : (m + 1) * d] += block
        rho_ae[a * dim_e : (a + 1) * dim_e, a * dim_e : (a + 1) * dim_e] = sigma
    rho_e = (
        rho_ae[:dim_e, :dim_e] + rho_ae[dim_e:, dim_e:]
    )
    return von_neumann_entropy(rho_ae) - von_neumann_entropy(rho_e)


def rate_best(stats: ObservedStats) -> float:
    """Convenience: the chosen mode's rate."""
    return key_rate(stats).rate_best


def symmetric_zero_crossing(
    mult_f: float = 1.0, mult_r: float = 1.0, tol: float = 1e-4
) -> float:
    """Noise level q where rate_best(mult_f*q, mult_r*q) crosses zero.

    Bisection to the given tolerance; assumes the rate starts positive
    at q=0 and is decreasing through the crossing.
    """
    from .stats import predict_depolarization

    def rate_at(q: float) -> float:
        return rate_best(predict_depolarization(mult_f * q, mult_r * q))

    q_cap = 0.5 / max(mult_f, mult_r, 1.0)
    lo, f_lo = 0.0, rate_at(0.0)
    if f_lo <= 0.0:
        raise ValueError("rate is not positive at q=0")
    hi = None
    step = q_cap / 32.0
    q = step
    while q <= q_cap + 1e-15:
        if rate_at(min(q, q_cap)) <= 0.0:
            hi = min(q, q_cap)
            break
        lo = min(q, q_cap)
        q += step
    if hi is None:
        raise ValueError("rate never crosses zero on the admissible range")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if rate_at(mid) <= 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
