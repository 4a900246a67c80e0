import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msqkd.qmath import (
    DensityMatrix,
    StateVector,
    bell_projectors,
    bell_state,
    binary_entropy,
    measure_projective,
    partial_trace,
    tensor,
    von_neumann_entropy,
)

IS2 = math.sqrt(0.5)


def ket(*bits):
    amps = np.zeros(2 ** len(bits), dtype=np.complex128)
    idx = 0
    for b in bits:
        idx = 2 * idx + b
    amps[idx] = 1.0
    return StateVector(amps, (2,) * len(bits))


class TestStateVector:
    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError, match="norm"):
            StateVector([1.0, 1.0], (2,))

    def test_subnormalized_allowed_when_flagged(self):
        v = StateVector([0.5, 0.0], (2,), normalized=False)
        assert v.norm_squared() == pytest.approx(0.25)

    def test_dims_must_match_length(self):
        with pytest.raises(ValueError, match="dims"):
            StateVector([1.0, 0.0, 0.0], (2,))

    def test_big_endian_indexing(self):
        # |1,0> lives at flat index 2 for two qubits
        v = ket(1, 0)
        assert v.amplitudes[2] == 1.0
        assert v.dims == (2, 2)

    def test_to_density(self):
        rho = ket(0).to_density()
        assert np.allclose(rho.entries, [[1, 0], [0, 0]])


class TestDensityMatrix:
    def test_valid_maximally_mixed(self):
        rho = DensityMatrix(np.eye(4) / 4, (2, 2))
        assert rho.dim == 4

    def test_rejects_nonhermitian(self):
        m = np.array([[0.5, 0.5], [0.0, 0.5]])
        with pytest.raises(ValueError, match="hermitian"):
            DensityMatrix(m, (2,))

    def test_rejects_bad_trace(self):
        with pytest.raises(ValueError, match="trace"):
            DensityMatrix(np.eye(2), (2,))

    def test_rejects_negative_eigenvalue(self):
        m = np.diag([1.5, -0.5])
        with pytest.raises(ValueError, match="positive"):
            DensityMatrix(m, (2,))

    def test_validate_false_skips_checks(self):
        DensityMatrix(np.diag([1.5, -0.5]), (2,), validate=False)


class TestTensor:
    def test_state_kron(self):
        v = tensor(ket(0), ket(1))
        assert np.allclose(v.amplitudes, ket(0, 1).amplitudes)
        assert v.dims == (2, 2)

    def test_density_kron_trace(self):
        a = ket(0).to_density()
        b = DensityMatrix(np.eye(2) / 2, (2,))
        ab = tensor(a, b)
        assert ab.dims == (2, 2)
        assert np.trace(ab.entries) == pytest.approx(1.0)

    def test_mixed_operands_rejected(self):
        with pytest.raises(TypeError):
            tensor(ket(0), ket(1).to_density())


class TestPartialTrace:
    def test_bell_reductions_are_mixed(self):
        rho = bell_state(0).to_density()
        for k in (0, 1):
            red = partial_trace(rho, [k])
            assert np.allclose(red.entries, np.eye(2) / 2)

    def test_product_state_factors(self):
        rho = tensor(ket(1).to_density(), ket(0).to_density())
        assert np.allclose(partial_trace(rho, [0]).entries, ket(1).to_density().entries)
        assert np.allclose(partial_trace(rho, [1]).entries, ket(0).to_density().entries)

    def test_keep_everything_is_identity_map(self):
        rho = bell_state(2).to_density()
        assert np.allclose(partial_trace(rho, [0, 1]).entries, rho.entries)

    def test_out_of_range_keep(self):
        with pytest.raises(ValueError):
            partial_trace(bell_state(0).to_density(), [2])

    def test_trace_preserved_on_three_parties(self):
        psi = tensor(tensor(bell_state(3), ket(1)), ket(0))
        rho = psi.to_density()
        red = partial_trace(rho, [1, 3])
        assert red.dims == (2, 2)
        assert np.trace(red.entries).real == pytest.approx(1.0)


class TestMeasureProjective:
    def setup_method(self):
        self.z = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]

    def test_eigenstate_is_deterministic(self):
        out, post, p = measure_projective(ket(1), self.z, 0.999)
        assert out == 1
        assert p == pytest.approx(1.0)
        assert np.allclose(post.amplitudes, ket(1).amplitudes)

    def test_uniform_draw_splits_at_probability(self):
        plus = StateVector([IS2, IS2], (2,))
        out0, _, p0 = measure_projective(plus, self.z, 0.49)
        out1, _, p1 = measure_projective(plus, self.z, 0.51)
        assert (out0, out1) == (0, 1)
        assert p0 == pytest.approx(0.5)
        assert p1 == pytest.approx(0.5)

    def test_collapse_renormalizes(self):
        skew = StateVector([math.sqrt(0.9), math.sqrt(0.1)], (2,))
        _, post, _ = measure_projective(skew, self.z, 0.95)
        assert post.norm_squared() == pytest.approx(1.0)

    def test_rounding_gap_falls_to_last_supported_outcome(self):
        # rand arbitrarily close to 1 must still yield a valid outcome
        out, _, p = measure_projective(ket(0), self.z, 1.0 - 1e-16)
        assert out == 0 and p == pytest.approx(1.0)

    def test_incomplete_family_rejected(self):
        with pytest.raises(ValueError, match="identity"):
            measure_projective(ket(0), [np.diag([1.0, 0.0])], 0.5)

    def test_nonprojective_family_rejected(self):
        # complete as a POVM but the elements are not projectors
        halves = [np.eye(2) / 2, np.eye(2) / 2]
        with pytest.raises(ValueError, match="orthogonal"):
            measure_projective(ket(0), halves, 0.5)

    def test_rand_domain(self):
        with pytest.raises(ValueError, match="rand"):
            measure_projective(ket(0), self.z, 1.0)

    def test_bell_family_on_product_input(self):
        # |00> overlaps only the two phi states indexed 0 and 1
        out, post, p = measure_projective(ket(0, 0), bell_projectors(), 0.3)
        assert out == 0
        assert p == pytest.approx(0.5)
        assert abs(np.vdot(post.amplitudes, bell_state(0).amplitudes)) == pytest.approx(1.0)


class TestEntropies:
    def test_pure_state_zero(self):
        assert von_neumann_entropy(bell_state(1).to_density()) == pytest.approx(0.0, abs=1e-12)

    def test_maximally_mixed(self):
        assert von_neumann_entropy(np.eye(2) / 2) == pytest.approx(1.0)
        assert von_neumann_entropy(np.eye(4) / 4) == pytest.approx(2.0)

    def test_bell_marginal_is_one_bit(self):
        red = partial_trace(bell_state(0).to_density(), [0])
        assert von_neumann_entropy(red) == pytest.approx(1.0)

    def test_rejects_indefinite_matrix(self):
        with pytest.raises(ValueError):
            von_neumann_entropy(np.diag([1.5, -0.5]))

    def test_binary_entropy_edges(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert binary_entropy(0.5) == pytest.approx(1.0)

    def test_binary_entropy_slack_clamps(self):
        assert binary_entropy(-1e-13) == 0.0
        assert binary_entropy(1.0 + 1e-13) == 0.0

    def test_binary_entropy_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            binary_entropy(1.001)
        with pytest.raises(ValueError):
            binary_entropy(-0.001)

    @given(st.floats(min_value=1e-6, max_value=1 - 1e-6))
    def test_binary_entropy_symmetry(self, x):
        assert binary_entropy(x) == pytest.approx(binary_entropy(1 - x), abs=1e-12)


class TestBellBasis:
    def test_states_are_orthonormal(self):
        for a in range(4):
            for b in range(4):
                ov = np.vdot(bell_state(a).amplitudes, bell_state(b).amplitudes)
                assert abs(ov - (1.0 if a == b else 0.0)) < 1e-12

    def test_explicit_amplitudes(self):
        assert np.allclose(bell_state(0).amplitudes, [IS2, 0, 0, IS2])
        assert np.allclose(bell_state(1).amplitudes, [IS2, 0, 0, -IS2])
        assert np.allclose(bell_state(2).amplitudes, [0, IS2, IS2, 0])
        assert np.allclose(bell_state(3).amplitudes, [0, IS2, -IS2, 0])

    def test_index_domain(self):
        with pytest.raises(ValueError):
            bell_state(4)

    def test_projectors_resolve_identity(self):
        total = sum(bell_projectors())
        assert np.allclose(total, np.eye(4), atol=1e-12)

    def test_projectors_are_rank_one_idempotents(self):
        for p in bell_projectors():
            assert np.allclose(p @ p, p, atol=1e-12)
            assert np.linalg.matrix_rank(p) == 1


@st.composite
def unit_vectors(draw, dim=4):
    re = draw(
        st.lists(st.floats(-1, 1, allow_nan=False), min_size=dim, max_size=dim)
    )
    im = draw(
        st.lists(st.floats(-1, 1, allow_nan=False), min_size=dim, max_size=dim)
    )
    v = np.array(re) + 1j * np.array(im)
    nrm = np.linalg.norm(v)
    if nrm < 1e-3:
        v = np.zeros(dim, dtype=np.complex128)
        v[0] = 1.0
        nrm = 1.0
    return v / nrm


@settings(max_examples=50, deadline=None)
@given(unit_vectors())
def test_pure_states_carry_no_entropy(v):
    rho = StateVector(v, (2, 2)).to_density()
    assert von_neumann_entropy(rho) <= 1e-9


@settings(max_examples=50, deadline=None)
@given(unit_vectors(), unit_vectors(dim=2))
def test_marginal_of_product_is_factor(v, w):
    joint = tensor(StateVector(v, (4,)), StateVector(w, (2,)))
    red = partial_trace(joint.to_density(), [1])
    assert np.allclose(red.entries, np.outer(w, w.conj()), atol=1e-9)
