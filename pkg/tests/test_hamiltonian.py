from functools import reduce

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qaegap.exceptions import InstanceValidationError, ResourceLimitError, DomainError
from qaegap.hamiltonian import (
    apply,
    build_driver,
    build_problem,
    build_schedule_hamiltonian,
    interpolate,
)
from qaegap.instance import LatticeGeometry, MaxCutInstance, SignConvention, brute_force_max

from conftest import edge_pair, instances, single_qubit

X = np.array([[0.0, 1.0], [1.0, 0.0]])
Z = np.diag([1.0, -1.0])
I2 = np.eye(2)


def kron_site(op, site, n):
    return reduce(np.kron, [op if k == site else I2 for k in range(n)])


def problem_oracle(instance):
    """Pauli-string form of H_P built from Kronecker products."""
    n = instance.n_sites
    sign = -1.0 if instance.sign_convention is SignConvention.LITERAL else 1.0
    ident = np.eye(1 << n)
    h = np.zeros((1 << n, 1 << n))
    for r, w in enumerate(instance.node_weights):
        h += w * (ident + sign * kron_site(Z, r, n)) / 2
    for a, b, w in instance.edges:
        h += w * (ident + sign * kron_site(Z, a, n) @ kron_site(Z, b, n)) / 2
    return h


class TestDriver:
    def test_single_qubit(self):
        assert np.array_equal(build_driver(1).toarray(), X)

    def test_two_qubit_spectrum(self):
        assert np.allclose(np.linalg.eigvalsh(build_driver(2).toarray()), [-2, 0, 0, 2])

    def test_ground_energy(self):
        assert np.linalg.eigvalsh(build_driver(5).toarray())[0] == pytest.approx(-5.0)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_matches_kronecker(self, n):
        oracle = sum(kron_site(X, r, n) for r in range(n))
        assert np.array_equal(build_driver(n).toarray(), oracle)

    def test_cap(self):
        with pytest.raises(ResourceLimitError):
            build_driver(21)

    def test_ground_state(self):
        psi = reduce(np.kron, [np.array([1.0, -1.0]) / np.sqrt(2)] * 3)
        assert np.allclose(build_driver(3) @ psi, -3 * psi)


class TestProblem:
    def test_edge_pair_default(self):
        op = build_problem(edge_pair())
        assert op.is_diagonal()
        assert np.array_equal(op.diagonal(), [1, 0, 0, 1])

    def test_edge_pair_literal(self):
        op = build_problem(edge_pair(convention=SignConvention.LITERAL))
        assert np.array_equal(op.diagonal(), [0, 1, 1, 0])

    def test_zero_weights(self):
        inst = MaxCutInstance(LatticeGeometry(2, 2), (0.0,) * 4, ((0, 1, 0.0),))
        assert not np.any(build_problem(inst).toarray())

    @given(instances())
    def test_matches_pauli_form(self, inst):
        assert np.allclose(build_problem(inst).toarray(), problem_oracle(inst), atol=1e-12)

    @given(instances(conventions=(SignConvention.GROUND_ENCODES_MAX,)))
    def test_ground_states_are_maximizers(self, inst):
        diag = build_problem(inst).diagonal()
        best, winners = brute_force_max(inst)
        ground = {format(i, f"0{inst.n_sites}b") for i in np.flatnonzero(diag <= diag.min() + 1e-12)}
        assert ground == set(winners)
        assert diag.min() == pytest.approx(inst.total_weight - best, abs=1e-12)


class TestInterpolate:
    def test_endpoints_exact(self, inst4):
        h0, hp = build_driver(4), build_problem(inst4)
        assert interpolate(h0, hp, 0.0) is h0
        assert interpolate(h0, hp, 1.0) is hp

    def test_single_qubit_literal(self):
        h = build_schedule_hamiltonian(single_qubit(convention=SignConvention.LITERAL), 0.5)
        assert np.allclose(h.toarray(), [[0, 0.5], [0.5, 0.5]])

    def test_dimension_mismatch(self):
        with pytest.raises(InstanceValidationError):
            interpolate(build_driver(2), build_driver(3), 0.5)

    @pytest.mark.parametrize("s", [-0.1, 1.5, float("nan")])
    def test_schedule_domain(self, s):
        with pytest.raises(DomainError):
            interpolate(build_driver(1), build_driver(1), s)

    @given(instances(), st.floats(0, 1))
    def test_hermitian(self, inst, s):
        assert build_schedule_hamiltonian(inst, s).hermiticity_error() < 1e-12


class TestApply:
    def test_driver_on_basis(self):
        assert np.array_equal(apply(build_driver(1), [1.0, 0.0]), [0.0, 1.0])

    def test_diagonal_keeps_basis_state(self, inst4):
        hp = build_problem(inst4)
        e = np.zeros(16)
        e[5] = 1.0
        out = hp @ e
        assert np.count_nonzero(out) <= 1 and out[5] == pytest.approx(hp.diagonal()[5])

    @given(instances(), st.integers(0, 2**32 - 1))
    def test_real_expectation(self, inst, seed):
        rng = np.random.default_rng(seed)
        h = build_schedule_hamiltonian(inst, 0.37)
        v = rng.normal(size=h.dim) + 1j * rng.normal(size=h.dim)
        assert abs(np.vdot(v, h @ v).imag) < 1e-12 * max(1.0, np.vdot(v, v).real)

    def test_length_mismatch(self):
        with pytest.raises(InstanceValidationError):
            apply(build_driver(2), np.ones(3))
