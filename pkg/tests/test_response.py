import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qaegap.exact import ScheduleOperators
from qaegap.exceptions import InstanceValidationError, NearResonanceError
from qaegap.instance import LatticeGeometry, MaxCutInstance, generate_random
from qaegap.kohn_sham import scf_solve
from qaegap.response import (
    casida_blocks,
    dft_gap,
    ks_susceptibility,
    lambda_check,
    response_kernel,
    runge_gross_premise,
    solve_response,
    transition_amplitudes,
)
from qaegap.xc import LocalCorrelation, NoCorrelation

from conftest import free_instance, instances, single_qubit

XC = LocalCorrelation((0.3, -0.2))


def amp2(state):
    return np.abs(np.diag(transition_amplitudes(state))) ** 2


class TestSusceptibility:
    def test_high_frequency_decay(self, inst4):
        state = scf_solve(inst4, 0.5)
        assert np.abs(ks_susceptibility(state, 1e8)).max() < 1e-7

    def test_resonance(self, inst4):
        state = scf_solve(inst4, 0.5)
        eta = 1e-6
        for r, w in enumerate(state.transition_energies):
            chi = ks_susceptibility(state, w, eta)
            assert abs(chi[r, r]) == pytest.approx(amp2(state)[r] / eta, rel=1e-4)

    def test_single_qubit_static(self):
        s, w = 0.5, 1.0
        state = scf_solve(single_qubit(w), s)
        a, b = s * w, 1 - s
        expected = -2 * b**2 / (a**2 + 4 * b**2) ** 1.5
        assert ks_susceptibility(state, 0.0, 1e-9)[0, 0].real == pytest.approx(expected, rel=1e-8)

    def test_static_matches_exact_linear_response(self):
        # For one free qubit, chi(0) is d<n>/d(s v): compare with a finite difference.
        s, w, h = 0.4, 0.7, 1e-6
        state = scf_solve(single_qubit(w), s)
        n_plus = scf_solve(single_qubit(w + h / s), s).density[0]
        n_minus = scf_solve(single_qubit(w - h / s), s).density[0]
        assert ks_susceptibility(state, 0.0, 1e-12)[0, 0].real == pytest.approx(
            (n_plus - n_minus) / (2 * h), rel=1e-5
        )

    def test_pole_placement(self, inst4):
        state = scf_solve(inst4, 0.5)
        eta = 1e-2
        omega = np.arange(0.0, 3.0, 1e-3)
        norms = np.array([np.linalg.norm(ks_susceptibility(state, w, eta)) for w in omega])
        peaks = omega[1:-1][(norms[1:-1] > norms[:-2]) & (norms[1:-1] >= norms[2:])]
        for p in peaks:
            assert np.min(np.abs(state.transition_energies - p)) <= 2 * eta


class TestSolveResponse:
    @given(instances(shapes=[(1, 2), (2, 2), (2, 3)]), st.floats(0.05, 0.95), st.floats(0.0, 3.0))
    def test_kernel_free_reduction(self, inst, s, omega):
        state = scf_solve(inst, s)
        v1 = np.linspace(-1, 1, inst.n_sites)
        n1 = solve_response(state, v1, omega, eta=1e-3)
        assert np.abs(n1 - ks_susceptibility(state, omega, 1e-3) @ v1).max() < 1e-12

    def test_zero_probe(self, inst4):
        state = scf_solve(inst4, 0.5, XC)
        assert not np.any(solve_response(state, np.zeros(4), 0.3))

    def test_symmetric_pair(self, pair):
        state = scf_solve(pair, 0.5, XC)
        n1 = solve_response(state, np.array([1.0, 1.0]), 0.2, eta=1e-3)
        assert n1[0] == pytest.approx(n1[1], abs=1e-12)

    def test_near_resonance(self, inst4):
        state = scf_solve(inst4, 0.5, XC)
        omega = casida_blocks(state)[0].corrected[0]
        with pytest.raises(NearResonanceError) as err:
            solve_response(state, np.ones(4), omega)
        assert err.value.omega_estimate == pytest.approx(omega)

    def test_probe_shape(self, inst4):
        with pytest.raises(InstanceValidationError):
            solve_response(scf_solve(inst4, 0.5), np.ones(3), 0.1)


class TestCasida:
    def test_zero_kernel(self, inst4):
        for block in casida_blocks(scf_solve(inst4, 0.5)):
            assert np.all(block.eigenvalues == 0)
            assert np.allclose(block.corrected, block.omega_star, atol=1e-12)

    def test_pair_diagonal_kernel(self, pair):
        state = scf_solve(pair, 0.5)
        f = 0.3
        blocks = casida_blocks(state, kernel=f * np.eye(2))
        assert len(blocks) == 1 and blocks[0].degeneracy == 2
        phi2 = amp2(state)[0]
        assert blocks[0].eigenvalues == pytest.approx([f * phi2, f * phi2], abs=1e-12)

    def test_pair_uniform_kernel(self, pair):
        state = scf_solve(pair, 0.5)
        f = 0.3
        block = casida_blocks(state, kernel=f * np.ones((2, 2)))[0]
        assert block.eigenvalues == pytest.approx([0.0, 2 * f * amp2(state)[0]], abs=1e-12)

    def test_nondegenerate_scalar(self, inst4):
        state = scf_solve(inst4, 0.5, XC)
        kernel = response_kernel(state)
        u = transition_amplitudes(state)
        for block in casida_blocks(state):
            assert block.degeneracy == 1
            t = block.transitions[0]
            assert block.eigenvalues[0] == pytest.approx(kernel[t, t] * abs(u[t, t]) ** 2)

    @given(instances(shapes=[(1, 2), (2, 2), (2, 3)]), st.floats(0.05, 0.95))
    def test_hermitian_real(self, inst, s):
        state = scf_solve(inst, s, XC)
        for block in casida_blocks(state, include_hartree=True):
            assert block.hermitian_error < 1e-10
            assert np.all(np.isreal(block.eigenvalues))

    def test_hartree_kernel(self, inst4):
        state = scf_solve(inst4, 0.5, XC)
        with_h = response_kernel(state, include_hartree=True)
        assert np.allclose(with_h - response_kernel(state), 2 * 0.5 * inst4.edge_matrix)


class TestLambda:
    @pytest.mark.parametrize("seed", range(4))
    def test_local_kernel_self_consistency(self, seed):
        inst = generate_random(LatticeGeometry.for_size(4 + seed % 3), seed=seed)
        state = scf_solve(inst, 0.3 + 0.1 * seed, XC)
        for block in casida_blocks(state):
            for omega in block.corrected:
                assert lambda_check(state, omega) < 1e-6

    def test_zero_kernel_at_pole(self, inst4):
        state = scf_solve(inst4, 0.5)
        assert np.isnan(lambda_check(state, state.transition_energies[0]))

    def test_small_local_kernel(self, inst4):
        state = scf_solve(inst4, 0.5)
        for eps in (1e-3, 1e-2):
            kernel = eps * np.diag([1.0, 0.5, -0.3, 0.8])
            worst = max(
                lambda_check(state, w, kernel=kernel)
                for b in casida_blocks(state, kernel=kernel)
                for w in b.corrected
            )
            assert worst <= eps**2

    def test_nonlocal_kernel_first_order(self, inst4):
        # Inter-pole couplings dropped by the single-pole block enter at first order.
        state = scf_solve(inst4, 0.5)
        base = np.eye(4) + inst4.edge_matrix
        dev = []
        for eps in (1e-4, 1e-3):
            kernel = eps * base
            dev.append(max(
                lambda_check(state, w, kernel=kernel)
                for b in casida_blocks(state, kernel=kernel)
                for w in b.corrected
            ))
        assert 5 < dev[1] / dev[0] < 20


class TestDFTGap:
    @given(instances(), st.floats(0.02, 0.98))
    def test_free_matches_exact(self, inst, s):
        free = free_instance(inst)
        values = np.linalg.eigvalsh(ScheduleOperators(free).at(s))
        result = dft_gap(scf_solve(free, s))
        assert result.gap == pytest.approx(values[1] - values[0], abs=1e-8)
        assert result.status == "ok"

    def test_zero_kernel_is_bare_gap(self, inst4):
        state = scf_solve(inst4, 0.5)
        result = dft_gap(state)
        assert result.delta_e == 0.0
        assert float(result) == pytest.approx(state.transition_energies.min())

    def test_pair_split(self, pair):
        state = scf_solve(pair, 0.5)
        kernel = 0.3 * np.ones((2, 2))
        result = dft_gap(state, kernel=kernel)
        assert result.delta_e == pytest.approx(0.0, abs=1e-12)
        assert result.gap == pytest.approx(result.omega_min, abs=1e-12)
        diagonal = dft_gap(state, kernel=0.3 * np.eye(2))
        assert diagonal.delta_e == pytest.approx(min(diagonal.blocks[0].eigenvalues), abs=1e-15)
        assert diagonal.delta_e == pytest.approx(0.3 * amp2(state)[0], abs=1e-12)

    def test_flagged(self, inst4):
        state = scf_solve(inst4, 0.5)
        assert dft_gap(state, kernel=-1e3 * np.eye(4)).status == "flagged"

    def test_reordered(self, inst4):
        state = scf_solve(inst4, 0.5)
        order = np.argsort(state.transition_energies)
        kernel = np.zeros((4, 4))
        kernel[order[0], order[0]] = 50.0
        assert dft_gap(state, kernel=kernel).status == "reordered"

    def test_single_transition_lattice(self):
        state = scf_solve(single_qubit(), 0.5)
        assert dft_gap(state).gap == pytest.approx(state.transition_energies[0])


class TestRungeGross:
    def test_end_vanishes(self, inst4):
        assert np.abs(runge_gross_premise(inst4, 1.0).values).max() < 1e-12

    def test_start_unit(self, inst4):
        assert np.allclose(np.abs(runge_gross_premise(inst4, 0.0).values), 1.0)

    def test_single_qubit(self):
        s, w = 0.5, 1.0
        expected = -2 * (1 - s) / np.sqrt((s * w) ** 2 + 4 * (1 - s) ** 2)
        assert runge_gross_premise(single_qubit(w), s).values[0] == pytest.approx(expected, abs=1e-12)

    @given(instances(shapes=[(1, 2), (2, 2), (1, 3)]), st.floats(0.1, 0.9))
    def test_routes_agree(self, inst, s):
        q = runge_gross_premise(inst, s, via="qubit")
        f = runge_gross_premise(inst, s, via="fermion")
        if not q.degenerate:
            assert np.allclose(q.values, f.values, atol=1e-9)

    @given(instances(shapes=[(1, 2), (2, 2), (2, 3)]), st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9]))
    def test_nonzero_inside(self, inst, s):
        result = runge_gross_premise(inst, s)
        if not result.degenerate:
            assert np.all(np.abs(result.values) > 1e-6)
