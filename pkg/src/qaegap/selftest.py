"""Fast built-in invariant checks (the ``selftest`` CLI entry point).

Each check is small enough to run in well under a second; together they
exercise every pipeline stage against an independent reference.
"""

import numpy as np

from .exact import ScheduleOperators, exact_gap_curve, lowest_eigenpairs
from .fermion import build_fermion_algebra, build_fermionized_hamiltonian, lattice_green_function
from .hamiltonian import build_driver
from .instance import LatticeGeometry, MaxCutInstance, generate_random
from .kohn_sham import scf_solve
from .response import casida_blocks, dft_gap
from .evolution import driver_ground_state, propagate
from .xc import LocalCorrelation

__all__ = ["run_selftest", "CHECKS"]


def _driver_spectrum():
    values = [p.value for p in lowest_eigenpairs(build_driver(3), 2)]
    return float(np.max(np.abs(np.array(values) - [-3.0, -1.0]))), 1e-12


def _single_qubit_gap():
    inst = MaxCutInstance(LatticeGeometry(1, 1), (1.0,), ())
    grid = np.linspace(0.0, 1.0, 101)
    curve = exact_gap_curve(inst, grid)
    analytic = 2.0 * np.sqrt((grid / 2.0) ** 2 + (1.0 - grid) ** 2)
    return float(np.max(np.abs(curve.gaps - analytic))), 1e-9


def _jw_spectrum():
    inst = generate_random(LatticeGeometry(2, 2), seed=3)
    algebra = build_fermion_algebra(inst.geometry, inst.jw_m)
    worst = 0.0
    for s in (0.1, 0.5, 0.9):
        qubit = np.linalg.eigvalsh(ScheduleOperators(inst).at(s))
        fermion = np.linalg.eigvalsh(build_fermionized_hamiltonian(inst, s, algebra).toarray())
        worst = max(worst, float(np.max(np.abs(qubit - fermion) / np.maximum(1.0, np.abs(qubit)))))
    return worst, 1e-10


def _free_dft():
    base = generate_random(LatticeGeometry(2, 2), seed=5)
    inst = MaxCutInstance(base.geometry, base.node_weights, ())
    ops = ScheduleOperators(inst)
    worst = 0.0
    for s in (0.1, 0.5, 0.9):
        values = np.linalg.eigvalsh(ops.at(s))
        gap = dft_gap(scf_solve(inst, s)).gap
        worst = max(worst, abs(gap - (values[1] - values[0])))
    return worst, 1e-8


def _kernel_free():
    inst = generate_random(LatticeGeometry(2, 2), seed=5)
    state = scf_solve(inst, 0.5)
    worst = max(
        float(np.max(np.abs(b.corrected - b.omega_star))) for b in casida_blocks(state)
    )
    return worst, 1e-12


def _green():
    return lattice_green_function(LatticeGeometry(4, 4)).residual(), 1e-10


def _xc_derivatives():
    xc = LocalCorrelation((0.3, -0.2, 0.05))
    h = 1e-5
    n = np.linspace(0.1, 0.9, 9)
    dv = np.abs(xc.local_potential(n) - (xc.local_energy(n + h) - xc.local_energy(n - h)) / (2 * h))
    df = np.abs(xc.local_kernel(n) - (xc.local_potential(n + h) - xc.local_potential(n - h)) / (2 * h))
    return float(max(dv.max(), df.max())), 1e-6


def _free_evolution():
    inst = MaxCutInstance(LatticeGeometry(1, 2), (0.0, 0.0), ())
    result = propagate(inst, 1.0, dt=1e-3)
    overlap = abs(np.vdot(driver_ground_state(2), result.state))
    return abs(overlap - 1.0), 1e-8


CHECKS = {
    "driver_spectrum": _driver_spectrum,
    "single_qubit_gap": _single_qubit_gap,
    "jw_spectral_equivalence": _jw_spectrum,
    "free_dft_exactness": _free_dft,
    "kernel_free_reduction": _kernel_free,
    "green_function": _green,
    "xc_finite_difference": _xc_derivatives,
    "free_evolution": _free_evolution,
}


def run_selftest(stream=None):
    """Run every check; return a list of ``(name, passed, error, tol)``."""
    results = []
    for name, check in CHECKS.items():
        error, tol = check()
        passed = bool(error < tol)
        results.append((name, passed, error, tol))
        if stream is not None:
            print(f"{'PASS' if passed else 'FAIL'} {name}: {error:.3e} (tol {tol:.0e})", file=stream)
    return results
