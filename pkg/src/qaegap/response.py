"""Linear-response TD-DFT on top of a converged Kohn-Sham state.

Under the per-site factorization each site contributes one KS transition
(occupied -> empty orbital) with energy ``omega_r = eps_{r,+} - eps_{r,-}``
and transition density ``Phi_r = conj(phi_{r,+}) phi_{r,-}`` on the
occupied component. Excitations are corrected in the single-pole
approximation: for a (possibly degenerate) KS pole ``omega*`` the block

    M[t, t'] = sum_{r, r'} conj(Phi^t_r) f(r, r') Phi^t'_r'

is diagonalized, each eigenvalue ``A`` gives ``Omega = omega* + Re A``, and
the gap estimate is ``omega_min + min Re A`` over the lowest pole's block.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_instance, check_positive, check_schedule_point
from .exceptions import DomainError, InstanceValidationError, NearResonanceError
from .fermion import number_representation
from .xc import xc_from_config

__all__ = [
    "transition_amplitudes",
    "response_kernel",
    "ks_susceptibility",
    "solve_response",
    "CasidaBlock",
    "casida_blocks",
    "lambda_check",
    "DFTGapResult",
    "dft_gap",
    "PremiseResult",
    "runge_gross_premise",
]

DEFAULT_ETA = 1e-6
DEFAULT_GROUP_RTOL = 1e-8


def transition_amplitudes(state):
    """(N_sites, N_transitions) matrix of transition densities ``<t|n_r|0>``.

    Transition ``t`` is the excitation on site ``t``, so the matrix is
    diagonal.
    """
    state.require_converged()
    amp = np.conj(state.orbitals[:, 1, 1]) * state.orbitals[:, 1, 0]
    return np.diag(amp)


def response_kernel(state, xc=None, include_hartree=False):
    """Kernel ``f(r, r')`` coupling density response back into the potential.

    By default only the correlation kernel ``d v_c / d n`` is used; with
    ``include_hartree`` the exact Hartree kernel ``2 s w_rr'`` is added.
    """
    xc = state.xc if xc is None else xc_from_config(xc)
    kernel = xc.kernel(state.density).astype(float)
    if include_hartree:
        kernel = kernel + 2.0 * state.s * number_representation(state.instance).pair
    return kernel


def ks_susceptibility(state, omega, eta=DEFAULT_ETA):
    """Retarded KS density-density response ``chi(omega)``, shape (N, N).

    Resonant and antiresonant terms of every transition are included, with
    poles at ``+-omega_t - i eta``.
    """
    eta = check_positive(eta, "eta")
    u = transition_amplitudes(state)
    w = state.transition_energies
    resonant = 1.0 / (omega - w + 1j * eta)
    antiresonant = 1.0 / (omega + w + 1j * eta)
    # sum_t [<0|n_r|t><t|n_r'|0> / (w - w_t + i eta) - <0|n_r'|t><t|n_r|0> / (w + w_t + i eta)]
    return (np.conj(u) * resonant) @ u.T - (u * antiresonant) @ np.conj(u).T


@dataclass
class CasidaBlock:
    """Single-pole correction for one degeneracy group of KS transitions."""

    transitions: np.ndarray
    omega_star: float
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def degeneracy(self):
        return int(self.transitions.size)

    @property
    def corrected(self):
        """Interacting excitation estimates ``omega* + Re A``."""
        return self.omega_star + np.real(self.eigenvalues)

    @property
    def delta_e(self):
        return float(np.min(np.real(self.eigenvalues)))

    @property
    def hermitian_error(self):
        return float(np.abs(self.matrix - self.matrix.conj().T).max())


def _group_transitions(omegas, tol):
    order = np.argsort(omegas, kind="stable")
    groups, current = [], [order[0]]
    for prev, idx in zip(order[:-1], order[1:]):
        if omegas[idx] - omegas[prev] < tol:
            current.append(idx)
        else:
            groups.append(np.array(current))
            current = [idx]
    groups.append(np.array(current))
    return groups


def _default_group_tol(omegas):
    return DEFAULT_GROUP_RTOL * max(float(np.max(omegas)), 1e-300)


def casida_blocks(state, xc=None, group_tol=None, kernel=None, include_hartree=False):
    """Single-pole blocks for every degeneracy group, ordered by ``omega*``.

    ``kernel`` overrides the functional-derived kernel when given.
    """
    omegas = state.transition_energies
    if omegas.size == 0:
        raise InstanceValidationError("no KS transitions to correct")
    if kernel is None:
        kernel = response_kernel(state, xc, include_hartree)
    kernel = np.asarray(kernel)
    u = transition_amplitudes(state)
    tol = _default_group_tol(omegas) if group_tol is None else float(group_tol)
    blocks = []
    for group in _group_transitions(omegas, tol):
        ug = u[:, group]
        m = ug.conj().T @ kernel @ ug
        if np.allclose(m, m.conj().T, rtol=0.0, atol=1e-13 * max(1.0, np.abs(m).max())):
            values, vectors = np.linalg.eigh(0.5 * (m + m.conj().T))
        else:
            values, vectors = np.linalg.eig(m)
            order = np.argsort(values.real)
            values, vectors = values[order], vectors[:, order]
        blocks.append(CasidaBlock(group, float(np.mean(omegas[group])), m, values, vectors))
    return blocks


def solve_response(
    state,
    v1,
    omega,
    eta=DEFAULT_ETA,
    xc=None,
    kernel=None,
    include_hartree=False,
    singular_tol=1e-12,
):
    """Density response ``n1`` from ``(1 - chi f) n1 = chi v1``.

    Raises :class:`NearResonanceError` when ``omega`` sits within ``eta`` of
    a corrected excitation or the system matrix is numerically singular.
    """
    v1 = np.asarray(v1)
    if v1.shape != (state.n_sites,):
        raise InstanceValidationError(f"probe has shape {v1.shape}, expected ({state.n_sites},)")
    if kernel is None:
        kernel = response_kernel(state, xc, include_hartree)
    kernel = np.asarray(kernel)
    chi = ks_susceptibility(state, omega, eta)
    rhs = chi @ v1
    if not np.any(kernel):
        return rhs

    excitations = np.concatenate([b.corrected for b in casida_blocks(state, kernel=kernel)])
    nearest = float(excitations[np.argmin(np.abs(excitations - omega))])
    if abs(omega - nearest) < eta:
        raise NearResonanceError(
            f"omega={omega} within eta of corrected excitation {nearest}", omega_estimate=nearest
        )
    system = np.eye(state.n_sites) - chi @ kernel
    sv = np.linalg.svd(system, compute_uv=False)
    if sv[-1] < singular_tol * sv[0]:
        raise NearResonanceError(
            f"response system singular at omega={omega} (sigma_min/sigma_max={sv[-1] / sv[0]:.2e})",
            omega_estimate=nearest,
        )
    return np.linalg.solve(system, rhs)


def lambda_check(state, omega, xc=None, kernel=None, include_hartree=False, eta=0.0):
    """``|lambda(omega) - 1|`` for the eigenvalue problem

        sum_t' M[t, t'] / (omega - omega_t' + i eta) xi_t' = lambda xi_t

    over all KS transitions, taking the eigenvalue closest to 1. Returns
    ``nan`` when ``omega`` sits on a KS pole whose coupling column is
    nonzero only in the 0/0 sense (zero kernel at an uncorrected pole).
    """
    if kernel is None:
        kernel = response_kernel(state, xc, include_hartree)
    u = transition_amplitudes(state)
    m = u.conj().T @ np.asarray(kernel) @ u
    denom = omega - state.transition_energies + 1j * eta
    scale = max(1.0, float(np.max(np.abs(state.transition_energies))))
    on_pole = np.abs(denom) < 1e-14 * scale
    if np.any(on_pole):
        if not np.any(m[:, on_pole]):
            return float("nan")
        raise NearResonanceError(f"omega={omega} sits on a KS pole with nonzero coupling")
    values = np.linalg.eigvals(m / denom[None, :])
    return float(np.min(np.abs(values - 1.0)))


@dataclass
class DFTGapResult:
    """Gap estimate at one schedule point.

    ``status`` is ``"ok"``, ``"reordered"`` (another pole's corrected
    excitation fell below the lowest pole's) or ``"flagged"`` (non-positive
    corrected gap).
    """

    s: float
    gap: float
    omega_min: float
    delta_e: float
    status: str = "ok"
    blocks: list = field(default_factory=list, repr=False)

    def __float__(self):
        return float(self.gap)


def dft_gap(state, xc=None, group_tol=None, kernel=None, include_hartree=False):
    """``[eps_1 - eps_0] + delta_E`` from the lowest KS pole's single-pole block."""
    state.require_converged()
    blocks = casida_blocks(state, xc, group_tol, kernel, include_hartree)
    lowest = blocks[0]
    gap = lowest.omega_star + lowest.delta_e
    status = "ok"
    if len(blocks) > 1 and min(float(np.min(b.corrected)) for b in blocks[1:]) < gap:
        status = "reordered"
    if not gap > 0:
        status = "flagged"
    return DFTGapResult(state.s, float(gap), lowest.omega_star, lowest.delta_e, status, blocks)


@dataclass
class PremiseResult:
    """Ground-state ``<a+_y Q_y + Q_y^dag a_y>`` per site and a degeneracy flag."""

    s: float
    values: np.ndarray
    degenerate: bool


def runge_gross_premise(instance, s, degeneracy_tol=1e-10, via="qubit"):
    """Ground-state expectation of the JW hopping operator at every site.

    By the JW map this equals ``<sigma_x(y)>``; ``via="fermion"`` evaluates
    it with the fermionized Hamiltonian and ``a+ Q + Q^dag a`` instead.
    """
    from .exact import ScheduleOperators, lowest_eigenpairs

    check_instance(instance)
    s = check_schedule_point(s)
    n = instance.n_sites
    if via == "qubit":
        pairs = ScheduleOperators(instance).eigenpairs(s, min(2, 1 << n))
        psi = pairs[0].vector
        idx = np.arange(psi.size)
        values = np.array(
            [np.real(np.vdot(psi, psi[idx ^ (1 << (n - 1 - y))])) for y in range(n)]
        )
    elif via == "fermion":
        from .fermion import build_fermion_algebra, build_fermionized_hamiltonian

        algebra = build_fermion_algebra(instance.geometry, instance.jw_m)
        ham = build_fermionized_hamiltonian(instance, s, algebra)
        pairs = lowest_eigenpairs(ham.operator, min(2, 1 << n))
        psi = pairs[0].vector
        values = np.array([np.real(np.vdot(psi, algebra.sigma_x(y) @ psi)) for y in range(n)])
    else:
        raise DomainError(f"unknown evaluation route {via!r}")
    degenerate = len(pairs) > 1 and pairs[1].value - pairs[0].value < degeneracy_tol
    return PremiseResult(s, values, bool(degenerate))
