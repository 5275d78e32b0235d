"""Ground-state Kohn-Sham solver for the fermionized schedule Hamiltonian.

Site-pinned fermions need no antisymmetrization across sites, so the
non-interacting KS problem factorizes into one two-level system per site.
In the local basis (|empty>, |occupied>) site ``r`` sees

    h_r = [[0,             (1-s) conj(q_r)],
           [(1-s) q_r,      s * v_ks_r    ]]

with the disorder mean field ``q_r`` and effective potential

    v_ks_r = v_r + 2 sum_{r'} w_rr' n_r' + v_c[n](r) / s.

The lower orbital is occupied and the SOF is ``n_r = |<occupied|phi_r->|^2``.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_instance, check_positive, check_schedule_point
from .exceptions import ConvergenceError, DomainError, InstanceValidationError, InvalidStateError
from .fermion import angle_table, build_fermion_algebra, build_fermionized_hamiltonian, number_representation
from .xc import NoCorrelation, xc_from_config

__all__ = [
    "KohnShamState",
    "EnergyDecomposition",
    "mean_field_q",
    "exact_disorder_expectation",
    "effective_potential",
    "site_hamiltonians",
    "scf_solve",
    "energy_functional",
    "kinetic_functional",
    "density_energy",
    "KohnShamSCF",
]


def mean_field_q(n, geometry, m=0):
    """Closure ``q_r = exp(-i (2m+1) sum_{r' != r} Phi(r, r') n_r')``.

    The disorder operator's exponent is evaluated at the c-number SOF, so
    ``|q_r| = 1``.
    """
    n = np.asarray(n, dtype=float)
    if n.shape != (geometry.n_sites,):
        raise InstanceValidationError(f"SOF has shape {n.shape}, expected ({geometry.n_sites},)")
    return np.exp(-1j * (2 * m + 1) * (angle_table(geometry) @ n))


def exact_disorder_expectation(instance, s):
    """``<Q_r>`` in the exact fermionized ground state (oracle-scale only)."""
    from .exact import lowest_eigenpairs

    algebra = build_fermion_algebra(instance.geometry, instance.jw_m)
    ham = build_fermionized_hamiltonian(instance, s, algebra)
    ground = lowest_eigenpairs(ham.operator, 1)[0].vector
    weights = np.abs(ground) ** 2
    return np.array([weights @ algebra.disorder_diagonal(r) for r in range(instance.n_sites)])


def effective_potential(instance, n, s, xc=None):
    """``v_ks`` per site; undefined at ``s = 0`` where the 1/s factor diverges."""
    check_instance(instance)
    s = check_schedule_point(s)
    if s == 0.0:
        raise DomainError("the effective potential is singular at s = 0")
    xc = xc_from_config(xc)
    numbers = number_representation(instance)
    n = np.asarray(n, dtype=float)
    hartree = 2.0 * numbers.pair @ n
    return numbers.onsite + hartree + xc.potential(n) / s


def site_hamiltonians(s, q, v_ks):
    """Stack of the (N, 2, 2) per-site KS Hamiltonians."""
    q = np.asarray(q, dtype=complex)
    h = np.zeros((q.size, 2, 2), dtype=complex)
    h[:, 0, 1] = (1.0 - s) * np.conj(q)
    h[:, 1, 0] = (1.0 - s) * q
    h[:, 1, 1] = s * np.asarray(v_ks, dtype=float)
    return h


def _diagonalize(h):
    energies, vectors = np.linalg.eigh(h)
    # Gauge: make the |empty> component of each orbital real and >= 0.
    lead = vectors[:, 0, :]
    phase = np.where(np.abs(lead) > 0, np.conj(lead) / np.maximum(np.abs(lead), 1e-300), 1.0)
    vectors = vectors * phase[:, None, :]
    return energies, vectors


@dataclass
class KohnShamState:
    """Converged (or last) SCF iterate at schedule point ``s``.

    ``orbitals[r, :, 0]`` is the occupied orbital ``phi_{r,-}`` and
    ``orbitals[r, :, 1]`` the empty one, both in the (|empty>, |occupied>)
    basis; ``energies[r]`` holds ``(eps_-, eps_+)``.
    """

    instance: object
    s: float
    xc: object
    density: np.ndarray
    q: np.ndarray
    v_ks: np.ndarray
    orbitals: np.ndarray
    energies: np.ndarray
    iterations: int
    residual: float
    converged: bool
    residual_history: list = field(default_factory=list)
    q_mode: str = "closure"

    occupations = (1.0, 0.0)

    @property
    def n_sites(self):
        return self.density.size

    @property
    def transition_energies(self):
        return self.energies[:, 1] - self.energies[:, 0]

    @property
    def orbital_density(self):
        return np.abs(self.orbitals[:, 1, 0]) ** 2

    def require_converged(self):
        if not self.converged:
            raise InvalidStateError(
                f"KS state at s={self.s} is not converged (residual {self.residual:.3e})"
            )
        return self


def _check_options(mixing, tol, max_iter):
    mixing = check_positive(mixing, "mixing")
    if mixing > 1.0:
        raise InstanceValidationError(f"mixing must lie in (0, 1], got {mixing}")
    tol = check_positive(tol, "tol")
    if int(max_iter) < 1:
        raise InstanceValidationError("max_iter must be >= 1")
    return mixing, tol, int(max_iter)


def scf_solve(
    instance,
    s,
    xc=None,
    mixing=0.3,
    tol=1e-8,
    max_iter=500,
    initial_density=None,
    q_mode="closure",
):
    """Self-consistent KS ground state at an interior schedule point.

    Linear mixing ``n <- (1 - mixing) n + mixing n'`` until
    ``max |n' - n| < tol``. Raises :class:`ConvergenceError` (carrying the
    last iterate) when ``max_iter`` is exhausted.
    """
    check_instance(instance)
    s = check_schedule_point(s, open_interval=True)
    xc = xc_from_config(xc)
    mixing, tol, max_iter = _check_options(mixing, tol, max_iter)
    geometry = instance.geometry
    n_sites = instance.n_sites

    if initial_density is None:
        n = np.full(n_sites, 0.5)
    else:
        n = np.clip(np.asarray(initial_density, dtype=float), 0.0, 1.0)
        if n.shape != (n_sites,):
            raise InstanceValidationError("initial_density has the wrong length")

    if q_mode == "exact":
        fixed_q = exact_disorder_expectation(instance, s)
    elif q_mode != "closure":
        raise InstanceValidationError(f"unknown q_mode {q_mode!r}")

    history = []
    for iteration in range(1, max_iter + 1):
        q = fixed_q if q_mode == "exact" else mean_field_q(n, geometry, instance.jw_m)
        v_ks = effective_potential(instance, n, s, xc)
        energies, orbitals = _diagonalize(site_hamiltonians(s, q, v_ks))
        n_out = np.abs(orbitals[:, 1, 0]) ** 2
        residual = float(np.max(np.abs(n_out - n)))
        history.append(residual)
        if residual < tol:
            break
        n = (1.0 - mixing) * n + mixing * n_out

    state = KohnShamState(
        instance=instance,
        s=s,
        xc=xc,
        density=n_out,
        q=q,
        v_ks=v_ks,
        orbitals=orbitals,
        energies=energies,
        iterations=iteration,
        residual=residual,
        converged=residual < tol,
        residual_history=history,
        q_mode=q_mode,
    )
    if not state.converged:
        raise ConvergenceError(
            f"SCF at s={s} not converged after {max_iter} iterations (residual {residual:.3e})",
            residual=residual,
            state=state,
        )
    return state


@dataclass(frozen=True)
class EnergyDecomposition:
    kinetic: float
    external: float
    hartree: float
    correlation: float
    constant: float

    @property
    def interaction(self):
        return self.hartree + self.correlation

    @property
    def total(self):
        return self.kinetic + self.external + self.hartree + self.correlation + self.constant


def energy_functional(state, xc=None):
    """Energy of a converged KS state split into its functional terms.

    ``kinetic`` is the KS expectation of the (1-s) hopping term, ``external``
    is ``s sum v_r n_r``, ``hartree`` is ``s sum_{r != r'} w n_r n_r'``,
    ``correlation`` is ``xi_c[n]``, and ``constant`` restores the identity
    part of ``s H_P`` so ``total`` is comparable with exact energies.
    """
    state.require_converged()
    xc = state.xc if xc is None else xc_from_config(xc)
    s = state.s
    numbers = number_representation(state.instance)
    n = state.density
    c0 = state.orbitals[:, 0, 0]
    c1 = state.orbitals[:, 1, 0]
    kinetic = float(np.sum((1.0 - s) * 2.0 * np.real(state.q * np.conj(c1) * c0)))
    return EnergyDecomposition(
        kinetic=kinetic,
        external=float(s * numbers.onsite @ n),
        hartree=float(s * n @ numbers.pair @ n),
        correlation=xc.energy(n),
        constant=float(s * numbers.constant),
    )


def kinetic_functional(n, s, q_abs=1.0):
    """Constrained-search minimum of the hopping energy at fixed SOF.

    For one site, ``min <psi|(1-s)(q a+ + q* a)|psi>`` over states with
    occupation ``n`` is ``-2 (1-s) |q| sqrt(n (1-n))``.
    """
    n = np.asarray(n, dtype=float)
    return float(np.sum(-2.0 * (1.0 - s) * np.asarray(q_abs) * np.sqrt(np.clip(n * (1.0 - n), 0.0, None))))


def density_energy(instance, n, s, xc=None, q_abs=1.0):
    """Total energy functional ``E[n]`` evaluated at an arbitrary SOF."""
    xc = xc_from_config(xc)
    numbers = number_representation(instance)
    n = np.asarray(n, dtype=float)
    return (
        kinetic_functional(n, s, q_abs)
        + s * numbers.onsite @ n
        + s * n @ numbers.pair @ n
        + xc.energy(n)
        + s * numbers.constant
    )


class KohnShamSCF(BaseEstimator):
    """Estimator wrapper around :func:`scf_solve`.

    ``fit(instance)`` solves at schedule point ``s`` and exposes
    ``state_``, ``density_``, ``transition_energies_`` and ``energy_``.
    """

    def __init__(self, s=0.5, xc=None, mixing=0.3, tol=1e-8, max_iter=500, q_mode="closure"):
        self.s = s
        self.xc = xc
        self.mixing = mixing
        self.tol = tol
        self.max_iter = max_iter
        self.q_mode = q_mode

    def fit(self, instance, y=None):
        self.state_ = scf_solve(
            instance,
            self.s,
            xc=self.xc if self.xc is not None else NoCorrelation(),
            mixing=self.mixing,
            tol=self.tol,
            max_iter=self.max_iter,
            q_mode=self.q_mode,
        )
        self.density_ = self.state_.density
        self.transition_energies_ = self.state_.transition_energies
        self.energy_ = energy_functional(self.state_)
        return self

    def transform(self, instance=None):
        """Ground-state SOF of the fitted instance."""
        check_is_fitted(self, "state_")
        return self.density_
