"""2D Jordan-Wigner fermionization of the qubit register.

Qubits map to spinless lattice fermions through

    sigma+(r) = 2 a+_r Q_r,   sigma-(r) = 2 Q_r^dag a_r,   sigma_z(r) = 2 n_r - 1,

with the disorder operator ``Q_r = exp(-i phi_r)`` and
``phi_r = (2m + 1) sum_r' Phi(r, r') n_r'``, where ``Phi(r, r')`` is the
angle of ``r - r'`` measured from the x axis.

Fock states use occupation bits with site 0 as the most significant bit.
The annihilators carry an internal 1D (row-major) string so that they obey
the canonical anticommutation relations; the 2D phases are attached on top.
Because ``sigma_z = 2n - 1``, an occupied site corresponds to qubit ``|0>``.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._validation import HILBERT_CAP, check_instance, check_qubit_count, check_schedule_point
from .exceptions import InstanceValidationError
from .hamiltonian import QubitOperator
from .instance import SignConvention

__all__ = [
    "angle",
    "angle_table",
    "FermionAlgebra",
    "build_fermion_algebra",
    "NumberRepresentation",
    "number_representation",
    "FermionizedHamiltonian",
    "build_fermionized_hamiltonian",
    "substituted_problem",
    "LatticeGreenFunction",
    "forward_difference",
    "lattice_green_function",
    "CurrentField",
    "fermion_current",
    "continuity_residual",
]

TWO_PI = 2.0 * math.pi


def _position(site, geometry):
    if isinstance(site, (tuple, list, np.ndarray)):
        x, y = site
        geometry.site_index(int(x), int(y))
        return float(x), float(y)
    x, y = geometry.coords(int(site))
    return float(x), float(y)


def angle(r, r_prime, geometry):
    """Angle of ``r - r'`` from the x axis on the branch [0, 2pi).

    Sites may be given as indices or ``(x, y)`` pairs; ``angle(r, r) == 0``.
    """
    x1, y1 = _position(r, geometry)
    x2, y2 = _position(r_prime, geometry)
    if x1 == x2 and y1 == y2:
        return 0.0
    value = math.atan2(y1 - y2, x1 - x2) % TWO_PI
    # atan2 can return -0.0 or values that round up to exactly 2pi.
    return 0.0 if value >= TWO_PI else value + 0.0


def angle_table(geometry):
    """(N, N) matrix ``Phi[r, r']`` with zero diagonal."""
    pos = geometry.positions().astype(float)
    dx = pos[:, None, 0] - pos[None, :, 0]
    dy = pos[:, None, 1] - pos[None, :, 1]
    table = np.mod(np.arctan2(dy, dx), TWO_PI)
    table[table >= TWO_PI] = 0.0
    np.fill_diagonal(table, 0.0)
    return table


def _occupations(n):
    dim = 1 << n
    return ((np.arange(dim)[:, None] >> (n - 1 - np.arange(n))) & 1).astype(np.int8)


@dataclass(frozen=True)
class FermionAlgebra:
    """Fermion operators on the 2^N Fock space of a lattice.

    ``annihilators[r]`` is a sparse ``a_r``; ``occupations`` is the (dim, N)
    table of occupation numbers per basis state; ``phase_exponents[:, r]``
    is the diagonal of ``phi_r``.
    """

    geometry: object
    m: int
    annihilators: tuple
    occupations: np.ndarray
    angles: np.ndarray
    phase_exponents: np.ndarray

    @property
    def n_sites(self):
        return self.geometry.n_sites

    @property
    def dim(self):
        return 1 << self.n_sites

    @property
    def statistics_factor(self):
        """``1 / (2 pi theta) = 2m + 1``."""
        return 2 * self.m + 1

    @property
    def theta(self):
        return 1.0 / (TWO_PI * self.statistics_factor)

    def annihilator(self, r):
        return self.annihilators[r]

    def creator(self, r):
        return self.annihilators[r].conj().T.tocsr()

    def number(self, r):
        return sp.diags(self.occupations[:, r].astype(float), format="csr")

    def disorder_diagonal(self, r):
        return np.exp(-1j * self.phase_exponents[:, r])

    def disorder(self, r):
        """``Q_r = exp(-i phi_r)``, diagonal in the Fock basis."""
        return sp.diags(self.disorder_diagonal(r), format="csr")

    def sigma_plus(self, r):
        return (2.0 * self.creator(r) @ self.disorder(r)).tocsr()

    def sigma_minus(self, r):
        return (2.0 * self.disorder(r).conj().T @ self.annihilator(r)).tocsr()

    def sigma_x(self, r):
        """``a+_r Q_r + Q_r^dag a_r``."""
        return ((self.sigma_plus(r) + self.sigma_minus(r)) * 0.5).tocsr()

    def sigma_y(self, r):
        return ((self.sigma_plus(r) - self.sigma_minus(r)) * (0.5 / 1j)).tocsr()

    def sigma_z(self, r):
        return (2.0 * self.number(r) - sp.identity(self.dim, format="csr")).tocsr()


def build_fermion_algebra(geometry, m=0, cap=HILBERT_CAP):
    n = check_qubit_count(geometry.n_sites, cap)
    if isinstance(m, bool) or not isinstance(m, (int, np.integer)):
        raise InstanceValidationError(f"m must be an integer, got {m!r}")
    dim = 1 << n
    occ = _occupations(n)
    index = np.arange(dim)
    annihilators = []
    for r in range(n):
        parity = occ[:, :r].sum(axis=1) if r else np.zeros(dim, dtype=int)
        sign = 1.0 - 2.0 * (parity & 1)
        filled = index[occ[:, r] == 1]
        mask = 1 << (n - 1 - r)
        a = sp.csr_matrix(
            (sign[filled].astype(complex), (filled - mask, filled)), shape=(dim, dim)
        )
        annihilators.append(a)
    angles = angle_table(geometry)
    # phi_r = (2m+1) sum_r' Phi(r, r') n_r' evaluated on every basis state.
    exponents = (2 * int(m) + 1) * (occ.astype(float) @ angles.T)
    return FermionAlgebra(geometry, int(m), tuple(annihilators), occ, angles, exponents)


@dataclass(frozen=True)
class NumberRepresentation:
    """Problem Hamiltonian written in occupation operators.

    ``H_P = sum_r onsite[r] n_r + sum_{r != r'} pair[r, r'] n_r n_r' + constant``
    with the pair sum running over ordered pairs.
    """

    onsite: np.ndarray
    pair: np.ndarray
    constant: float
    node_weights: np.ndarray
    incident_weight: np.ndarray
    potential: np.ndarray

    def energy(self, occupations):
        """Diagonal value for occupation vector(s) of shape (..., N)."""
        occ = np.asarray(occupations, dtype=float)
        pair_term = np.einsum("...i,ij,...j->...", occ, self.pair, occ)
        return occ @ self.onsite + pair_term + self.constant


def number_representation(instance):
    """Expand ``H_P`` with ``sigma_z = 2n - 1``.

    The node weight splits as ``w_r = v_r + W_r`` with ``W_r`` the incident
    edge weight. Under ``GROUND_ENCODES_MAX`` the site potential is ``v_r``
    and the ordered pair coupling is ``+w_rr'``; ``LITERAL`` flips both
    signs. The identity part is kept in ``constant``.
    """
    check_instance(instance)
    weights = instance.node_weight_array
    edges = np.array(instance.edge_matrix)
    incident = edges.sum(axis=1)
    potential = weights - incident
    edge_total = sum(w for _, _, w in instance.edges)
    if instance.sign_convention is SignConvention.LITERAL:
        onsite, pair, constant = -potential, -edges, float(weights.sum())
    else:
        onsite, pair, constant = potential, edges, float(edge_total)
    return NumberRepresentation(onsite, pair, constant, weights, incident, potential)


@dataclass(frozen=True)
class FermionizedHamiltonian:
    """``H_f(s)`` on the Fock space together with its coefficient split."""

    operator: QubitOperator
    s: float
    numbers: NumberRepresentation
    algebra: FermionAlgebra

    def toarray(self):
        return self.operator.toarray()


def build_fermionized_hamiltonian(instance, s, algebra=None, m=None, cap=HILBERT_CAP):
    """Fermionized schedule Hamiltonian

    ``(1-s) sum_r [a+_r Q_r + Q_r^dag a_r] + s (sum_r v_r n_r + sum_{r!=r'} w n_r n_r' + C)``

    (coefficients per :func:`number_representation`). It is unitarily
    equivalent to the qubit ``H(s)``.
    """
    check_instance(instance)
    s = check_schedule_point(s)
    if algebra is None:
        algebra = build_fermion_algebra(
            instance.geometry, instance.jw_m if m is None else m, cap
        )
    numbers = number_representation(instance)
    dim = algebra.dim
    kinetic = sp.csr_matrix((dim, dim), dtype=complex)
    for r in range(algebra.n_sites):
        kinetic = kinetic + algebra.sigma_x(r)
    diagonal = numbers.energy(algebra.occupations)
    matrix = (1.0 - s) * kinetic + s * sp.diags(diagonal.astype(complex))
    return FermionizedHamiltonian(
        QubitOperator(matrix.tocsr(), algebra.n_sites), s, numbers, algebra
    )


def substituted_problem(instance, algebra):
    """H_P with each ``sigma_z`` replaced by ``2n - 1`` matrix by matrix.

    Independent of :func:`number_representation`; used to cross-check it.
    """
    dim = algebra.dim
    ident = sp.identity(dim, format="csr", dtype=complex)
    sign = -1.0 if instance.sign_convention is SignConvention.LITERAL else 1.0
    z = [algebra.sigma_z(r) for r in range(algebra.n_sites)]
    total = sp.csr_matrix((dim, dim), dtype=complex)
    for r, w in enumerate(instance.node_weights):
        total = total + w * (ident + sign * z[r]) * 0.5
    for a, b, w in instance.edges:
        total = total + w * (ident + sign * (z[a] @ z[b])) * 0.5
    return total.tocsr()


# --- lattice Green's function and fermion current -------------------------

BOUNDARIES = ("open", "periodic", "dirichlet")


def forward_difference(geometry, k, boundary="open"):
    """Matrix of ``(D_k f)(r) = f(r + e_k) - f(r)`` for direction k in {1, 2}.

    ``open`` drops links leaving the lattice, ``periodic`` wraps them, and
    ``dirichlet`` links to a ghost site held at zero.
    """
    if boundary not in BOUNDARIES:
        raise InstanceValidationError(f"unknown boundary {boundary!r}")
    if k not in (1, 2):
        raise InstanceValidationError("direction k must be 1 or 2")
    n = geometry.n_sites
    d = np.zeros((n, n))
    for r in range(n):
        x, y = geometry.coords(r)
        nx, ny = (x + 1, y) if k == 1 else (x, y + 1)
        inside = nx < geometry.cols and ny < geometry.rows
        if inside:
            d[r, geometry.site_index(nx, ny)] += 1.0
            d[r, r] -= 1.0
        elif boundary == "periodic":
            extent = geometry.cols if k == 1 else geometry.rows
            if extent > 1:
                d[r, geometry.site_index(nx % geometry.cols, ny % geometry.rows)] += 1.0
                d[r, r] -= 1.0
        elif boundary == "dirichlet":
            d[r, r] -= 1.0
    return d


@dataclass(frozen=True)
class LatticeGreenFunction:
    """``G`` solving ``sum_k D_k^* D_k G = -2 pi delta`` on the solvable subspace.

    ``laplacian`` is the symmetric ``-sum_k D_k^T D_k``. For singular
    Laplacians (open, periodic) ``G`` is the zero-mean solution and
    ``projector`` removes the constant mode from the right-hand side.
    """

    geometry: object
    boundary: str
    matrix: np.ndarray
    laplacian: np.ndarray
    differences: tuple
    projector: np.ndarray

    def residual(self):
        """Max-norm of ``L G + 2 pi P`` (zero for an exact solve)."""
        return float(np.abs(self.laplacian @ self.matrix + TWO_PI * self.projector).max())


def lattice_green_function(geometry, boundary="open"):
    n = geometry.n_sites
    if n < 2:
        raise InstanceValidationError("a lattice Green's function needs at least 2 sites")
    diffs = tuple(forward_difference(geometry, k, boundary) for k in (1, 2))
    lap = -sum(d.T @ d for d in diffs)
    if boundary == "dirichlet":
        projector = np.eye(n)
        g = -TWO_PI * np.linalg.solve(lap, projector)
    else:
        projector = np.eye(n) - np.full((n, n), 1.0 / n)
        g = -TWO_PI * np.linalg.pinv(lap, hermitian=True)
    g = 0.5 * (g + g.T)
    return LatticeGreenFunction(geometry, boundary, g, lap, diffs, projector)


@dataclass(frozen=True)
class CurrentField:
    """Density ``j_0 = n`` and spatial currents ``j_k`` on a uniform time grid.

    ``current`` has shape (T, 2, N); ``rate`` is the finite-difference
    ``dn/dt`` that generated it.
    """

    density: np.ndarray
    current: np.ndarray
    rate: np.ndarray
    dt: float

    @property
    def times(self):
        return self.dt * np.arange(self.density.shape[0])


def fermion_current(density, dt, green):
    """``j_{r,k} = (1/2pi) sum_y (D_k G)_{r,y} dn_y/dt`` from a density trajectory.

    ``dn/dt`` uses second-order central differences (one-sided at the ends).
    """
    density = np.asarray(density, dtype=float)
    if density.ndim != 2 or density.shape[0] < 3:
        raise InstanceValidationError("need a (T, N) density trajectory with T >= 3")
    if density.shape[1] != green.geometry.n_sites:
        raise InstanceValidationError("trajectory width does not match the lattice")
    rate = np.gradient(density, dt, axis=0, edge_order=2)
    current = np.stack(
        [(rate @ (d @ green.matrix).T) / TWO_PI for d in green.differences], axis=1
    )
    return CurrentField(density, current, rate, float(dt))


def continuity_residual(field, green, rate=None):
    """Per-time, per-site ``dn/dt + sum_k D_k^* j_k``.

    ``rate`` defaults to the finite-difference rate stored on ``field``;
    pass the exact rate to measure discretization error instead.
    """
    rate = field.rate if rate is None else np.asarray(rate, dtype=float)
    divergence = sum(-(field.current[:, k, :] @ green.differences[k]) for k in (0, 1))
    return rate + divergence
