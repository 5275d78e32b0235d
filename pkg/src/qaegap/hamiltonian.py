"""Sparse qubit Hamiltonians for the adiabatic schedule H(s) = (1-s) H0 + s HP.

Basis convention: index ``i`` holds the bit string of ``i`` with site 0 as
the most significant bit, and ``sigma_z |0> = +|0>``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._validation import HILBERT_CAP, check_instance, check_qubit_count, check_schedule_point
from .exceptions import InstanceValidationError
from .instance import SignConvention, payoff_table

__all__ = [
    "QubitOperator",
    "build_driver",
    "build_problem",
    "problem_diagonal",
    "interpolate",
    "apply",
    "build_schedule_hamiltonian",
    "sigma_x",
    "sigma_z",
]


@dataclass(frozen=True)
class QubitOperator:
    """Hermitian operator on ``n_qubits`` qubits stored as a CSR matrix."""

    matrix: sp.csr_matrix
    n_qubits: int

    def __post_init__(self):
        dim = 1 << self.n_qubits
        if self.matrix.shape != (dim, dim):
            raise InstanceValidationError(
                f"matrix shape {self.matrix.shape} does not match 2^{self.n_qubits}"
            )
        object.__setattr__(self, "matrix", sp.csr_matrix(self.matrix))

    @property
    def dim(self):
        return 1 << self.n_qubits

    def toarray(self):
        return self.matrix.toarray()

    def diagonal(self):
        return self.matrix.diagonal()

    def hermiticity_error(self):
        diff = self.matrix - self.matrix.conj().T
        return float(abs(diff).max()) if diff.nnz else 0.0

    def is_diagonal(self):
        coo = self.matrix.tocoo()
        off = coo.row != coo.col
        return not np.any(coo.data[off] != 0)

    def apply(self, vector):
        return apply(self, vector)

    def __matmul__(self, vector):
        return apply(self, vector)


def _bit_masks(n):
    return 1 << (n - 1 - np.arange(n))


def sigma_x(n, site):
    """Sparse sigma_x on ``site`` of an ``n``-qubit register."""
    dim = 1 << n
    rows = np.arange(dim)
    cols = rows ^ int(_bit_masks(n)[site])
    return sp.csr_matrix((np.ones(dim), (rows, cols)), shape=(dim, dim))


def sigma_z(n, site):
    dim = 1 << n
    bits = (np.arange(dim) >> (n - 1 - site)) & 1
    return sp.diags(1.0 - 2.0 * bits, format="csr")


def build_driver(n, cap=HILBERT_CAP):
    """Transverse-field driver ``sum_r sigma_x(r)``.

    Its ground state is the product of ``(|0> - |1>)/sqrt(2)`` with energy ``-n``.
    """
    n = check_qubit_count(n, cap)
    matrix = sp.csr_matrix((1 << n, 1 << n))
    for site in range(n):
        matrix = matrix + sigma_x(n, site)
    return QubitOperator(matrix.tocsr(), n)


def problem_diagonal(instance, cap=HILBERT_CAP):
    """Diagonal of the problem Hamiltonian in the computational basis.

    Under ``GROUND_ENCODES_MAX`` the entry for string ``s`` is
    ``C - P(s)`` with ``C`` the total weight; under ``LITERAL`` it is
    ``P(s)``.
    """
    check_instance(instance)
    check_qubit_count(instance.n_sites, cap)
    table = payoff_table(instance)
    if instance.sign_convention is SignConvention.LITERAL:
        return table
    return instance.total_weight - table


def build_problem(instance, cap=HILBERT_CAP):
    diag = problem_diagonal(instance, cap)
    return QubitOperator(sp.diags(diag, format="csr"), instance.n_sites)


def interpolate(h0, hp, s):
    """``(1 - s) h0 + s hp`` for a schedule point ``s`` in [0, 1]."""
    s = check_schedule_point(s)
    if h0.n_qubits != hp.n_qubits:
        raise InstanceValidationError(
            f"operators act on {h0.n_qubits} and {hp.n_qubits} qubits"
        )
    if s == 0.0:
        return h0
    if s == 1.0:
        return hp
    return QubitOperator((1.0 - s) * h0.matrix + s * hp.matrix, h0.n_qubits)


def build_schedule_hamiltonian(instance, s, cap=HILBERT_CAP):
    return interpolate(build_driver(instance.n_sites, cap), build_problem(instance, cap), s)


def apply(op, vector):
    """Matrix-vector product; accepts a single vector or a (dim, k) block."""
    vector = np.asarray(vector)
    if vector.shape[0] != op.dim or vector.ndim > 2:
        raise InstanceValidationError(
            f"vector of shape {vector.shape} incompatible with dimension {op.dim}"
        )
    return op.matrix @ vector
