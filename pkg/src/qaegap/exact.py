"""Exact-diagonalization reference for the schedule spectrum.

Provides the lowest eigenpairs of H(s), the gap curve E1(s) - E0(s), its
minimum, and the adiabatic numerator ``M = max_s |<E1|dH/ds|E0>|``.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from joblib import Parallel, delayed
from scipy.optimize import minimize_scalar
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import HILBERT_CAP, check_grid, check_instance, check_qubit_count, check_schedule_point, uniform_grid
from .exceptions import SolverError
from .hamiltonian import QubitOperator, build_driver, problem_diagonal

__all__ = [
    "EigenPair",
    "GapPoint",
    "GapCurve",
    "ScheduleOperators",
    "lowest_eigenpairs",
    "gap_at",
    "adiabatic_numerator",
    "exact_gap_curve",
    "ExactGapEstimator",
]

DENSE_THRESHOLD = 10
DEGENERACY_TOL = 1e-10


class EigenPair(NamedTuple):
    value: float
    vector: np.ndarray


class GapPoint(NamedTuple):
    s: float
    gap: float
    e0: float
    e1: float
    degenerate: bool


@dataclass
class GapCurve:
    """Gap samples on a schedule grid plus the minimum and its location.

    ``s_star`` is the grid point of the minimum, ties going to the smaller
    ``s``. When refinement ran, ``refined_s_star``/``refined_gap_min`` hold
    the bounded Brent estimate between neighbouring grid points.
    """

    grid: np.ndarray
    gaps: np.ndarray
    method: str = "exact"
    degenerate: np.ndarray = None
    e0: np.ndarray = None
    e1: np.ndarray = None
    refined_s_star: float = None
    refined_gap_min: float = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.gaps = np.asarray(self.gaps, dtype=float)
        if self.degenerate is None:
            self.degenerate = np.zeros(self.grid.size, dtype=bool)

    @property
    def argmin(self):
        return int(np.argmin(self.gaps))

    @property
    def gap_min(self):
        return float(self.gaps[self.argmin])

    @property
    def s_star(self):
        return float(self.grid[self.argmin])

    @property
    def grid_step(self):
        return float(np.max(np.diff(self.grid))) if self.grid.size > 1 else 0.0


def _as_matrix(op):
    if isinstance(op, QubitOperator):
        return op.matrix
    return op


def _norm_estimate(matrix):
    """Cheap upper bound on the spectral norm (max absolute row sum)."""
    if sp.issparse(matrix):
        return float(abs(matrix).sum(axis=1).max())
    return float(np.abs(matrix).sum(axis=1).max())


def lowest_eigenpairs(op, k=2, dense_threshold=DENSE_THRESHOLD, tol=1e-12, maxiter=None):
    """The ``k`` algebraically smallest eigenpairs, ascending.

    Operators on at most ``dense_threshold`` qubits go to LAPACK; larger ones
    to implicitly restarted Lanczos (ARPACK). Every returned pair is checked
    against ``||Hv - Ev|| <= 1e-8 ||H||``.
    """
    matrix = _as_matrix(op)
    dim = matrix.shape[0]
    if k < 1 or k > dim:
        raise ValueError(f"k={k} must lie in [1, {dim}]")
    n_qubits = int(round(np.log2(dim)))

    if n_qubits <= dense_threshold or k >= dim - 1:
        dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
        values, vectors = sla.eigh(dense, subset_by_index=[0, k - 1])
    else:
        # Fixed start vector: ARPACK's default random start is not reproducible.
        v0 = np.random.default_rng(0).standard_normal(dim)
        if np.iscomplexobj(matrix.data if sp.issparse(matrix) else matrix):
            v0 = v0.astype(complex)
        ncv = min(dim, max(2 * k + 1, 20))
        try:
            values, vectors = eigsh(matrix, k=k, which="SA", v0=v0, ncv=ncv, tol=tol, maxiter=maxiter)
        except ArpackNoConvergence as exc:
            raise SolverError(
                f"Lanczos did not converge: {len(exc.eigenvalues)} of {k} eigenpairs found"
            ) from None
        order = np.argsort(values)
        values, vectors = values[order], vectors[:, order]

    scale = max(1.0, _norm_estimate(matrix))
    residuals = np.linalg.norm(matrix @ vectors - vectors * values, axis=0)
    worst = float(residuals.max())
    if worst > 1e-8 * scale:
        raise SolverError(f"eigenpair residual {worst:.3e} above 1e-8*||H||", residual=worst)
    return [EigenPair(float(v), vectors[:, i]) for i, v in enumerate(values)]


class ScheduleOperators:
    """H0 and the H_P diagonal for one instance, reused across schedule points."""

    def __init__(self, instance, cap=HILBERT_CAP, dense_threshold=DENSE_THRESHOLD):
        check_instance(instance)
        self.n = check_qubit_count(instance.n_sites, cap)
        self.dense_threshold = dense_threshold
        self.h0 = build_driver(self.n, cap).matrix
        self.hp_diag = problem_diagonal(instance, cap)
        self._dense = self.n <= dense_threshold
        if self._dense:
            self._h0_dense = self.h0.toarray()

    @property
    def perturbation(self):
        """dH/ds = H_P - H0 as a sparse matrix."""
        return sp.diags(self.hp_diag, format="csr") - self.h0

    def at(self, s):
        if self._dense:
            h = (1.0 - s) * self._h0_dense
            h[np.diag_indices_from(h)] += s * self.hp_diag
            return h
        return ((1.0 - s) * self.h0 + sp.diags(s * self.hp_diag)).tocsr()

    def eigenpairs(self, s, k):
        return lowest_eigenpairs(self.at(s), k, dense_threshold=self.dense_threshold)


def _gap_point(ops, s, degeneracy_tol):
    e0, e1 = (pair.value for pair in ops.eigenpairs(s, 2))
    gap = e1 - e0
    return GapPoint(s, gap, e0, e1, bool(gap < degeneracy_tol))


def gap_at(instance, s, degeneracy_tol=DEGENERACY_TOL, dense_threshold=DENSE_THRESHOLD, operators=None):
    """Exact gap ``E1(s) - E0(s)``; degenerate points are flagged, not hidden."""
    s = check_schedule_point(s)
    ops = operators or ScheduleOperators(instance, dense_threshold=dense_threshold)
    return _gap_point(ops, s, degeneracy_tol)


def _transition_element(ops, s, degeneracy_tol):
    dim = 1 << ops.n
    k = min(dim, 4)
    while True:
        pairs = ops.eigenpairs(s, k)
        values = np.array([p.value for p in pairs])
        # Grow k until the E1 multiplet is fully resolved.
        if k == dim or values[-1] - values[1] >= degeneracy_tol:
            break
        k = min(dim, 2 * k)
    if values[1] - values[0] < degeneracy_tol:
        # Degenerate ground level: the eigenvectors continuous in s diagonalize
        # dH/ds inside the multiplet, so E0 and E1 have no coupling there.
        return 0.0
    ground = pairs[0].vector
    multiplet = [i for i in range(1, len(pairs)) if abs(values[i] - values[1]) < degeneracy_tol]
    excited = np.column_stack([pairs[i].vector for i in multiplet])
    image = ops.perturbation @ ground
    # Largest |<u|V|E0>| over unit u in the E1 eigenspace is the norm of the projection.
    return float(np.linalg.norm(excited.conj().T @ image))


def adiabatic_numerator(instance, grid, degeneracy_tol=DEGENERACY_TOL, dense_threshold=DENSE_THRESHOLD):
    """``M = max over grid of |<E1(s)|(H_P - H0)|E0(s)>|``.

    For a degenerate first excited level the maximal element over that
    eigenspace is used.
    """
    grid = np.unique(check_grid(grid, strict=False))
    ops = ScheduleOperators(instance, dense_threshold=dense_threshold)
    return max(_transition_element(ops, float(s), degeneracy_tol) for s in grid)


def _refine(ops, curve, degeneracy_tol):
    i = curve.argmin
    grid = curve.grid
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    if hi <= lo:
        return curve.s_star, curve.gap_min
    result = minimize_scalar(
        lambda s: _gap_point(ops, float(s), degeneracy_tol).gap,
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-10},
    )
    if result.fun < curve.gap_min:
        return float(result.x), float(result.fun)
    return curve.s_star, curve.gap_min


def exact_gap_curve(
    instance,
    grid,
    refine=False,
    degeneracy_tol=DEGENERACY_TOL,
    dense_threshold=DENSE_THRESHOLD,
    n_jobs=None,
):
    """Exact gap at every grid point; minimum ties resolve toward smaller s."""
    grid = check_grid(grid)
    ops = ScheduleOperators(instance, dense_threshold=dense_threshold)
    points = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_gap_point)(ops, float(s), degeneracy_tol) for s in grid
    )
    curve = GapCurve(
        grid=grid,
        gaps=np.array([p.gap for p in points]),
        method="exact",
        degenerate=np.array([p.degenerate for p in points]),
        e0=np.array([p.e0 for p in points]),
        e1=np.array([p.e1 for p in points]),
        diagnostics={"grid_step": float(np.max(np.diff(grid))) if grid.size > 1 else 0.0},
    )
    if refine and grid.size > 1:
        curve.refined_s_star, curve.refined_gap_min = _refine(ops, curve, degeneracy_tol)
    return curve


class ExactGapEstimator(BaseEstimator):
    """Exact minimum-gap estimator with a scikit-learn style interface.

    Parameters
    ----------
    n_points, smin, smax : schedule grid (ignored when ``grid`` is given).
    grid : explicit schedule grid.
    refine : run bounded Brent refinement around the grid minimum.
    compute_numerator : also compute the adiabatic numerator ``M`` on the grid.
    dense_threshold : qubit count up to which LAPACK is used.
    degeneracy_tol : gaps below this are flagged degenerate.
    n_jobs : joblib worker count for grid points.

    Attributes
    ----------
    curve_ : GapCurve
    gap_min_, s_star_ : grid minimum and its location.
    numerator_ : adiabatic numerator (when requested).
    """

    def __init__(
        self,
        n_points=101,
        smin=0.0,
        smax=1.0,
        grid=None,
        refine=True,
        compute_numerator=False,
        dense_threshold=DENSE_THRESHOLD,
        degeneracy_tol=DEGENERACY_TOL,
        n_jobs=None,
    ):
        self.n_points = n_points
        self.smin = smin
        self.smax = smax
        self.grid = grid
        self.refine = refine
        self.compute_numerator = compute_numerator
        self.dense_threshold = dense_threshold
        self.degeneracy_tol = degeneracy_tol
        self.n_jobs = n_jobs

    def _grid(self):
        if self.grid is not None:
            return check_grid(self.grid)
        return check_grid(uniform_grid(self.n_points, self.smin, self.smax))

    def fit(self, instance, y=None):
        check_instance(instance)
        grid = self._grid()
        self.instance_ = instance
        self.curve_ = exact_gap_curve(
            instance,
            grid,
            refine=self.refine,
            degeneracy_tol=self.degeneracy_tol,
            dense_threshold=self.dense_threshold,
            n_jobs=self.n_jobs,
        )
        self.grid_ = self.curve_.grid
        self.gaps_ = self.curve_.gaps
        self.gap_min_ = self.curve_.gap_min
        self.s_star_ = self.curve_.s_star
        if self.compute_numerator:
            self.numerator_ = adiabatic_numerator(
                instance, grid, self.degeneracy_tol, self.dense_threshold
            )
        return self

    def predict(self, s):
        """Exact gaps at arbitrary schedule points."""
        check_is_fitted(self, "curve_")
        points = check_grid(s, strict=False)
        ops = ScheduleOperators(self.instance_, dense_threshold=self.dense_threshold)
        return np.array([_gap_point(ops, float(x), self.degeneracy_tol).gap for x in points])
