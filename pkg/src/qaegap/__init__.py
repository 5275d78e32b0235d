"""Minimum-gap estimation for adiabatic MAXCUT.

Exact diagonalization serves as the reference; the scalable route maps
the qubit Hamiltonian onto 2D lattice fermions, solves a per-site
Kohn-Sham problem, and corrects its lowest excitation in linear response.
"""

from .evolution import EvolutionResult, propagate, runtime_bound, success_probability
from .exact import ExactGapEstimator, GapCurve, adiabatic_numerator, exact_gap_curve, gap_at, lowest_eigenpairs
from .exceptions import (
    ConvergenceError,
    DegenerateGapError,
    DomainError,
    InstanceFormatError,
    InstanceValidationError,
    InvalidStateError,
    NearResonanceError,
    NumericalError,
    QaeGapError,
    ResourceLimitError,
    ScanError,
    SolverError,
    StepSizeError,
)
from .fermion import (
    build_fermion_algebra,
    build_fermionized_hamiltonian,
    continuity_residual,
    fermion_current,
    lattice_green_function,
    number_representation,
)
from .hamiltonian import QubitOperator, build_driver, build_problem, build_schedule_hamiltonian, interpolate
from .instance import (
    LatticeGeometry,
    MaxCutInstance,
    SignConvention,
    brute_force_max,
    generate_random,
    payoff,
    read_instance,
    write_instance,
)
from .kohn_sham import KohnShamSCF, KohnShamState, energy_functional, scf_solve
from .response import DFTGapResult, casida_blocks, dft_gap, lambda_check, runge_gross_premise, solve_response
from .scan import DFTGapEstimator, GapReport, ScalingTable, compare, scaling_study, scan
from .xc import DiscontinuityProbe, LocalCorrelation, NoCorrelation, xc_from_config

__version__ = "0.1.0"
