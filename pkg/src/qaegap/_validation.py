"""Input validation helpers used at every public entry point."""

import numbers

import numpy as np

from .exceptions import DomainError, InstanceValidationError, ResourceLimitError

#: Largest qubit count for which operators on the full 2^N space are built.
HILBERT_CAP = 20

#: Largest node count for exhaustive cut enumeration.
ENUMERATION_CAP = 24


def check_qubit_count(n, cap=HILBERT_CAP):
    if not isinstance(n, numbers.Integral) or n < 1:
        raise InstanceValidationError(f"qubit count must be a positive integer, got {n!r}")
    if n > cap:
        raise ResourceLimitError(f"N={n} exceeds the Hilbert-space cap of {cap} qubits")
    return int(n)


def check_schedule_point(s, *, open_interval=False, name="s"):
    """Return ``s`` as a float after checking it lies in [0, 1] (or (0, 1))."""
    try:
        s = float(s)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a real number, got {s!r}") from None
    if not np.isfinite(s):
        raise DomainError(f"{name} must be finite, got {s}")
    if open_interval:
        if not 0.0 < s < 1.0:
            raise DomainError(f"{name}={s} outside the open interval (0, 1)")
    elif not 0.0 <= s <= 1.0:
        raise DomainError(f"{name}={s} outside [0, 1]")
    return s


def check_grid(grid, *, open_interval=False, strict=True):
    """Validate a schedule grid and return it as a 1-D float array.

    With ``strict`` the grid must be strictly increasing; otherwise it is
    only required to be non-decreasing (duplicates allowed).
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 0:
        grid = grid.reshape(1)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("grid must be a non-empty 1-D sequence")
    for s in grid:
        check_schedule_point(s, open_interval=open_interval)
    steps = np.diff(grid)
    if strict and np.any(steps <= 0):
        raise DomainError("grid must be strictly increasing")
    if not strict and np.any(steps < 0):
        raise DomainError("grid must be non-decreasing")
    return grid


def uniform_grid(n_points, smin=0.0, smax=1.0):
    if n_points < 1:
        raise DomainError("grid needs at least one point")
    if smax < smin:
        raise DomainError(f"smax={smax} < smin={smin}")
    if n_points == 1:
        return np.array([float(smin)])
    return np.linspace(smin, smax, int(n_points))


def check_state_vector(psi, dim):
    psi = np.asarray(psi)
    if psi.shape != (dim,):
        raise InstanceValidationError(f"state vector has shape {psi.shape}, expected ({dim},)")
    return psi


def check_positive(value, name):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InstanceValidationError(f"{name} must be a positive number, got {value!r}") from None
    if not (np.isfinite(value) and value > 0):
        raise InstanceValidationError(f"{name} must be positive, got {value}")
    return value


def check_instance(instance):
    # Local import: instance.py itself imports from this module.
    from .instance import MaxCutInstance

    if not isinstance(instance, MaxCutInstance):
        raise InstanceValidationError(
            f"expected a MaxCutInstance, got {type(instance).__name__}"
        )
    return instance
