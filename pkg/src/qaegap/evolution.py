"""Direct Schroedinger propagation of the adiabatic schedule.

Integrates ``i dpsi/dt = H(t/T) psi`` from the ground state of the driver
with fixed-step classical RK4.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_instance, check_positive, check_state_vector
from .exceptions import DegenerateGapError, DomainError, StepSizeError
from .exact import DENSE_THRESHOLD, ScheduleOperators
from .instance import atomic_write_text

__all__ = [
    "EvolutionResult",
    "driver_ground_state",
    "propagate",
    "ground_strings",
    "success_probability",
    "runtime_bound",
    "write_trace",
]

NORM_TOL = 1e-6
RENORM_INTERVAL = 1000


@dataclass
class EvolutionResult:
    """Outcome of one propagation.

    ``norm_drift`` is the largest norm deviation seen at any renormalization
    checkpoint. ``density``/``density_rate`` (shape (steps+1, N)) are filled
    when requested: ``n_r = <(1 + sigma_z(r))/2>`` and its exact time
    derivative ``i <[H, n_r]>``.
    """

    state: np.ndarray
    T: float
    dt: float
    n_steps: int
    norm_drift: float
    success_probability: float = None
    density: np.ndarray = None
    density_rate: np.ndarray = None
    trace: list = field(default_factory=list)


def driver_ground_state(n):
    """Product state of ``(|0> - |1>)/sqrt(2)``, the ground state of ``sum sigma_x``."""
    dim = 1 << n
    bits = np.array([bin(i).count("1") for i in range(dim)])
    return ((-1.0) ** bits / math.sqrt(dim)).astype(complex)


def _occupation_masks(n):
    idx = np.arange(1 << n)
    return np.stack([((idx >> (n - 1 - r)) & 1) == 0 for r in range(n)]).astype(float)


def propagate(
    instance,
    T,
    dt=None,
    method="rk4",
    initial_state=None,
    record_density=False,
    trace_every=None,
    renorm_interval=RENORM_INTERVAL,
):
    """Propagate the schedule over runtime ``T`` with fixed step ``dt``.

    ``dt`` defaults to ``min(1e-2, T/1e4)`` and must not exceed ``T/100``;
    it is shrunk slightly so that a whole number of steps spans ``T``.
    """
    check_instance(instance)
    T = check_positive(T, "T")
    if method != "rk4":
        raise DomainError(f"unknown integrator {method!r}")
    if dt is None:
        dt = min(1e-2, T / 1e4)
    dt = check_positive(dt, "dt")
    if dt > T / 100 * (1 + 1e-12):
        raise DomainError(f"dt={dt} exceeds T/100={T / 100}")
    n_steps = int(math.ceil(T / dt - 1e-9))
    dt = T / n_steps

    ops = ScheduleOperators(instance)
    n = ops.n
    h0 = ops.h0.toarray() if n <= DENSE_THRESHOLD else ops.h0
    hp = ops.hp_diag
    psi = (
        driver_ground_state(n)
        if initial_state is None
        else check_state_vector(initial_state, 1 << n).astype(complex)
    )

    def hamiltonian_apply(t, vec):
        s = t / T
        return (1.0 - s) * (h0 @ vec) + s * hp * vec

    masks = _occupation_masks(n) if record_density else None
    densities, rates, trace = [], [], []

    def record(step, t):
        if record_density:
            prob = np.abs(psi) ** 2
            h_psi = hamiltonian_apply(t, psi)
            densities.append(masks @ prob)
            rates.append(-2.0 * np.imag((np.conj(h_psi) * psi) @ masks.T))
        if trace_every and step % trace_every == 0:
            ground = ops.eigenpairs(min(t / T, 1.0), 1)[0].vector
            trace.append((step, t, float(np.linalg.norm(psi)), float(abs(np.vdot(ground, psi)) ** 2)))

    drift = 0.0
    record(0, 0.0)
    # Unstable steps overflow before the next checkpoint; the check below
    # catches the resulting inf/nan, so the intermediate warnings are noise.
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, n_steps + 1):
            t = (step - 1) * dt
            k1 = -1j * hamiltonian_apply(t, psi)
            k2 = -1j * hamiltonian_apply(t + 0.5 * dt, psi + 0.5 * dt * k1)
            k3 = -1j * hamiltonian_apply(t + 0.5 * dt, psi + 0.5 * dt * k2)
            k4 = -1j * hamiltonian_apply(t + dt, psi + dt * k3)
            psi = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if step % renorm_interval == 0 or step == n_steps:
                norm = float(np.linalg.norm(psi))
                error = abs(norm - 1.0)
                if not error <= NORM_TOL:
                    raise StepSizeError(
                        f"norm drift {error:.2e} after step {step}; reduce dt below {dt:.3g}"
                    )
                drift = max(drift, error)
                psi = psi / norm
            record(step, step * dt)

    result = EvolutionResult(psi, T, dt, n_steps, drift, trace=trace)
    if record_density:
        result.density = np.array(densities)
        result.density_rate = np.array(rates)
    result.success_probability = success_probability(psi, instance)
    return result


def ground_strings(instance, rtol=1e-12):
    """Basis indices of the ground states of ``H_P`` under the instance convention."""
    diag = ScheduleOperators(instance).hp_diag
    low = float(diag.min())
    return np.flatnonzero(diag <= low + rtol * max(1.0, abs(low)))


def success_probability(result, instance):
    """Probability of measuring a ground string of ``H_P`` in the final state.

    Under the default convention the ground strings are exactly the payoff
    maximizers.
    """
    psi = result.state if isinstance(result, EvolutionResult) else np.asarray(result)
    psi = check_state_vector(psi, 1 << instance.n_sites)
    return float(np.sum(np.abs(psi[ground_strings(instance)]) ** 2))


def runtime_bound(numerator, gap, safety=100.0):
    """``safety * M / gap**2``."""
    if not gap > 0:
        raise DegenerateGapError(f"runtime bound undefined for gap={gap}")
    if numerator < 0:
        raise DomainError("numerator M must be >= 0")
    safety = check_positive(safety, "safety")
    return safety * numerator / gap**2


def write_trace(result, path):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "t", "norm", "p_inst"])
    for step, t, norm, p in result.trace:
        writer.writerow([step, repr(t), repr(norm), repr(p)])
    atomic_write_text(path, buf.getvalue())
