"""Local correlation functionals for the lattice Kohn-Sham system.

Exchange vanishes for site-pinned fermions, so only correlation is
modelled. Every functional is a sum of per-site energies ``e(n_r)``; the
potential is ``e'(n_r)`` and the adiabatic kernel ``e''(n_r)`` is diagonal
and frequency independent.

No physical parametrization is built in: coefficients come from the caller.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InstanceValidationError

__all__ = [
    "XCFunctional",
    "NoCorrelation",
    "LocalCorrelation",
    "DiscontinuityProbe",
    "xc_from_config",
]


class XCFunctional:
    """Base class; subclasses implement the three per-site derivatives."""

    smooth = True

    def local_energy(self, n):
        raise NotImplementedError

    def local_potential(self, n):
        raise NotImplementedError

    def local_kernel(self, n):
        raise NotImplementedError

    def energy(self, n):
        return float(np.sum(self.local_energy(np.asarray(n, dtype=float))))

    def potential(self, n):
        return np.asarray(self.local_potential(np.asarray(n, dtype=float)), dtype=float)

    def kernel(self, n):
        """(N, N) kernel ``f_c(r, r')``; diagonal for local functionals."""
        return np.diag(self.local_kernel(np.asarray(n, dtype=float)))

    @property
    def is_zero(self):
        return False

    def to_config(self):
        raise NotImplementedError


@dataclass(frozen=True)
class NoCorrelation(XCFunctional):
    def local_energy(self, n):
        return np.zeros_like(n)

    def local_potential(self, n):
        return np.zeros_like(n)

    def local_kernel(self, n):
        return np.zeros_like(n)

    @property
    def is_zero(self):
        return True

    def to_config(self):
        return {"variant": "none", "params": {}}


@dataclass(frozen=True)
class LocalCorrelation(XCFunctional):
    """Polynomial correlation energy per particle ``eps(n) = sum_k c_k n^k``.

    The site energy is ``n * eps(n)``.
    """

    coeffs: tuple = field(default=())

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs:
            raise InstanceValidationError("local_correlation needs at least one coefficient")
        if not all(np.isfinite(coeffs)):
            raise InstanceValidationError("local_correlation coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    def _poly(self, order):
        # Coefficients of d^order/dn^order of sum_k c_k n^(k+1), lowest power first.
        poly = np.polynomial.Polynomial((0.0,) + self.coeffs)
        return poly.deriv(order) if order else poly

    def local_energy(self, n):
        return self._poly(0)(n)

    def local_potential(self, n):
        return self._poly(1)(n)

    def local_kernel(self, n):
        return self._poly(2)(n)

    @property
    def is_zero(self):
        return not any(self.coeffs)

    def to_config(self):
        return {"variant": "local_correlation", "params": {"coeffs": list(self.coeffs)}}


@dataclass(frozen=True)
class DiscontinuityProbe(XCFunctional):
    """Adds a kink ``step * max(n - threshold, 0)`` to a base functional.

    The potential jumps by ``step`` as ``n`` crosses ``threshold``; the
    kernel is the base kernel (the delta at the kink is not representable).
    """

    base: XCFunctional = field(default_factory=NoCorrelation)
    step: float = 0.0
    threshold: float = 0.5

    smooth = False

    def __post_init__(self):
        if not 0.0 <= float(self.threshold) <= 1.0:
            raise InstanceValidationError("probe threshold must lie in [0, 1]")
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "threshold", float(self.threshold))

    def local_energy(self, n):
        return self.base.local_energy(n) + self.step * np.maximum(n - self.threshold, 0.0)

    def local_potential(self, n):
        return self.base.local_potential(n) + self.step * (n >= self.threshold)

    def local_kernel(self, n):
        return self.base.local_kernel(n)

    @property
    def is_zero(self):
        return self.base.is_zero and self.step == 0.0

    def to_config(self):
        return {
            "variant": "discontinuity_probe",
            "params": {"base": self.base.to_config(), "step": self.step, "threshold": self.threshold},
        }


def xc_from_config(config):
    """Build a functional from ``{"variant": ..., "params": {...}}``.

    Accepts ``None`` or a bare variant string for parameter-free variants.
    """
    if config is None:
        return NoCorrelation()
    if isinstance(config, XCFunctional):
        return config
    if isinstance(config, str):
        config = {"variant": config}
    if "xc" in config:
        config = config["xc"]
    variant = config.get("variant", "none")
    params = config.get("params") or {}
    if variant == "none":
        return NoCorrelation()
    if variant == "local_correlation":
        if "coeffs" not in params:
            raise InstanceValidationError("xc.params.coeffs is required for local_correlation")
        return LocalCorrelation(tuple(params["coeffs"]))
    if variant in ("discontinuity_probe", "probe"):
        base = xc_from_config(params.get("base"))
        return DiscontinuityProbe(base, params.get("step", 0.0), params.get("threshold", 0.5))
    raise InstanceValidationError(f"unknown xc variant {variant!r}")
