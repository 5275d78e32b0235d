"""Gap curves over the schedule, method comparison, and N-scaling tables."""

import csv
import io
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_grid, check_instance, uniform_grid
from .exact import DEGENERACY_TOL, GapCurve, ScheduleOperators, _refine
from .exceptions import ConvergenceError, DomainError, InstanceValidationError, NumericalError, ResourceLimitError, ScanError
from .instance import LatticeGeometry, atomic_write_text, generate_random, write_instance
from .kohn_sham import scf_solve
from .response import DEFAULT_ETA, dft_gap
from .xc import xc_from_config

__all__ = [
    "GapReport",
    "default_grid",
    "scan",
    "compare",
    "ScalingRow",
    "ScalingTable",
    "scaling_study",
    "DFTGapEstimator",
]

METHODS = ("exact", "dft")
EXCLUDED = ("failed", "flagged")
CSV_HEADER = ["s", "gap", "status", "scf_iters", "omega_min", "deltaE"]


def default_grid(method):
    """101 points on [0, 1] for exact scans, 49 on [0.02, 0.98] for DFT."""
    if method == "exact":
        return uniform_grid(101, 0.0, 1.0)
    if method == "dft":
        return uniform_grid(49, 0.02, 0.98)
    raise DomainError(f"unknown method {method!r}")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


@dataclass
class GapReport:
    """Per-point gaps for one instance and method.

    ``gap_min``/``s_star`` are taken over points whose status is not
    ``failed`` or ``flagged``. DFT reports also carry per-point SCF
    iteration counts, the bare KS gap ``omega_min`` and ``delta_e``.
    """

    instance_digest: str
    method: str
    grid: np.ndarray
    gaps: np.ndarray
    status: list
    scf_iters: list = None
    omega_min: list = None
    delta_e: list = None
    timing_ms: list = None
    options: dict = field(default_factory=dict)

    @property
    def valid(self):
        return np.array([st not in EXCLUDED for st in self.status])

    @property
    def argmin(self):
        valid = self.valid
        if not valid.any():
            raise ScanError("no valid points in report")
        gaps = np.where(valid, self.gaps, np.inf)
        return int(np.argmin(gaps))

    @property
    def gap_min(self):
        return float(self.gaps[self.argmin])

    @property
    def s_star(self):
        return float(self.grid[self.argmin])

    def to_csv(self):
        """CSV text without timing fields (byte-stable for identical runs)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for i, s in enumerate(self.grid):
            writer.writerow([
                _fmt(float(s)),
                _fmt(float(self.gaps[i])),
                self.status[i],
                _fmt(self.scf_iters[i]) if self.scf_iters else "",
                _fmt(self.omega_min[i]) if self.omega_min else "",
                _fmt(self.delta_e[i]) if self.delta_e else "",
            ])
        return buf.getvalue()

    def to_dict(self, timing=True):
        valid = self.valid.any()
        data = {
            "instance_digest": self.instance_digest,
            "method": self.method,
            "grid": [float(s) for s in self.grid],
            "gaps": [None if math.isnan(g) else float(g) for g in self.gaps],
            "status": list(self.status),
            "gap_min": self.gap_min if valid else None,
            "s_star": self.s_star if valid else None,
            "scf_iters": self.scf_iters,
            "omega_min": self.omega_min,
            "delta_e": self.delta_e,
            "options": self.options,
        }
        if timing:
            data["timing_ms"] = self.timing_ms
        return data

    def to_json(self, timing=True):
        return json.dumps(self.to_dict(timing), indent=2, allow_nan=False, default=_json_default) + "\n"

    @classmethod
    def from_dict(cls, data):
        gaps = np.array([np.nan if g is None else g for g in data["gaps"]], dtype=float)
        return cls(
            instance_digest=data["instance_digest"],
            method=data["method"],
            grid=np.array(data["grid"], dtype=float),
            gaps=gaps,
            status=list(data["status"]),
            scf_iters=data.get("scf_iters"),
            omega_min=data.get("omega_min"),
            delta_e=data.get("delta_e"),
            timing_ms=data.get("timing_ms"),
            options=data.get("options", {}),
        )

    def write(self, stem):
        """Write ``<stem>.csv`` and ``<stem>.json`` atomically."""
        atomic_write_text(f"{stem}.csv", self.to_csv())
        atomic_write_text(f"{stem}.json", self.to_json())


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _exact_point(ops, s, degeneracy_tol):
    start = time.perf_counter()
    try:
        e0, e1 = (p.value for p in ops.eigenpairs(s, 2))
        gap = e1 - e0
        status = "degenerate" if gap < degeneracy_tol else "ok"
    except NumericalError:
        gap, status = float("nan"), "failed"
    return {"gap": gap, "status": status, "ms": 1e3 * (time.perf_counter() - start)}


def _dft_point(instance, s, xc, opts):
    start = time.perf_counter()
    try:
        state = scf_solve(
            instance, s, xc,
            mixing=opts["mixing"], tol=opts["tol"], max_iter=opts["max_iter"], q_mode=opts["q_mode"],
        )
        result = dft_gap(
            state, group_tol=opts["group_tol"], include_hartree=opts["include_hartree"]
        )
        out = {
            "gap": result.gap, "status": result.status, "scf_iters": state.iterations,
            "omega_min": result.omega_min, "delta_e": result.delta_e,
        }
    except ConvergenceError as exc:
        iters = exc.state.iterations if exc.state is not None else None
        out = {"gap": float("nan"), "status": "failed", "scf_iters": iters,
               "omega_min": float("nan"), "delta_e": float("nan")}
    out["ms"] = 1e3 * (time.perf_counter() - start)
    return out


def scan(
    instance,
    grid=None,
    method="exact",
    xc=None,
    mixing=0.3,
    tol=1e-8,
    max_iter=500,
    eta=DEFAULT_ETA,
    group_tol=None,
    include_hartree=False,
    q_mode="closure",
    degeneracy_tol=DEGENERACY_TOL,
    refine=True,
    n_jobs=None,
):
    """Gap at every grid point by the exact oracle or the KS/TD-DFT pipeline.

    Exact scans with ``refine`` also locate the minimum between the grid
    neighbours of the best sample; the result is stored under
    ``options["refined_s_star"]``/``options["refined_gap_min"]`` while
    ``gap_min``/``s_star`` stay on the grid.

    Points that fail (solver or SCF non-convergence) are marked ``failed``
    and skipped by the minimum; a scan with no usable point raises
    :class:`ScanError`.
    """
    check_instance(instance)
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}; expected one of {METHODS}")
    grid = default_grid(method) if grid is None else check_grid(grid, open_interval=(method == "dft"))
    xc = xc_from_config(xc)
    options = {"method": method}

    if method == "exact":
        ops = ScheduleOperators(instance)
        points = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_exact_point)(ops, float(s), degeneracy_tol) for s in grid
        )
        options["degeneracy_tol"] = degeneracy_tol
        extra = {}
    else:
        opts = {"mixing": mixing, "tol": tol, "max_iter": max_iter, "q_mode": q_mode,
                "group_tol": group_tol, "include_hartree": include_hartree}
        points = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_dft_point)(instance, float(s), xc, opts) for s in grid
        )
        options.update(opts, eta=eta, xc=xc.to_config())
        extra = {
            "scf_iters": [p["scf_iters"] for p in points],
            "omega_min": [float(p["omega_min"]) for p in points],
            "delta_e": [float(p["delta_e"]) for p in points],
        }

    report = GapReport(
        instance_digest=instance.digest(),
        method=method,
        grid=grid,
        gaps=np.array([p["gap"] for p in points], dtype=float),
        status=[p["status"] for p in points],
        timing_ms=[p["ms"] for p in points],
        options=options,
        **extra,
    )
    if not report.valid.any():
        raise ScanError(f"all {grid.size} {method} scan points failed")
    if method == "exact" and refine and grid.size > 1:
        curve = GapCurve(grid, np.where(report.valid, report.gaps, np.inf))
        s_ref, gap_ref = _refine(ops, curve, degeneracy_tol)
        options.update(refined_s_star=float(s_ref), refined_gap_min=float(gap_ref))
    return report


def compare(report_a, report_b):
    """Pointwise deviations between two reports on the same instance and grid."""
    if report_a.instance_digest != report_b.instance_digest:
        raise InstanceValidationError("reports refer to different instances")
    if report_a.grid.shape != report_b.grid.shape or not np.array_equal(report_a.grid, report_b.grid):
        raise InstanceValidationError("reports use different grids")
    both = report_a.valid & report_b.valid
    diff = np.abs(report_a.gaps - report_b.gaps)
    scale = np.maximum(np.abs(report_a.gaps), np.finfo(float).tiny)
    rel = diff / scale
    step = float(np.max(np.diff(report_a.grid))) if report_a.grid.size > 1 else 0.0
    s_gap = abs(report_a.s_star - report_b.s_star)
    return {
        "instance_digest": report_a.instance_digest,
        "methods": [report_a.method, report_b.method],
        "grid": [float(s) for s in report_a.grid],
        "abs_diff": [float(d) if ok else None for d, ok in zip(diff, both)],
        "rel_diff": [float(r) if ok else None for r, ok in zip(rel, both)],
        "max_abs_diff": float(diff[both].max()) if both.any() else None,
        "max_rel_diff": float(rel[both].max()) if both.any() else None,
        "gap_min": [report_a.gap_min, report_b.gap_min],
        "s_star": [report_a.s_star, report_b.s_star],
        "s_star_agree": bool(s_gap <= step * (1 + 1e-9)),
    }


@dataclass
class ScalingRow:
    N: int
    seed: int
    method: str
    gap_min: float
    s_star: float
    wall_ms: float
    instance_path: str
    error: str = ""


@dataclass
class ScalingTable:
    rows: list = field(default_factory=list)

    def to_csv(self, timing=True):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["N", "seed", "method", "gap_min", "s_star"] + (["wall_ms"] if timing else [])
        writer.writerow(header)
        for row in self.rows:
            values = [row.N, row.seed, row.method, _fmt(row.gap_min), _fmt(row.s_star)]
            if timing:
                values.append(f"{row.wall_ms:.3f}")
            writer.writerow(values)
        return buf.getvalue()

    def to_dicts(self):
        return [asdict(row) for row in self.rows]


def scaling_study(family, sizes, seeds, methods=("exact",), out_dir=None, exact_cap=20, **scan_options):
    """Minimum gap per (N, seed, method) on seeded random instances.

    ``family`` holds :func:`generate_random` keyword arguments (weight
    ranges, edge probabilities, convention). Instances are written under
    ``out_dir/instances`` and the table to ``out_dir/scaling.csv``. Row
    failures are recorded in ``error`` and the study continues.
    """
    family = dict(family or {})
    table = ScalingTable()
    instance_dir = os.path.join(out_dir, "instances") if out_dir else None
    if instance_dir:
        os.makedirs(instance_dir, exist_ok=True)
    for n in sizes:
        for seed in seeds:
            geometry = LatticeGeometry.for_size(int(n))
            instance = generate_random(geometry, seed=int(seed), **family)
            path = ""
            if instance_dir:
                path = os.path.join(instance_dir, f"N{n}_seed{seed}.json")
                write_instance(instance, path)
            for method in methods:
                start = time.perf_counter()
                try:
                    if method == "exact" and n > exact_cap:
                        raise ResourceLimitError(f"N={n} above the exact cap {exact_cap}")
                    report = scan(instance, method=method, **scan_options)
                    row = ScalingRow(int(n), int(seed), method, report.gap_min, report.s_star, 0.0, path)
                except (NumericalError, ResourceLimitError, InstanceValidationError) as exc:
                    row = ScalingRow(int(n), int(seed), method, float("nan"), float("nan"), 0.0, path, str(exc))
                row.wall_ms = 1e3 * (time.perf_counter() - start)
                table.rows.append(row)
    if out_dir:
        atomic_write_text(os.path.join(out_dir, "scaling.csv"), table.to_csv())
    return table


class DFTGapEstimator(BaseEstimator):
    """Kohn-Sham/TD-DFT minimum-gap estimator (scikit-learn style).

    ``fit(instance)`` scans the grid and stores ``report_``, ``gaps_``,
    ``gap_min_`` and ``s_star_``; ``predict(s)`` evaluates the DFT gap at
    arbitrary interior schedule points.
    """

    def __init__(
        self,
        xc=None,
        n_points=49,
        smin=0.02,
        smax=0.98,
        grid=None,
        mixing=0.3,
        tol=1e-8,
        max_iter=500,
        eta=DEFAULT_ETA,
        group_tol=None,
        include_hartree=False,
        q_mode="closure",
        n_jobs=None,
    ):
        self.xc = xc
        self.n_points = n_points
        self.smin = smin
        self.smax = smax
        self.grid = grid
        self.mixing = mixing
        self.tol = tol
        self.max_iter = max_iter
        self.eta = eta
        self.group_tol = group_tol
        self.include_hartree = include_hartree
        self.q_mode = q_mode
        self.n_jobs = n_jobs

    def _scan_kwargs(self):
        return dict(
            xc=self.xc, mixing=self.mixing, tol=self.tol, max_iter=self.max_iter, eta=self.eta,
            group_tol=self.group_tol, include_hartree=self.include_hartree, q_mode=self.q_mode,
        )

    def fit(self, instance, y=None):
        grid = self.grid if self.grid is not None else uniform_grid(self.n_points, self.smin, self.smax)
        self.instance_ = check_instance(instance)
        self.report_ = scan(instance, grid, "dft", n_jobs=self.n_jobs, **self._scan_kwargs())
        self.grid_ = self.report_.grid
        self.gaps_ = self.report_.gaps
        self.gap_min_ = self.report_.gap_min
        self.s_star_ = self.report_.s_star
        return self

    def predict(self, s):
        check_is_fitted(self, "report_")
        points = check_grid(s, open_interval=True, strict=False)
        return np.array([
            scan(self.instance_, [float(x)], "dft", **self._scan_kwargs()).gaps[0] for x in points
        ])
