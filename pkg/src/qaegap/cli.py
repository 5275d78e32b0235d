"""Command-line interface: ``qaegap <subcommand> [flags]``.

Settings are resolved as built-in defaults, then a JSON ``--config`` file
whose keys mirror the long flag names, then explicit flags. Outputs are
written atomically and a one-line summary goes to stdout.

Exit codes: 0 success, 2 numerical failure, 3 invalid instance or
configuration, 4 resource cap exceeded.
"""

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from ._validation import check_positive, uniform_grid
from .exact import adiabatic_numerator, exact_gap_curve
from .evolution import propagate, runtime_bound, write_trace
from .exceptions import InstanceValidationError, NumericalError, QaeGapError, ResourceLimitError
from .instance import LatticeGeometry, SignConvention, atomic_write_text, generate_random, read_instance, write_instance
from .kohn_sham import energy_functional, scf_solve
from .scan import GapReport, compare, default_grid, scan, scaling_study
from .selftest import run_selftest

EXIT_OK = 0
EXIT_NUMERICAL = 2
EXIT_CONFIG = 3
EXIT_RESOURCE = 4

DEFAULTS = {
    "grid": None,
    "smin": None,
    "smax": None,
    "eta": 1e-6,
    "mix": 0.3,
    "tol": 1e-8,
    "max_iter": 500,
    "xc": "none",
    "xc_params": None,
    "seed": 0,
    "workers": 1,
    "out": None,
    "format": "csv",
    "rows": 2,
    "cols": 2,
    "jw_m": 0,
    "convention": SignConvention.GROUND_ENCODES_MAX.value,
    "edge_prob": 1.0,
    "extra_edge_prob": 0.0,
    "method": "exact",
    "sizes": "2,4,6",
    "seeds": "0,1,2",
    "methods": "exact",
    "factor": 100.0,
    "T": None,
    "dt": None,
    "trace_every": None,
    "include_hartree": False,
}


class ConfigError(InstanceValidationError):
    """Bad command line or configuration file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _common(parser, *names):
    add = {
        "instance": lambda: parser.add_argument("--instance", help="instance JSON file"),
        "grid": lambda: parser.add_argument("--grid", type=int, help="number of grid points"),
        "smin": lambda: parser.add_argument("--smin", type=float),
        "smax": lambda: parser.add_argument("--smax", type=float),
        "eta": lambda: parser.add_argument("--eta", type=float, help="response broadening"),
        "mix": lambda: parser.add_argument("--mix", type=float, help="SCF linear mixing"),
        "tol": lambda: parser.add_argument("--tol", type=float, help="SCF tolerance"),
        "max_iter": lambda: parser.add_argument("--max-iter", type=int, dest="max_iter"),
        "xc": lambda: parser.add_argument("--xc", choices=["none", "local_correlation", "probe"]),
        "xc_params": lambda: parser.add_argument("--xc-params", dest="xc_params", help="JSON file of xc parameters"),
        "seed": lambda: parser.add_argument("--seed", type=int),
        "workers": lambda: parser.add_argument("--workers", type=int),
        "out": lambda: parser.add_argument("--out", help="output path or stem"),
        "format": lambda: parser.add_argument("--format", choices=["csv", "json"]),
        "s": lambda: parser.add_argument("--s", type=float, help="schedule point"),
        "include_hartree": lambda: parser.add_argument(
            "--include-hartree", dest="include_hartree", action="store_true", default=argparse.SUPPRESS
        ),
    }
    for name in names:
        add[name]()
    parser.add_argument("--config", help="JSON file mirroring the flags")


SCF_FLAGS = ("mix", "tol", "max_iter", "xc", "xc_params", "eta", "include_hartree")


def build_parser():
    parser = _Parser(prog="qaegap", description="Minimum-gap estimation for adiabatic MAXCUT.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a seeded random instance")
    _common(p, "seed", "out")
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--jw-m", type=int, dest="jw_m")
    p.add_argument("--convention", choices=[c.value for c in SignConvention])
    p.add_argument("--edge-prob", type=float, dest="edge_prob")
    p.add_argument("--extra-edge-prob", type=float, dest="extra_edge_prob")

    p = sub.add_parser("exact", help="exact gap curve")
    _common(p, "instance", "grid", "smin", "smax", "workers", "out", "format")

    p = sub.add_parser("scf", help="Kohn-Sham ground state at one schedule point")
    _common(p, "instance", "s", "out", "format", *SCF_FLAGS)

    p = sub.add_parser("dft", help="TD-DFT gap at one schedule point")
    _common(p, "instance", "s", "out", "format", *SCF_FLAGS)

    p = sub.add_parser("scan", help="gap scan by method exact, dft or both")
    _common(p, "instance", "grid", "smin", "smax", "workers", "out", "format", *SCF_FLAGS)
    p.add_argument("--method", choices=["exact", "dft", "both"])

    p = sub.add_parser("scale", help="minimum gap versus N over seeded instances")
    _common(p, "grid", "smin", "smax", "workers", "out", *SCF_FLAGS)
    p.add_argument("--sizes", help="comma-separated qubit counts")
    p.add_argument("--seeds", help="comma-separated seeds")
    p.add_argument("--methods", help="comma-separated methods (exact,dft)")
    p.add_argument("--edge-prob", type=float, dest="edge_prob")
    p.add_argument("--extra-edge-prob", type=float, dest="extra_edge_prob")

    p = sub.add_parser("evolve", help="Schroedinger propagation and success probability")
    _common(p, "instance", "grid", "out", "format")
    p.add_argument("--T", type=float, dest="T", help="runtime (overrides --factor)")
    p.add_argument("--factor", type=float, help="runtime as a multiple of M/gap^2")
    p.add_argument("--dt", type=float)
    p.add_argument("--trace-every", type=int, dest="trace_every")

    p = sub.add_parser("compare", help="compare two JSON gap reports")
    p.add_argument("report_a")
    p.add_argument("report_b")
    _common(p, "out")

    p = sub.add_parser("selftest", help="run the built-in invariant checks")
    p.add_argument("--config", help=argparse.SUPPRESS)
    return parser


def _load_json(path, what):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path} is not valid JSON: {exc}") from None


def resolve_settings(args):
    """Merge defaults, the optional config file and explicit flags."""
    settings = dict(DEFAULTS)
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("command", "config")}
    if getattr(args, "config", None):
        config = _load_json(args.config, "config file")
        if not isinstance(config, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in config.items():
            key = key.replace("-", "_")
            if key not in DEFAULTS and key not in ("instance", "s", "report_a", "report_b"):
                raise ConfigError(f"unknown config key {key!r}")
            settings[key] = value
    settings.update(flags)
    return settings


def _xc_config(settings):
    xc = settings["xc"]
    if isinstance(xc, dict):
        return xc
    params = settings.get("xc_params")
    if isinstance(params, str):
        params = _load_json(params, "xc parameter file")
    if params is not None and not isinstance(params, dict):
        raise ConfigError("xc parameters must be a JSON object")
    variant = {"probe": "discontinuity_probe"}.get(xc, xc)
    return {"variant": variant, "params": params or {}}


def _instance(settings):
    path = settings.get("instance")
    if not path:
        raise ConfigError("--instance is required")
    try:
        return read_instance(path)
    except OSError as exc:
        raise ConfigError(f"cannot read instance {path}: {exc.strerror}") from None


def _grid(settings, method):
    if settings["grid"] is None and settings["smin"] is None and settings["smax"] is None:
        return default_grid(method)
    base = default_grid(method)
    n = settings["grid"] if settings["grid"] is not None else base.size
    smin = settings["smin"] if settings["smin"] is not None else float(base[0])
    smax = settings["smax"] if settings["smax"] is not None else float(base[-1])
    return uniform_grid(int(n), float(smin), float(smax))


def _out_stem(settings, suffix):
    out = settings.get("out")
    if out:
        root, ext = os.path.splitext(out)
        return root if ext in (".csv", ".json") else out
    base = os.path.splitext(settings.get("instance") or "qaegap")[0]
    return f"{base}_{suffix}"


def _write_report(report, stem, fmt):
    path = f"{stem}.{fmt}"
    atomic_write_text(path, report.to_csv() if fmt == "csv" else report.to_json())
    return path


def _scan_options(settings):
    check_positive(settings["eta"], "eta")
    return dict(
        xc=_xc_config(settings),
        mixing=settings["mix"],
        tol=settings["tol"],
        max_iter=settings["max_iter"],
        eta=settings["eta"],
        include_hartree=bool(settings["include_hartree"]),
    )


def _summary(report):
    statuses = sorted(set(report.status))
    return f"{report.method}: gap_min={report.gap_min:.10g} s_star={report.s_star:.6g} status={'/'.join(statuses)}"


def cmd_gen(settings):
    geometry = LatticeGeometry(int(settings["rows"]), int(settings["cols"]))
    instance = generate_random(
        geometry,
        seed=settings["seed"],
        edge_prob=settings["edge_prob"],
        extra_edge_prob=settings["extra_edge_prob"],
        jw_m=int(settings["jw_m"]),
        sign_convention=SignConvention(settings["convention"]),
    )
    out = settings["out"] or f"instance_{geometry.rows}x{geometry.cols}_seed{settings['seed']}.json"
    write_instance(instance, out)
    return f"gen: N={instance.n_sites} edges={len(instance.edges)} digest={instance.digest()[:12]} -> {out}"


def cmd_exact(settings):
    instance = _instance(settings)
    report = scan(instance, _grid(settings, "exact"), "exact", n_jobs=settings["workers"])
    path = _write_report(report, _out_stem(settings, "exact"), settings["format"])
    return f"{_summary(report)} -> {path}"


def cmd_scf(settings):
    instance = _instance(settings)
    if settings.get("s") is None:
        raise ConfigError("--s is required")
    opts = _scan_options(settings)
    state = scf_solve(instance, settings["s"], opts["xc"], opts["mixing"], opts["tol"], opts["max_iter"])
    energy = energy_functional(state)
    stem = _out_stem(settings, "scf")
    if settings["format"] == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["site", "density", "q_re", "q_im", "v_ks", "eps_minus", "eps_plus"])
        for r in range(state.n_sites):
            writer.writerow([r] + [repr(float(x)) for x in (
                state.density[r], state.q[r].real, state.q[r].imag, state.v_ks[r], *state.energies[r])])
        text = buf.getvalue()
    else:
        text = json.dumps({
            "s": state.s,
            "density": state.density.tolist(),
            "q": [[float(z.real), float(z.imag)] for z in state.q],
            "v_ks": state.v_ks.tolist(),
            "energies": state.energies.tolist(),
            "iterations": state.iterations,
            "residual": state.residual,
            "energy": {**energy.__dict__, "total": energy.total},
        }, indent=2) + "\n"
    path = f"{stem}.{settings['format']}"
    atomic_write_text(path, text)
    return f"scf: s={state.s:.6g} E={energy.total:.10g} iterations={state.iterations} status=converged -> {path}"


def cmd_dft(settings):
    instance = _instance(settings)
    if settings.get("s") is None:
        raise ConfigError("--s is required")
    report = scan(instance, [settings["s"]], "dft", **_scan_options(settings))
    path = _write_report(report, _out_stem(settings, "dft"), settings["format"])
    return f"{_summary(report)} -> {path}"


def cmd_scan(settings):
    instance = _instance(settings)
    method = settings["method"]
    stem = _out_stem(settings, "scan")
    workers = settings["workers"]
    if method in ("exact", "dft"):
        options = _scan_options(settings) if method == "dft" else {}
        report = scan(instance, _grid(settings, method), method, n_jobs=workers, **options)
        path = _write_report(report, stem, settings["format"])
        return f"{_summary(report)} -> {path}"
    if method != "both":
        raise ConfigError(f"unknown method {method!r}")
    # Both methods share the DFT grid so the reports are comparable.
    grid = _grid(settings, "dft")
    exact_report = scan(instance, grid, "exact", n_jobs=workers)
    dft_report = scan(instance, grid, "dft", n_jobs=workers, **_scan_options(settings))
    for report in (exact_report, dft_report):
        report.write(f"{stem}_{report.method}")
    comparison = compare(exact_report, dft_report)
    atomic_write_text(f"{stem}_compare.json", json.dumps(comparison, indent=2) + "\n")
    return (
        f"both: exact gap_min={exact_report.gap_min:.10g} s_star={exact_report.s_star:.6g}; "
        f"dft gap_min={dft_report.gap_min:.10g} s_star={dft_report.s_star:.6g}; "
        f"max_rel_diff={comparison['max_rel_diff']:.3e} -> {stem}_*"
    )


def _int_list(value, name):
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    try:
        return [int(v) for v in str(value).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--{name} must be a comma-separated list of integers") from None


def cmd_scale(settings):
    sizes = _int_list(settings["sizes"], "sizes")
    seeds = _int_list(settings["seeds"], "seeds")
    methods = settings["methods"]
    methods = methods if isinstance(methods, list) else [m.strip() for m in methods.split(",") if m.strip()]
    out_dir = settings["out"] or "scaling"
    family = {"edge_prob": settings["edge_prob"], "extra_edge_prob": settings["extra_edge_prob"]}
    options = _scan_options(settings)
    grid = None
    if settings["grid"] is not None or settings["smin"] is not None or settings["smax"] is not None:
        if len(methods) > 1:
            raise ConfigError("a custom grid applies to a single method only")
        grid = _grid(settings, methods[0])
    table = scaling_study(
        family, sizes, seeds, methods, out_dir=out_dir, grid=grid, n_jobs=settings["workers"],
        **(options if "dft" in methods else {}),
    )
    failures = sum(1 for row in table.rows if row.error)
    return f"scale: rows={len(table.rows)} failures={failures} -> {os.path.join(out_dir, 'scaling.csv')}"


def cmd_evolve(settings):
    instance = _instance(settings)
    grid = uniform_grid(settings["grid"] or 101, 0.0, 1.0)
    curve = exact_gap_curve(instance, grid)
    numerator = adiabatic_numerator(instance, grid)
    T = settings["T"]
    if T is None:
        T = runtime_bound(numerator, curve.gap_min, settings["factor"])
    result = propagate(instance, T, settings["dt"], trace_every=settings["trace_every"])
    stem = _out_stem(settings, "evolve")
    if settings["trace_every"]:
        write_trace(result, f"{stem}_trace.csv")
    payload = {
        "T": result.T, "dt": result.dt, "n_steps": result.n_steps, "norm_drift": result.norm_drift,
        "success_probability": result.success_probability, "M": numerator,
        "gap_min": curve.gap_min, "s_star": curve.s_star,
    }
    if settings["format"] == "csv":
        text = ",".join(payload) + "\n" + ",".join(repr(float(v)) for v in payload.values()) + "\n"
    else:
        text = json.dumps(payload, indent=2) + "\n"
    path = f"{stem}.{settings['format']}"
    atomic_write_text(path, text)
    return f"evolve: T={result.T:.6g} p={result.success_probability:.6f} gap_min={curve.gap_min:.6g} status=ok -> {path}"


def cmd_compare(settings):
    reports = [GapReport.from_dict(_load_json(settings[k], "report")) for k in ("report_a", "report_b")]
    comparison = compare(*reports)
    out = settings["out"] or "comparison.json"
    atomic_write_text(out, json.dumps(comparison, indent=2) + "\n")
    return (
        f"compare: max_abs_diff={comparison['max_abs_diff']} max_rel_diff={comparison['max_rel_diff']} "
        f"s_star_agree={comparison['s_star_agree']} -> {out}"
    )


def cmd_selftest(settings):
    results = run_selftest(sys.stdout)
    failed = [name for name, ok, *_ in results if not ok]
    if failed:
        raise NumericalError(f"selftest failed: {', '.join(failed)}")
    return f"selftest: {len(results)} checks passed"


COMMANDS = {
    "gen": cmd_gen,
    "exact": cmd_exact,
    "scf": cmd_scf,
    "dft": cmd_dft,
    "scan": cmd_scan,
    "scale": cmd_scale,
    "evolve": cmd_evolve,
    "compare": cmd_compare,
    "selftest": cmd_selftest,
}


def run(argv=None):
    """Execute one subcommand and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
        settings = resolve_settings(args)
        print(COMMANDS[args.command](settings))
        return EXIT_OK
    except ResourceLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (InstanceValidationError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except QaeGapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None):
    sys.exit(run(argv))
