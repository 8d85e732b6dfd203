"""Command-line front end.

Subcommands ``catalog`` and ``simulate`` write scene archives; ``verify``,
``budget`` and ``hierarchy`` read them and emit JSON reports.  Exit status
is 0 when every check passes, 1 when a check fails and 2 for unusable input
(bad flags, unreadable or corrupt archives, malformed expressions).
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import sys
from pathlib import Path

import numpy as np

from .. import __version__
from ..dynamics import (
    CatalogError,
    CatalogSpec,
    SolverConfig,
    SolverInstabilityError,
    dynamics_residuals,
    make_scene,
    step_navier_stokes,
)
from ..convergence import HELICAL_MIXTURE, helical_mixture_config
from ..exprlang import ExpressionError, parse_expression
from ..fluid import (
    BUDGET_COLUMNS,
    CheckResult,
    ExcessiveMaskingError,
    VerificationReport,
    helicity_budget,
    random_smooth_function,
    suspension,
    verify_prop1,
    verify_prop2,
    verify_prop3,
    verify_prop4,
)
from ..geometry import uniform_times
from ..hierarchy import HIERARCHY_COLUMNS, generate_hierarchy, hierarchy_report, verify_prop6
from .archive import ArchiveError, read_archive, write_archive

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
SUITES = (1, 2, 3, 4, 5, 6)
BUDGET_TOL_ANALYTIC = 1e-7
BUDGET_TOL_NUMERIC = 1e-2
RATE_TOL = 1e-6
CONSERVATION_TOL = 1e-8


class InputError(Exception):
    """Unusable command-line input."""


# -- argument helpers ---------------------------------------------------------
def parse_times(text: str) -> tuple:
    """``start:stop:count`` for uniform samples, or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            return uniform_times(float(start), float(stop), int(count))
        return tuple(float(s) for s in text.split(",") if s.strip())
    except ValueError as err:
        raise InputError(f"cannot parse times {text!r}: expected start:stop:count or a comma list") from err


def parse_suites(text: str) -> tuple:
    try:
        out = tuple(sorted({int(s) for s in text.split(",") if s.strip()}))
    except ValueError as err:
        raise InputError(f"cannot parse suites {text!r}") from err
    bad = [s for s in out if s not in SUITES]
    if bad or not out:
        raise InputError(f"unknown suite(s) {bad or text!r}; choose from {SUITES}")
    return out


def _common(parser: argparse.ArgumentParser, archive_out: bool = False) -> None:
    parser.add_argument("--n", type=int, default=None, help="grid points per axis")
    parser.add_argument("--nu", type=float, default=None, help="kinematic viscosity")
    parser.add_argument("--times", default=None, help="time samples: start:stop:count or t0,t1,...")
    parser.add_argument("--tol", type=float, default=None, help="override the default check tolerance")
    parser.add_argument("--mask-eps", type=float, default=None, help="degeneracy mask threshold")
    if archive_out:
        parser.add_argument("--out", required=True, help="archive directory to write")
    else:
        parser.add_argument("--out", default=None, help="JSON report path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symplectic-fluid",
        description="Space-time symplectic structure checks for incompressible flows.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cat = sub.add_parser("catalog", help="write an exact-solution scene archive")
    cat.add_argument("family", choices=("decaying-beltrami", "shear-euler"))
    cat.add_argument("--A", type=float, default=1.0)
    cat.add_argument("--B", type=float, default=1.0)
    cat.add_argument("--C", type=float, default=1.0)
    cat.add_argument("--lambda", dest="lam", type=float, default=1.0, help="Beltrami eigenvalue (integer)")
    cat.add_argument("--c", type=float, default=0.0, help="pressure constant")
    cat.add_argument("--direction", default=None, help="a_x,a_y,a_z for the linear Beltrami phi")
    cat.add_argument("--profile", default="sin(y)", help="shear profile U(y, z)")
    cat.add_argument(
        "--phi",
        default=None,
        help="Beltrami: linear | periodic | drift (default linear); shear: expression g(y, z) (default sin(z))",
    )
    _common(cat, archive_out=True)

    sim = sub.add_parser("simulate", help="run the spectral solver and write a scene archive")
    sim.add_argument("--config", default=None, help="JSON solver configuration (flags override it)")
    sim.add_argument("--dt", type=float, default=None)
    sim.add_argument("--t-end", type=float, default=None)
    sim.add_argument("--ic", default=None, help="initial velocity (default: helical mixture)", choices=("abc", "taylor_green", "random", "zero", "helical_mixture"))
    sim.add_argument("--seed", type=int, default=None, help="seed for the random initial condition")
    sim.add_argument("--phi0", default=None, help="initial scalar expression over x, y, z")
    sim.add_argument("--no-phi", action="store_true", help="do not advect a scalar")
    _common(sim, archive_out=True)

    ver = sub.add_parser("verify", help="run verification suites on an archive")
    ver.add_argument("archive")
    ver.add_argument("--suites", default="1,2,3", help="comma list from 1,2,3,4,5,6")
    ver.add_argument("--seed", type=int, default=0, help="seed for random test functions")
    ver.add_argument("--numeric", action="store_true", help="use sampled payloads even for catalog scenes")
    _common(ver)

    bud = sub.add_parser("budget", help="total-helicity time series as CSV")
    bud.add_argument("archive")
    bud.add_argument("--csv", default=None, help="CSV output path (default: stdout)")
    bud.add_argument("--numeric", action="store_true")
    _common(bud)

    hie = sub.add_parser("hierarchy", help="iterated brackets of a Hamiltonian field with the helicity current")
    hie.add_argument("archive")
    hie.add_argument("--f", dest="f", default="t", help="t, phi or an expression over t, x, y, z")
    hie.add_argument("--k", type=int, default=2, help="highest bracket order")
    hie.add_argument("--csv", default=None, help="write the entry table as CSV")
    hie.add_argument("--numeric", action="store_true")
    _common(hie)
    return parser


# -- scene production -----------------------------------------------------------
def _catalog_spec(args) -> CatalogSpec:
    family = args.family.replace("-", "_")
    kwargs = {}
    if args.n is not None:
        kwargs["n_space"] = args.n
    if args.times is not None:
        kwargs["times"] = parse_times(args.times)
    if args.mask_eps is not None:
        kwargs["mask_eps"] = args.mask_eps
    if family == "decaying_beltrami":
        params = {"A": args.A, "B": args.B, "C": args.C, "lambda": args.lam, "c": args.c}
        if args.direction:
            try:
                params["direction"] = [float(s) for s in args.direction.split(",")]
            except ValueError as err:
                raise InputError(f"cannot parse direction {args.direction!r}") from err
        return CatalogSpec(family, params, nu=args.nu or 0.0, phi=args.phi or "linear", **kwargs)
    params = {"profile": args.profile, "phi": args.phi or "sin(z)", "c": args.c}
    return CatalogSpec(family, params, nu=args.nu or 0.0, **kwargs)


def cmd_catalog(args) -> int:
    scene = make_scene(_catalog_spec(args))
    write_archive(scene, args.out)
    dyn = dynamics_residuals(scene, args.tol)
    print(f"wrote {scene.name} to {args.out}")
    print("\n".join(dyn.summary_lines()))
    return EXIT_PASS


HELICAL_MIXTURE_KEY = "helical_mixture"


def _solver_config(args) -> SolverConfig:
    """Configuration file (or the helical-mixture default) overridden by flags."""
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise InputError(f"cannot read solver configuration {args.config}: {err}") from err
    else:
        data = helical_mixture_config(n_space=32, dt=0.01, stride=4).to_dict()
    if (args.dt is not None or args.t_end is not None) and args.times is None:
        data["snapshot_times"] = None
    overrides = {
        "n_space": args.n,
        "nu": args.nu,
        "dt": args.dt,
        "t_end": args.t_end,
        "mask_eps": args.mask_eps,
        "phi0": args.phi0,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.no_phi:
        data["advect_phi"] = False
    if args.ic == HELICAL_MIXTURE_KEY:
        data["initial_condition"] = dict(HELICAL_MIXTURE)
    elif args.ic is not None:
        ic = {"kind": args.ic}
        if args.ic == "abc":
            ic.update({"A": 1.0, "B": 1.0, "C": 1.0, "lambda": 1})
        data["initial_condition"] = ic
    if args.seed is not None:
        data.setdefault("initial_condition", {"kind": "random"})["seed"] = args.seed
    if args.times is not None:
        data["snapshot_times"] = parse_times(args.times)
        data.setdefault("t_end", data["snapshot_times"][-1])
    try:
        return SolverConfig.from_dict(data)
    except TypeError as err:
        raise InputError(f"bad solver configuration: {err}") from err


def cmd_simulate(args) -> int:
    config = _solver_config(args)
    scene = step_navier_stokes(config)
    write_archive(scene, args.out)
    dyn = dynamics_residuals(scene, args.tol)
    print(f"wrote {scene.name} to {args.out}")
    print("\n".join(dyn.summary_lines()))
    return EXIT_PASS


# -- reports -------------------------------------------------------------------------
def _load(args):
    scene = read_archive(args.archive, mode="numeric" if args.numeric else "auto")
    if args.mask_eps is not None:
        scene = scene.replace(mask_eps=args.mask_eps)
    if args.nu is not None and args.nu != scene.nu:
        raise InputError(f"--nu {args.nu} disagrees with the archived viscosity {scene.nu}")
    return scene


def _document(command: str, args, reports, extra=None) -> dict:
    doc = {
        "command": command,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "archive": str(args.archive),
        "tolerance_override": args.tol,
        "passed": all(r.passed for r in reports),
        "reports": [r.to_dict() for r in reports],
    }
    if extra:
        doc.update(extra)
    return doc


def _emit(doc: dict, reports, out) -> int:
    for r in reports:
        print("\n".join(r.summary_lines()))
    print("PASS" if doc["passed"] else "FAIL")
    if out:
        Path(out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_PASS if doc["passed"] else EXIT_FAIL


def _inviscid_ready(scene, suite: int) -> None:
    if scene.nu != 0 or not scene.phi_advected:
        raise InputError(f"suite {suite} needs an inviscid scene (nu = 0) whose phi is advected by the flow")


def cmd_verify(args) -> int:
    suites = parse_suites(args.suites)
    scene = _load(args)
    reports = []
    for s in suites:
        if s == 1:
            reports.append(verify_prop1(scene, args.tol))
        elif s == 2:
            reports.append(verify_prop2(scene, args.tol))
        elif s == 3:
            reports.append(verify_prop3(scene, args.tol))
        elif s == 4:
            _inviscid_ready(scene, s)
            reports.append(verify_prop4(scene, args.tol))
        elif s == 5:
            f = random_smooth_function(args.seed, scene.provider)
            entries = generate_hierarchy(scene, f, k_max=2)
            reports.append(hierarchy_report(scene, entries, args.tol))
        else:
            _inviscid_ready(scene, s)
            reports.append(verify_prop6(scene, args.tol))
    doc = _document("verify", args, reports, {"suites": list(suites), "seed": args.seed})
    return _emit(doc, reports, args.out)


def _budget_report(scene, budget, tol) -> VerificationReport:
    analytic = scene.provider.mode == "analytic"
    report = VerificationReport("helicity_budget", scene.name, scene.provider.mode)
    defect_tol = tol if tol is not None else (BUDGET_TOL_ANALYTIC if analytic else BUDGET_TOL_NUMERIC)
    scale = 1.0 if analytic else max(float(np.max(np.abs(budget.dHdt_stencil))), float(np.max(np.abs(budget.minus_2nu_int_Hw))), 1e-300)
    dev = np.abs(budget.defect if analytic else budget.dHdt_stencil - budget.minus_2nu_int_Hw) / scale
    report.add(
        CheckResult(
            "defect",
            "d/dt int H + 2 nu int H_w = 0",
            float(np.max(dev)),
            float(np.sqrt(np.mean(dev ** 2))),
            defect_tol,
            scene.masked_fraction if not analytic else 0.0,
            {"relative": not analytic},
        )
    )
    if scene.nu == 0:
        spread = float(np.max(budget.int_H) - np.min(budget.int_H))
        ref = float(np.max(np.abs(budget.int_H)))
        rel = spread / ref if ref > 1e-300 else spread
        report.add(CheckResult("conservation", "int H constant in time", rel, rel, CONSERVATION_TOL, 0.0, {"spread": spread}))
    prov = scene.provenance
    spec = prov.get("catalog") or {}
    if prov.get("kind") == "catalog" and spec.get("family") == "decaying_beltrami" and scene.nu > 0:
        lam = float(spec.get("parameters", {}).get("lambda", 1.0))
        expected = -2.0 * scene.nu * lam * lam
        got = budget.fitted_rate
        rel = abs(got - expected) / abs(expected) if math.isfinite(got) else math.inf
        report.add(
            CheckResult("decay_rate", "int H ~ exp(-2 nu lambda^2 t)", rel, rel, RATE_TOL, 0.0, {"fitted": got, "expected": expected})
        )
    report.extra["fitted_rate"] = budget.fitted_rate
    return report


def cmd_budget(args) -> int:
    scene = _load(args)
    if scene.grid.nt < 3:
        raise InputError(f"the budget needs at least 3 time slices, the archive has {scene.grid.nt}")
    budget = helicity_budget(scene)
    rows = budget.rows()
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            _write_csv(fh, BUDGET_COLUMNS, rows)
    else:
        _write_csv(sys.stdout, BUDGET_COLUMNS, rows)
    report = _budget_report(scene, budget, args.tol)
    print(f"fitted rate of int H: {budget.fitted_rate:.12g}")
    doc = _document("budget", args, [report], {"columns": list(BUDGET_COLUMNS), "rows": rows})
    return _emit(doc, [report], args.out)


def _write_csv(fh, columns, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])


def _hamiltonian_source(scene, spec: str):
    spec = spec.strip()
    if spec == "t":
        return scene.provider.coordinate(0)
    if spec == "phi":
        return scene.phi
    node = parse_expression(spec)
    return scene.provider.from_expr(node)


def _suspension_check(scene, entry0) -> CheckResult:
    """Compares the Hamiltonian field of phi with the suspension, reporting both signs."""
    s = suspension(scene)
    comps = list(s.components)
    x = list(entry0.field.components)
    p = scene.provider
    mask = entry0.field.mask if entry0.field.mask is not None else scene.mask
    sv = p.values_many(comps)
    xv = p.values_many(x)
    keep = ~mask
    scale = max(max(float(np.max(np.abs(a[keep]))) for a in sv), 1e-300)
    diff = max(float(np.max(np.abs((b - a)[keep]))) for a, b in zip(sv, xv)) / scale
    summ = max(float(np.max(np.abs((b + a)[keep]))) for a, b in zip(sv, xv)) / scale
    return CheckResult(
        "entry0_is_suspension",
        "X_phi = d/dt + v",
        diff,
        diff,
        1e-8,
        entry0.masked_fraction,
        {"residual_against_minus_suspension": summ},
    )


def cmd_hierarchy(args) -> int:
    if args.k < 1:
        raise InputError("--k must be at least 1")
    scene = _load(args)
    f = _hamiltonian_source(scene, args.f)
    entries = generate_hierarchy(scene, f, k_max=args.k)
    reports = [hierarchy_report(scene, entries, args.tol)]
    if args.f.strip() == "phi" and scene.nu == 0 and scene.phi_advected:
        reports[0].add(_suspension_check(scene, entries[0]))
    if scene.nu == 0 and scene.phi_advected:
        reports.append(verify_prop6(scene, args.tol))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            _write_csv(fh, HIERARCHY_COLUMNS, [[e.to_row()[c] for c in HIERARCHY_COLUMNS] for e in entries])
    doc = _document("hierarchy", args, reports, {"f": args.f, "k_max": args.k})
    return _emit(doc, reports, args.out)


COMMANDS = {
    "catalog": cmd_catalog,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "budget": cmd_budget,
    "hierarchy": cmd_hierarchy,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except ExpressionError as err:
        print(f"error: parse error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (ArchiveError, CatalogError, InputError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except ExcessiveMaskingError as err:
        print(f"error: verification invalid: {err}", file=sys.stderr)
        return EXIT_FAIL
    except SolverInstabilityError as err:
        print(f"error: solver instability: {err}", file=sys.stderr)
        return EXIT_FAIL
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
