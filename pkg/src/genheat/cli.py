"""Command-line front end.

    genheat solve          [--config FILE] [--out DIR] ...   spectral pipeline
    genheat oracle         ...                                time stepping
    genheat verify         ...                                both backends, all checks
    genheat converge       ...                                continuity experiment
    genheat counterexample ...                                incompatible data experiment
    genheat examples NAME  ...                                canned scenarios

Every run writes ``v.csv``, ``rho.csv``, ``report.json``, ``summary.txt``
and ``config.effective.json`` (which can be passed back as ``--config``).
Exit status: 0 when every check passes, 1 when one fails, 2 for usage,
configuration or inadmissible-data errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .initial_data import IncompatibleData, NonZeroMean, from_xspace
from .measure import InvalidMeasure, cantor_approx, capacity, cell_centers, two_atoms
from .oracle import NoPlateaus, robin_flux_check
from .resolvent import sweep
from .scenario import (CANNED_EXAMPLES, ConfigError, Scenario,
                       load_config, make_function, scenario_from_dict)
from .synthesis import SolutionField, pushback, synthesize, write_field_csv
from .verification import (ExperimentReport, continuity_experiment,
                           counterexample_experiment, cross_validate, lemma_suite,
                           structural_checks, symmetry_check, weak_pair,
                           weak_residual_x, weak_residual_y)

log = logging.getLogger("genheat")

# backend tolerances against closed forms and each other
ORACLE_TOL = 5e-3
SPECTRAL_TOL = 2e-2
XVAL_TOL_SMOOTH = 2.5e-2
XVAL_TOL_SINGULAR = 5e-2
WEAK_TOL = 5e-3
PAIR_TOL = 1e-5
ROBIN_REL_TOL = 5e-2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (TOML or JSON)")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--workers", type=int, help="worker threads for the sweeps")
    common.add_argument("--n", type=int, help="number of grid cells")
    common.add_argument("--xi-max", type=float, help="frequency cutoff")
    common.add_argument("--dt", type=float, help="oracle time step")
    common.add_argument("--tmax", type=float, help="time horizon")
    common.add_argument("--quiet", action="store_true", help="print nothing on success")

    p = argparse.ArgumentParser(prog="genheat", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [("solve", "spectral solve"), ("oracle", "time-stepping solve"),
                        ("verify", "both backends and all checks"),
                        ("converge", "continuity experiment"),
                        ("counterexample", "incompatible-data experiment")]:
        sub.add_parser(name, parents=[common], help=help_)
    ex = sub.add_parser("examples", parents=[common], help="canned scenarios")
    ex.add_argument("name", choices=sorted(CANNED_EXAMPLES))
    return p


def _scenario(args) -> Scenario:
    if args.command == "examples":
        if args.config:
            raise ConfigError("examples take no --config")
        raw = json.loads(json.dumps(CANNED_EXAMPLES[args.name]))
        raw["id"] = args.name
    elif args.config:
        raw = load_config(args.config)
        raw.setdefault("id", os.path.splitext(os.path.basename(args.config))[0])
    else:
        raw = {"id": args.command}
    if not isinstance(raw.get("grid", {}), dict):
        raise ConfigError("grid must be a table")
    grid = dict(raw.get("grid", {}))
    for flag, key in (("n", "n"), ("xi_max", "xi_max"), ("dt", "dt"), ("tmax", "t_max")):
        val = getattr(args, flag)
        if val is not None:
            grid[key] = val
    raw["grid"] = grid
    if args.workers is not None:
        raw["workers"] = args.workers
    if args.command != "examples":
        exp = dict(raw.get("experiment", {}))
        exp["kind"] = args.command
        raw["experiment"] = exp
    return scenario_from_dict(raw)


# --------------------------------------------------------------------------
# runners: each returns (report, solution written to v.csv / rho.csv)

def _run_solve(sc: Scenario):
    spec = sc.spec()
    profile = sc.profile(spec)
    data = sc.data(spec, profile)
    fam = sweep(sc.grid.frequency_grid, profile, data, workers=sc.workers)
    sol = synthesize(fam, data, sc.grid.sample_times(), workers=sc.workers)
    rep = ExperimentReport(sc.id)
    structural_checks(sol, profile, rep, prefix="spectral.")
    rep.add("spectral.solver_residual", fam.residuals.max(), 1e-10, "derived: backward error")
    return rep, sol


def _run_oracle(sc: Scenario):
    spec = sc.spec()
    profile = sc.profile(spec)
    sol = sc.solve_oracle(spec=spec)
    rep = ExperimentReport(sc.id)
    structural_checks(sol, profile, rep, prefix="oracle.")
    _robin(sol, profile, rep)
    return rep, sol


def _robin(sol, profile, rep):
    if len(profile.plateaus) != 1:
        return
    try:
        tab = robin_flux_check(SolutionField(sol.times[sol.times > 0], sol.x,
                                             sol.v[sol.times > 0], sol.mean, sol.a,
                                             sol.backend), profile, rel_tol=ROBIN_REL_TOL)
    except (NoPlateaus, ValueError):
        return
    if tab.table.size == 0:
        return
    rep.tables["robin"] = tab.table
    rel = tab.discrepancy / np.maximum(tab.tolerance / ROBIN_REL_TOL, 1e-300)
    rep.add("robin.flux_balance", rel.max(), ROBIN_REL_TOL,
            f"derived: slopes equal b*jump with b = {tab.b:g}")


def _closed_form(sc: Scenario, rep, spectral, oracle):
    # single cosine mode on the uniform measure
    x = cell_centers(sc.grid.n)
    keep = spectral.times > 0
    exact = np.exp(-4 * np.pi ** 2 * spectral.times[keep])[:, None] * np.cos(2 * np.pi * x)
    rep.add("closed_form.spectral", np.max(np.abs(spectral.v[keep] - exact)), SPECTRAL_TOL,
            "derived: separation of variables")
    rep.add("closed_form.oracle", np.max(np.abs(oracle.v[keep] - exact)), ORACLE_TOL,
            "derived: separation of variables")


def _run_verify(sc: Scenario):
    spec = sc.spec()
    profile = sc.profile(spec)
    data = sc.data(spec, profile)
    times = sc.grid.sample_times()
    rep = ExperimentReport(sc.id)

    fam = sweep(sc.grid.frequency_grid, profile, data, workers=sc.workers)
    lemma_suite(fam, data, rep)
    conj, imag = symmetry_check(profile, data, np.linspace(0.0, 64.0, 129))
    rep.add("conjugate_symmetry", conj, 1e-12, "trivial: real coefficients")
    rep.add("realness", imag, 1e-12, "trivial: conjugate symmetry of k")

    sup, l2, spectral, oracle = cross_validate(sc, times, spec=spec)
    smooth = not profile.plateaus
    rep.add("cross_validate.sup", sup, XVAL_TOL_SMOOTH if smooth else XVAL_TOL_SINGULAR,
            "derived: sum of backend tolerances / refinement study")
    rep.add("cross_validate.l2", l2, XVAL_TOL_SMOOTH if smooth else XVAL_TOL_SINGULAR,
            "derived: bounded by the sup discrepancy")
    structural_checks(spectral, profile, rep, prefix="spectral.")
    structural_checks(oracle, profile, rep, prefix="oracle.")
    _robin(oracle, profile, rep)
    if sc.id == "lebesgue":
        _closed_form(sc, rep, spectral, oracle)

    # weak forms on a dense window
    T = float(min(0.2, times.max()))
    if T > 0:
        dense = np.linspace(0.0, T, 257)
        wsol = synthesize(fam, data, dense, workers=sc.workers)
        osol = sc.solve_oracle(dense, spec=spec)
        tests = [lambda y: np.sin(2 * np.pi * y), lambda y: np.cos(4 * np.pi * y)]
        for tag, s in (("spectral", wsol), ("oracle", osol)):
            rep.add(f"{tag}.weak_residual_x", weak_residual_x(s, profile, data, T),
                    WEAK_TOL, "derived: weak formulation in x")
            rep.add(f"{tag}.weak_residual_y",
                    max(weak_residual_y(s, spec, g, T, h=data.f) for g in tests),
                    WEAK_TOL, "derived: weak formulation in y")
            gap = max(abs(np.subtract(*weak_pair(s, spec, profile, data, g, T))) for g in tests)
            rep.add(f"{tag}.weak_pair_agreement", gap, PAIR_TOL,
                    "derived: substitution rule, quadrature tolerance")
    return rep, spectral


def _family(sc: Scenario):
    ns = [int(n) for n in sc.experiment.ns]
    if sc.experiment.family == "two_atoms":
        return ns, [two_atoms(n) for n in ns]
    return ns, [cantor_approx(n) for n in ns]


def _run_converge(sc: Scenario):
    if sc.initial.g_yspace is None:
        raise ConfigError("converge needs initial.g_yspace")
    ns, specs = _family(sc)
    gW = make_function(sc.initial.g_yspace, "y")
    rep = continuity_experiment(specs, gW, sc.grid.sample_times(), sc.spec(),
                                b=sc.initial.b, N=sc.grid.n, grid=sc.grid.frequency_grid,
                                labels=ns, workers=sc.workers, scenario_id=sc.id)
    return rep, rep.solutions["limit"]


def _run_counterexample(sc: Scenario):
    if sc.experiment.family != "two_atoms":
        raise ConfigError("counterexample uses family = two_atoms")
    ns = [int(n) for n in sc.experiment.ns]
    f_fixed = make_function(sc.experiment.f_fixed, "x")
    cfg = sc.grid.scheme()
    times = np.unique(np.concatenate((
        np.linspace(0.0, min(0.05, sc.grid.t_max), 2001),
        np.linspace(min(0.05, sc.grid.t_max), sc.grid.t_max, 451))))
    rep = counterexample_experiment(ns, f_fixed, N=sc.grid.n, cfg=cfg, times=times,
                                    scenario_id=sc.id)

    # the strict pipeline refuses this datum on the limit capacity
    profile = capacity(sc.spec(), sc.grid.n)
    x = cell_centers(sc.grid.n)
    fx = f_fixed(x)
    fs = sc.grid.n ** 2 * (np.roll(fx, -1) - 2 * fx + np.roll(fx, 1))
    try:
        from_xspace(fx, fs, profile, compat_tol=sc.initial.compat_tol)
        rejected = 0.0
    except IncompatibleData:
        rejected = 1.0
    if profile.plateaus:
        rep.add("compatibility_gate_rejects", rejected, 1.0,
                "derived: f'' nonzero on the plateau", "==")

    if sc.experiment.control and sc.initial.g_yspace is not None:
        ctl = counterexample_experiment(ns, None, N=sc.grid.n, cfg=cfg, times=times,
                                        gW=make_function(sc.initial.g_yspace, "y"),
                                        b=sc.initial.b, scenario_id=sc.id + ".control")
        rep.extend(ctl, prefix="control.")
    return rep, rep.solutions["limit"]


_RUNNERS = {
    "solve": _run_solve,
    "oracle": _run_oracle,
    "verify": _run_verify,
    "converge": _run_converge,
    "counterexample": _run_counterexample,
}


def write_outputs(out: str, sc: Scenario, rep: ExperimentReport, sol: SolutionField):
    os.makedirs(out, exist_ok=True)
    spec = sc.spec()
    write_field_csv(os.path.join(out, "v.csv"), sol.times, sol.x, sol.v, ("t", "x", "v"))
    y = cell_centers(sc.grid.n)
    write_field_csv(os.path.join(out, "rho.csv"), sol.times, y, pushback(sol, spec, y),
                    ("t", "y", "rho"))
    with open(os.path.join(out, "report.json"), "w") as fh:
        fh.write(rep.to_json() + "\n")
    with open(os.path.join(out, "summary.txt"), "w") as fh:
        fh.write(rep.summary() + "\n")
    with open(os.path.join(out, "config.effective.json"), "w") as fh:
        json.dump(sc.to_dict(), fh, indent=2)
        fh.write("\n")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = _scenario(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        rep, sol = _RUNNERS[sc.experiment.kind](sc)
    except (ConfigError, InvalidMeasure, NonZeroMean, IncompatibleData) as exc:
        print(f"error in scenario {sc.id}: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError) as exc:
        print(f"failure in scenario {sc.id}: {exc}", file=sys.stderr)
        return 1
    write_outputs(args.out, sc, rep, sol)
    if not args.quiet or not rep.passed:
        print(rep.summary())
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
