"""Command-line entry points: solve, diagnose, gauduchon, plotdata,
verify-pointwise.

Every failure exits nonzero with a single machine-parsable line of the
form ``ERROR:<class>: message`` on stderr.  Exit codes:

    0  success
    1  an enabled theorem-backed diagnostic failed / validation failed
    2  configuration error (the offending key is named)
    3  solver non-convergence or kernel degeneracy
    4  I/O failure
    5  usage error (unknown subcommand, check name, or plot kind)
"""

from __future__ import annotations

import argparse
import csv
import shutil
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from . import kernels
from .calculus import HermitianField, volume_measure
from .fieldfile import FieldFileError, read_field, write_field
from .gauduchon import GauduchonError, classify_metric, solve_gauduchon
from .grid import ScalarField
from .scenarios import ConfigError, Scenario, load_scenario, parse_config_text
from .solver import KrylovError, NonConvergenceError, PositivityError, solve

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4
EXIT_USAGE = 5

THEOREM_CHECKS = ("measure_bound", "ricci_identity", "b_formula")
REPORT_CHECKS = ("gradient_energy", "wedge_ledger", "moser", "sublevel",
                 "trace", "potential", "poincare", "pointwise")
ALL_CHECKS = THEOREM_CHECKS + REPORT_CHECKS


def _err(kind: str, message: str) -> None:
    print(f"ERROR:{kind}: {message}", file=sys.stderr)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _write_summary(path: Path, records: list[tuple[str, object]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in records:
            fh.write(f"{key} = {_fmt(value)}\n")


def _read_summary(path: Path) -> dict[str, str]:
    return parse_config_text(path.read_text(encoding="utf-8"))


def _build(scenario: Scenario):
    grid = scenario.build_grid()
    metric = scenario.build_metric(grid)
    F = scenario.build_rhs(grid, metric)
    return grid, metric, F


# ---------------------------------------------------------------------------
# solve


def run_solve(config_path: str, out_dir: str) -> int:
    try:
        scenario = load_scenario(config_path)
        grid, metric, F = _build(scenario)
    except (ConfigError, OSError) as err:
        _err("config", str(err))
        return EXIT_CONFIG

    try:
        report = solve(metric, F, scenario.solve_options)
    except (NonConvergenceError, KrylovError, PositivityError) as err:
        _err("solver", str(err))
        return EXIT_SOLVER

    try:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_field(out / "phi.hmaf", report.phi)
        shutil.copyfile(config_path, out / "scenario.cfg")

        records = [
            ("scenario", scenario.name),
            ("n", scenario.n),
            ("grid.sizes", " ".join(str(s) for s in scenario.sizes)),
            ("kernel_backend", kernels.backend_name()),
            ("b", report.b),
            ("final_residual", report.final_residual),
            ("final_residual_raw", report.residual_raw),
            ("newton_iters", report.newton_iters),
            ("krylov_iters", report.krylov_iters_total),
            ("min_eig", report.min_eig_gphi),
            ("sup_phi", float(report.phi.values.max())),
            ("inf_phi", float(report.phi.values.min())),
            ("wall_time_s", report.wall_time),
        ]
        star = scenario.phi_star(grid)
        if star is not None:
            target = star.values - star.values.max()
            records.append(("manufactured_sup_error",
                            float(np.max(np.abs(report.phi.values - target)))))
        _write_summary(out / "summary.txt", records)

        with open(out / "iterations.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "residual", "step", "min_eig", "krylov_iters"])
            rows = zip(report.residual_history, report.step_history,
                       report.min_eig_history, report.krylov_history)
            for i, (res, step, eig, kry) in enumerate(rows, start=1):
                writer.writerow([i, _fmt(res), _fmt(step), _fmt(eig), kry])
    except OSError as err:
        _err("io", str(err))
        return EXIT_IO
    return EXIT_OK


# ---------------------------------------------------------------------------
# diagnose


def _selected_checks(filter_arg) -> tuple[str, ...]:
    if not filter_arg or filter_arg == ["all"]:
        return ALL_CHECKS
    names = []
    for chunk in filter_arg:
        names.extend(t.strip() for t in chunk.split(",") if t.strip())
    if "all" in names:
        return ALL_CHECKS
    for name in names:
        if name not in ALL_CHECKS:
            raise ValueError(f"unknown check '{name}'; known: {', '.join(ALL_CHECKS)}")
    return tuple(names)


def run_diagnose(config_path: str, solution_dir: str, checks_filter,
                 out_dir: str | None = None, b_tol: float = 1e-8) -> int:
    try:
        selected = _selected_checks(checks_filter)
    except ValueError as err:
        _err("usage", str(err))
        return EXIT_USAGE

    try:
        scenario = load_scenario(config_path)
        grid, metric, F = _build(scenario)
    except (ConfigError, OSError) as err:
        _err("config", str(err))
        return EXIT_CONFIG

    sol = Path(solution_dir)
    try:
        phi = read_field(sol / "phi.hmaf")
        summary = _read_summary(sol / "summary.txt")
        b = float(summary["b"])
        solve_tol = scenario.solve_options.residual_tol
    except (OSError, FieldFileError, KeyError, ValueError, ConfigError) as err:
        _err("io", f"cannot load solution from {solution_dir}: {err}")
        return EXIT_IO
    if not isinstance(phi, ScalarField) or phi.grid.sizes != grid.sizes:
        _err("io", "phi.hmaf does not match the scenario grid")
        return EXIT_IO

    report = diag.DiagnosticsReport(n=grid.n, grid_sizes=grid.sizes, checks={})
    meas = volume_measure(metric)
    p0 = scenario.diagnostics_p0

    u = None
    if "potential" in selected or "poincare" in selected:
        try:
            u = solve_gauduchon(metric, tol=scenario.gauduchon_tol).u
        except GauduchonError as err:
            _err("solver", f"gauduchon factor for diagnostics: {err}")
            return EXIT_SOLVER

    if "measure_bound" in selected:
        res = diag.measure_bound_check(
            ScalarField(grid, p0 * phi.values), meas)
        report.add("measure_bound", res.passed,
                   {"c1": res.c1, "sublevel": res.sublevel, "bound": res.bound})
    if "ricci_identity" in selected:
        resid = diag.ricci_identity_check(phi, b, F, metric)
        report.add("ricci_identity", resid <= 10.0 * solve_tol, {"residual": resid})
    if "b_formula" in selected:
        res = diag.b_formula_check(metric, F, b)
        passed = res.deviation <= b_tol if res.condition_holds else None
        report.add("b_formula", passed,
                   {"predicted": res.predicted, "deviation": res.deviation,
                    "condition_holds": res.condition_holds})
    if "gradient_energy" in selected:
        res = diag.gradient_energy_ratio(phi, metric, [8, 16, 32, 64], oversample=2)
        consts = {f"q_p{int(p)}": q for p, q in zip(res.p_list, res.ratio_chain)}
        consts["empirical_C"] = res.empirical_constant
        consts["route_gap"] = res.max_rel_gap
        report.add("gradient_energy", None, consts)
    if "wedge_ledger" in selected:
        led = diag.wedge_integral_ledger(phi, metric, 4.0 * p0)
        consts = {f"volume_{k}": v for k, v in enumerate(led.volume_terms)}
        consts.update({f"gradient_{k}": v for k, v in enumerate(led.gradient_terms)})
        consts["claim_C"] = led.claim_constant
        report.add("wedge_ledger", None, consts)
    if "moser" in selected:
        prof = diag.moser_profile(phi, metric, p0=p0)
        report.add("moser", None, {
            "fitted_C": prof.fitted_constant, "sup": prof.sup_value,
            "norm_p0": prof.norms[0], "norm_pmax": prof.norms[-1],
            "bound_holds": prof.bound_holds})
    if "sublevel" in selected:
        cert = diag.sublevel_certificate(phi, metric, p0=p0)
        report.add("sublevel", None, {
            "offset": cert.offset, "delta": cert.delta, "measured": cert.measured})
    if "trace" in selected:
        te = diag.trace_estimate(phi, metric)
        consts = {f"C_A{int(a)}": c for a, c in te.constants.items()}
        consts["trace_sup"] = te.trace_sup
        report.add("trace", None, consts)
    if "potential" in selected:
        sp = diag.shifted_potential_checks(phi, metric, u)
        report.add("potential", None, {
            "c0": sp.c0, "c1": sp.c1, "c2": sp.c2,
            "conformal_identity_gap": sp.conformal_identity_gap})
    if "poincare" in selected:
        psi = ScalarField(grid, phi.values - phi.values.min())
        metric_G = metric.scaled_by(np.exp(u.values))
        pc = diag.poincare_check(psi, metric_G)
        report.add("poincare", None, {
            "l2_deviation": pc.l2_deviation, "gradient_energy": pc.gradient_energy,
            "ratio": pc.ratio})
    if "pointwise" in selected:
        sample = diag.pointwise_ineq_sample(
            scenario.diagnostics_trials, eps=0.5, seed=scenario.seed, n=grid.n)
        report.add("pointwise", None,
                   {f"C_k{k}": c for k, c in sample.constants.items()})

    out = Path(out_dir) if out_dir else sol
    try:
        out.mkdir(parents=True, exist_ok=True)
        lines = [f"diagnostics for {scenario.name} (n={grid.n}, grid "
                 f"{'x'.join(str(s) for s in grid.sizes)})"]
        for check in report.checks.values():
            status = ("PASS" if check.passed else "FAIL") if check.passed is not None else "REPORT"
            consts = ", ".join(f"{k}={_fmt(v)}" for k, v in check.constants.items())
            lines.append(f"{check.name}: {status} [{consts}]")
        (out / "diagnostics.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

        with open(out / "diagnostics.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name", "passed", "constants"])
            for check in report.checks.values():
                passed = "" if check.passed is None else _fmt(check.passed)
                packed = ";".join(f"{k}={_fmt(v)}" for k, v in check.constants.items())
                writer.writerow([check.name, passed, packed])
    except OSError as err:
        _err("io", str(err))
        return EXIT_IO

    for line in lines[1:]:
        print(line)
    if report.failed:
        _err("check", f"failed: {', '.join(report.failed)}")
        return EXIT_CHECK_FAILED
    return EXIT_OK


# ---------------------------------------------------------------------------
# gauduchon


def run_gauduchon(config_path: str, out_dir: str) -> int:
    try:
        scenario = load_scenario(config_path)
        grid = scenario.build_grid()
        metric = scenario.build_metric(grid)
    except (ConfigError, OSError) as err:
        _err("config", str(err))
        return EXIT_CONFIG

    try:
        result = solve_gauduchon(metric, tol=scenario.gauduchon_tol)
    except GauduchonError as err:
        _err("solver", str(err))
        return EXIT_SOLVER

    flags = classify_metric(metric)
    try:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_field(out / "u.hmaf", result.u)
        records = [
            ("scenario", scenario.name),
            ("n", scenario.n),
            ("grid.sizes", " ".join(str(s) for s in scenario.sizes)),
            ("residual", result.residual),
            ("iterations", result.iterations),
            ("sup_u", float(result.u.values.max())),
            ("inf_u", float(result.u.values.min())),
        ]
        records += [(f"flag.{k}", v) for k, v in flags.flags.items()]
        records += [(f"norm.{k}", v) for k, v in flags.norms.items()]
        _write_summary(out / "gauduchon.txt", records)
    except OSError as err:
        _err("io", str(err))
        return EXIT_IO
    return EXIT_OK


# ---------------------------------------------------------------------------
# plotdata


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def emit_plotdata(solution_dir: str, kind: str, out_dir: str | None = None) -> int:
    sol = Path(solution_dir)
    out = Path(out_dir) if out_dir else sol
    try:
        scenario = load_scenario(sol / "scenario.cfg")
        grid, metric, _ = _build(scenario)
        phi = read_field(sol / "phi.hmaf")
    except (OSError, ConfigError, FieldFileError) as err:
        _err("io", f"cannot load solution from {solution_dir}: {err}")
        return EXIT_IO

    try:
        out.mkdir(parents=True, exist_ok=True)
        if kind == "moser":
            prof = diag.moser_profile(phi, metric, p0=scenario.diagnostics_p0)
            _write_csv(out / "moser.csv", ["p", "norm"],
                       zip(prof.p_list, prof.norms))
        elif kind == "residuals":
            rows = []
            with open(sol / "iterations.csv", newline="", encoding="utf-8") as fh:
                for record in csv.DictReader(fh):
                    rows.append((record["iter"], record["residual"]))
            _write_csv(out / "residual_history.csv", ["iter", "residual"], rows)
        elif kind.startswith("slice:"):
            fixed = {}
            for part in kind[len("slice:"):].split(","):
                axis_name, _, value = part.partition("=")
                axis_name = axis_name.strip()
                if not axis_name.startswith("x") or not value:
                    raise ValueError(f"bad slice component {part!r}")
                fixed[int(axis_name[1:])] = float(value)
            free = [a for a in range(2 * grid.n) if a not in fixed]
            if len(free) != 2:
                raise ValueError(
                    f"slice must fix all but two axes; free axes {free}")
            index = [slice(None)] * (2 * grid.n)
            for axis, value in fixed.items():
                step = 2 * np.pi / grid.sizes[axis]
                index[axis] = int(round(value / step)) % grid.sizes[axis]
            section = phi.values[tuple(index)]
            a0, a1 = free
            x0 = grid.axis_coordinates(a0)
            x1 = grid.axis_coordinates(a1)
            rows = [(x0[i], x1[j], section[i, j])
                    for i in range(grid.sizes[a0]) for j in range(grid.sizes[a1])]
            name = "slice_" + "_".join(f"x{a}" for a in free) + ".csv"
            _write_csv(out / name, [f"x{a0}", f"x{a1}", "phi"], rows)
        else:
            raise ValueError(f"unknown plotdata kind {kind!r}")
    except ValueError as err:
        _err("usage", str(err))
        return EXIT_USAGE
    except OSError as err:
        _err("io", str(err))
        return EXIT_IO
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify-pointwise


def run_verify_pointwise(n: int, trials: int, seed: int, eps: float,
                         torsion_scale: float) -> int:
    try:
        calib = diag.pointwise_ineq_sample(trials, eps=eps, seed=seed, n=n,
                                           torsion_scale=torsion_scale)
        holdout = diag.pointwise_ineq_sample(trials, eps=eps, seed=seed + 1,
                                             n=n, torsion_scale=torsion_scale)
    except ValueError as err:
        _err("usage", str(err))
        return EXIT_USAGE

    ok = True
    for k, c in calib.constants.items():
        worst = float(holdout.ratios[k].max())
        margin = worst / (2.0 * c)
        status = "PASS" if worst <= 2.0 * c else "FAIL"
        ok = ok and worst <= 2.0 * c
        print(f"k={k}: calibrated_C={_fmt(c)} holdout_worst={_fmt(worst)} "
              f"margin={_fmt(margin)} {status}")
    if not ok:
        _err("check", "holdout sample exceeded twice the calibrated constant")
        return EXIT_CHECK_FAILED
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hma",
        description="Complex Monge-Ampere laboratory on flat Hermitian tori")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve a scenario and write the solution")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--out", required=True)

    p_diag = sub.add_parser("diagnose", help="run estimate diagnostics on a solution")
    p_diag.add_argument("--config", required=True)
    p_diag.add_argument("--solution", required=True)
    p_diag.add_argument("--checks", action="append", default=None,
                        help="comma-separated check names (default: all)")
    p_diag.add_argument("--out", default=None)
    p_diag.add_argument("--tol", type=float, default=1e-8,
                        help="pass tolerance for the b-formula deviation")

    p_gaud = sub.add_parser("gauduchon", help="compute the Gauduchon factor")
    p_gaud.add_argument("--config", required=True)
    p_gaud.add_argument("--out", required=True)

    p_plot = sub.add_parser("plotdata", help="emit CSV slices from a solution")
    p_plot.add_argument("--solution", required=True)
    p_plot.add_argument("--kind", required=True,
                        help="moser | residuals | slice:x2=0,x3=0")
    p_plot.add_argument("--out", default=None)

    p_ver = sub.add_parser("verify-pointwise",
                           help="standalone two-phase pointwise-inequality sampler")
    p_ver.add_argument("--n", type=int, default=2, choices=(2, 3))
    p_ver.add_argument("--trials", type=int, default=100000)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--eps", type=float, default=0.5)
    p_ver.add_argument("--torsion-scale", type=float, default=1.0)

    args = parser.parse_args(argv)
    if args.command == "solve":
        return run_solve(args.config, args.out)
    if args.command == "diagnose":
        return run_diagnose(args.config, args.solution, args.checks,
                            args.out, args.tol)
    if args.command == "gauduchon":
        return run_gauduchon(args.config, args.out)
    if args.command == "plotdata":
        return emit_plotdata(args.solution, args.kind, args.out)
    if args.command == "verify-pointwise":
        return run_verify_pointwise(args.n, args.trials, args.seed, args.eps,
                                    args.torsion_scale)
    _err("usage", f"unknown command {args.command!r}")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
