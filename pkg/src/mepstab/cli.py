"""Command line entry point: ``mepstab {mep,certify,perturb,counterexample,selftest}``.

Exit status is 0 on success, 1 when a computation fails and 2 for usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .counterexamples import degenerate_witness, swapped_witness
from .diagnostics import check_assumptions, endpoint_limits
from .errors import AssumptionASuspect, ConfigurationError, InputError, MepError
from .geometry import random_field, x_norm, y_norm
from .io import line_plot_svg, read_path_csv, write_json, write_path_csv, write_table_csv
from .landscape import fd_consistency
from .mep import (
    MepSolution,
    StringOptions,
    find_minimizer,
    mep_system_residual,
    residual_F,
    solution_from_path,
    solve_string,
)
from .perturbation import run_study
from .stability import apply_dF, estimate_gamma, lambda_bar, solve_dF

log = logging.getLogger("mepstab")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
ADMISSIBLE_GRAD_TOL = 1e-6


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse already exits with status 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _outdir(cfg: ExperimentConfig, args) -> Path:
    return Path(args.out) if args.out else Path(cfg.output.directory)


def _minimizers(model, cfg: ExperimentConfig):
    a, b = cfg.endpoints()
    return find_minimizer(model, a), find_minimizer(model, b)


def _string_options(cfg: ExperimentConfig) -> StringOptions:
    return StringOptions(max_iters=cfg.solver.max_iters, dt_safety=cfg.solver.dt_safety)


# --------------------------------------------------------------------------- mep


def cmd_mep(cfg: ExperimentConfig, out: Path) -> int:
    model = cfg.model.build()
    yA, yB = _minimizers(model, cfg)
    init = None
    if cfg.solver.init_path:
        init = read_path_csv(cfg.solver.init_path)
        init = type(init)(init.alphas, np.vstack([yA, init.nodes[1:-1], yB]))
    sol = solve_string(model, yA, yB, n=cfg.solver.n, tol=cfg.solver.tol, init_path=init,
                       opts=_string_options(cfg))
    perp, gam = mep_system_residual(model, sol.path)
    fmts = cfg.output.formats
    if "csv" in fmts:
        write_path_csv(sol.path, out / "path.csv")
    if "json" in fmts:
        write_json({"model": {"name": cfg.model.name, "params": cfg.model.params},
                    **sol.to_dict(), "perp_residual": perp, "gamma_residual": gam},
                   out / "solution.json")
    if "svg" in fmts:
        h = np.asarray(sol.residual_history)
        line_plot_svg({"sup |perp grad|": (np.arange(len(h)), h)}, out / "residual_history.svg",
                      title="string method residual", xlabel="iteration", ylabel="residual", logy=True)
        if sol.path.dim == 2:
            line_plot_svg({"MEP": (sol.path.nodes[:, 0], sol.path.nodes[:, 1]),
                           "saddle": ([sol.saddle[0]], [sol.saddle[1]])},
                          out / "path.svg", title=model.label, xlabel="x1", ylabel="x2", markers=False)
    print(f"converged: sbar={sol.sbar:.10g} saddle={np.array2string(sol.saddle, precision=10)} "
          f"sigma_a={sol.sigma_a:.10g} sigma_b={sol.sigma_b:.10g}")
    return EXIT_OK if sol.converged else EXIT_FAIL


# --------------------------------------------------------------------------- certify


def _roundtrip(model, sol: MepSolution, count: int, seed: int, knots: int, tol: float) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        psi = random_field(sol.alphas, sol.path.dim, rng, knots=knots)
        back = solve_dF(model, sol, apply_dF(model, sol, psi), tol=tol)
        worst = max(worst, x_norm(back.values - psi) / x_norm(psi))
    return worst


def certify_report(model, path, cfg: ExperimentConfig, roundtrip_trials: int = 5):
    """Assemble the stability report of a path; returns ``(report, solution)``."""
    ga = float(np.linalg.norm(model.gradient(path.ya)))
    gb = float(np.linalg.norm(model.gradient(path.yb)))
    if max(ga, gb) > ADMISSIBLE_GRAD_TOL:
        raise InputError(f"path endpoints are not critical points (|grad E| = {ga:.3g}, {gb:.3g})")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", AssumptionASuspect)
        sol = solution_from_path(model, path, strict=False)
        lam = lambda_bar(model, sol)
        assumptions = check_assumptions(model, sol)
    perp, gam = mep_system_residual(model, path)
    F = residual_F(model, sol, path)
    report = {
        "model": {"name": cfg.model.name, "params": cfg.model.params},
        "nodes": path.n,
        "sbar": sol.sbar,
        "saddle": sol.saddle,
        "saddle_refined": sol.converged,
        "sigma_a": sol.sigma_a,
        "sigma_b": sol.sigma_b,
        "perp_residual": perp,
        "gamma_residual": gam,
        "residual_ynorm": y_norm(F, sol.sbar, tol=ADMISSIBLE_GRAD_TOL),
        "lambda": lam.to_dict(),
        "assumptions": assumptions.to_dict(),
        "endpoint_limits": endpoint_limits(model, sol, path).to_dict(),
        "warnings": sorted({str(w.message) for w in caught}),
        "gamma_hat": None,
        "roundtrip_defect": None,
        "trials": [],
    }
    if sol.converged and perp <= 1e-6 and assumptions.b_holds:
        st = cfg.stability
        try:
            g = estimate_gamma(model, sol, trials=st.trials, seed=st.seed, knots=st.knots)
            report["gamma_hat"] = g.gamma_hat
            report["trials"] = g.trials()
            report["roundtrip_defect"] = _roundtrip(model, sol, roundtrip_trials, st.seed, st.knots,
                                                    st.collocation_tol)
        except MepError as exc:
            report["gamma_skipped"] = f"{type(exc).__name__}: {exc}"
    else:
        report["gamma_skipped"] = "path is not a converged MEP satisfying (B)"
    return report, sol


def cmd_certify(cfg: ExperimentConfig, out: Path, path_file) -> int:
    model = cfg.model.build()
    try:
        path = read_path_csv(path_file)
    except OSError as exc:
        print(f"error: cannot read path file: {exc}", file=sys.stderr)
        return EXIT_FAIL
    report, sol = certify_report(model, path, cfg)
    lam = lambda_bar(model, sol)
    fmts = cfg.output.formats
    if "json" in fmts:
        write_json(report, out / "report.json")
    if "csv" in fmts:
        write_table_csv([{"alpha": a, "lambda": v, "dlambda": d}
                         for a, v, d in zip(lam.alphas, lam.values, lam.derivative)],
                        out / "lambda.csv", ["alpha", "lambda", "dlambda"])
    if "svg" in fmts:
        line_plot_svg({"lambda": (lam.alphas, lam.values)}, out / "lambda.svg",
                      title="tangential multiplier", xlabel="alpha", ylabel="lambda")
        F = residual_F(model, sol, path).values
        a = path.alphas
        inner = slice(1, -1)
        w = np.linalg.norm(F[inner], axis=1) / np.abs(a[inner] * (a[inner] - 1))
        line_plot_svg({"|F| / |a(a-1)|": (a[inner], w)}, out / "residual.svg",
                      title="weighted residual", xlabel="alpha", ylabel="weighted |F|")
        if path.dim == 2:
            line_plot_svg({"path": (path.nodes[:, 0], path.nodes[:, 1])}, out / "path.svg",
                          title=model.label, xlabel="x1", ylabel="x2")
    a = report["assumptions"]
    print(f"a_holds={a['a_holds']} b_holds={a['b_holds']} residual_ynorm={report['residual_ynorm']:.3e} "
          f"gamma_hat={report['gamma_hat']}")
    return EXIT_OK


# --------------------------------------------------------------------------- perturb


STUDY_COLUMNS = ["delta", "model_error_c1", "subspace_error", "mep_error_c1", "minA_shift", "minB_shift",
                 "converged"]


def cmd_perturb(cfg: ExperimentConfig, out: Path) -> int:
    model = cfg.model.build()
    pc = cfg.perturbation
    bump = pc.build_bump()
    a, b = cfg.endpoints()
    mask = None if pc.mask is None else np.asarray(pc.mask, dtype=bool)
    study = run_study(model, bump, pc.deltas, a, b, epsilon=pc.epsilon, n=cfg.solver.n, tol=cfg.solver.tol,
                      mask=mask, probes=pc.probes, seed=pc.seed, opts=_string_options(cfg))
    fmts = cfg.output.formats
    if "csv" in fmts:
        write_table_csv(study.table(), out / "study.csv", STUDY_COLUMNS)
    if "json" in fmts:
        write_json({"model": {"name": cfg.model.name, "params": cfg.model.params},
                    "bump": pc.bump, **study.summary(), "table": study.table()}, out / "study.json")
    if "svg" in fmts:
        good = [r for r in study.rows if r.converged and r.delta > 0]
        line_plot_svg({"MEP deviation": ([r.model_error_c1 for r in good], [r.mep_error_c1 for r in good])},
                      out / "study.svg", title=f"slope {study.slope:.3f}", xlabel="model error (C1)",
                      ylabel="MEP deviation (C1)", logx=True, logy=True, markers=True)
    print(f"slope={study.slope:.4f} ci=[{study.slope_ci[0]:.4f}, {study.slope_ci[1]:.4f}] "
          f"failed_rows={study.summary()['failed']}")
    return EXIT_OK


# --------------------------------------------------------------------------- counterexample


def cmd_counterexample(cfg: ExperimentConfig, out: Path, kind: str) -> int:
    cc = cfg.counterexample
    fmts = cfg.output.formats
    if kind == "degenerate":
        w = degenerate_witness(cc.ns, grid=cc.grid, eta0=cc.eta0)
        if "csv" in fmts:
            write_table_csv(w.table(), out / "degenerate.csv", ["n", "ynorm_f", "xnorm_psi", "ratio"])
        if "json" in fmts:
            write_json({**w.summary(), "table": w.table()}, out / "degenerate.json")
        if "svg" in fmts:
            a = w.profiles["alphas"]
            keep = a <= 1.5 * w.eta0
            line_plot_svg({f"n={n}": (a[keep], w.profiles[n][keep]) for n in w.ns}, out / "degenerate.svg",
                          title="beta_n profiles", xlabel="alpha", ylabel="beta_n")
        s = w.summary()
        print(f"min xnorm_psi={s['min_xnorm_psi']:.4f} ynorm final/first={s['ynorm_final_over_first']:.4f}")
    else:
        w = swapped_witness(grid=cc.grid)
        s = w.summary()
        if "csv" in fmts:
            write_table_csv([s], out / "swapped.csv", list(s))
        if "json" in fmts:
            write_json(s, out / "swapped.json")
        print(f"sigma_j={w.sigma_j:g} blowup_fit={w.blowup_fit:.4f} ynorm_f={w.ynorm_f:.6g}")
    return EXIT_OK


# --------------------------------------------------------------------------- selftest


def _selftest_checks():
    from .landscape import DoubleWell

    m = DoubleWell(10.0)
    fd = fd_consistency(m, [0.3, -0.2])
    yield "finite differences", max(fd.grad_error, fd.hess_error) <= 1e-6
    sol = solve_string(m, [-1.0, 0.0], [1.0, 0.0], n=51, tol=1e-8)
    exact = np.column_stack([2 * sol.alphas - 1, np.zeros(sol.path.n)])
    yield "double-well MEP", np.max(np.abs(sol.path.nodes - exact)) <= 1e-6 and abs(sol.sbar - 0.5) <= 1e-6
    lam = lambda_bar(m, sol)
    yield "lambda derivatives", max(abs(lam.dprime0 - 8), abs(lam.dprime_sbar + 4), abs(lam.dprime1 - 8)) <= 1e-5
    rng = np.random.default_rng(0)
    psi = random_field(sol.alphas, 2, rng)
    back = solve_dF(m, sol, apply_dF(m, sol, psi))
    yield "linearization round trip", x_norm(back.values - psi) / x_norm(psi) <= 1e-3
    rep = check_assumptions(m, sol)
    yield "assumption report", rep.a_holds and rep.b_holds and abs(rep.sigma_ratio - 1.25) <= 1e-8


def cmd_selftest() -> int:
    ok = True
    for name, passed in _selftest_checks():
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'} {name}")
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mepstab", description="Minimum energy paths and their stability certificates.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("-c", "--config", help="experiment configuration (JSON)")
        sp.add_argument("-o", "--out", help="output directory (overrides output.directory)")
        sp.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration leaf, e.g. solver.tol=1e-9")

    common(sub.add_parser("mep", help="compute a minimum energy path"))
    sp = sub.add_parser("certify", help="stability report for a path file")
    common(sp)
    sp.add_argument("path", help="path CSV (alpha,x1,...,xN)")
    common(sub.add_parser("perturb", help="perturbation study"))
    sp = sub.add_parser("counterexample", help="witnesses for the failure of assumption (B)")
    sp.add_argument("kind", choices=["degenerate", "swapped"])
    common(sp)
    sub.add_parser("selftest", help="run quick built-in checks")
    return p


def _split_overrides(argv):
    """Turn trailing ``--section.key=value`` arguments into ``--set`` entries."""
    out = []
    for arg in argv:
        if arg.startswith("--") and "=" in arg and "." in arg.split("=", 1)[0]:
            out += ["--set", arg[2:]]
        else:
            out.append(arg)
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_split_overrides(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    if args.command == "selftest":
        return cmd_selftest()
    try:
        cfg = load_config(args.config, args.set)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = _outdir(cfg, args)
    try:
        if args.command == "mep":
            return cmd_mep(cfg, out)
        if args.command == "certify":
            return cmd_certify(cfg, out, args.path)
        if args.command == "perturb":
            return cmd_perturb(cfg, out)
        return cmd_counterexample(cfg, out, args.kind)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MepError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
