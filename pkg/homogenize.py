#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""bloch-homog v1.0 - command line harness"""
import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

import config
from config import validate_config
from services.cell_problem import direction_data
from services.errors import HomogError
from services.evolution import run_evolution_ladder
from services.experiments import (
    build_problem,
    correction_regime,
    fit_summary,
    predicted_exponents,
    run_interpolation_experiment,
    run_rate_experiment,
    special_cases,
    tau_growth_violations,
    trivial_region_violations,
)
from services.fibers import projection_removal_bound
from services.lattice_geometry import build_lattice, sample_directions
from services.results_writer import ResultsWriter, WriterConfig, emit_results
from services.sweep import WorkerPool
from services.symbols import build_symbol, make_coefficient
from services.threshold import geometric_ladder, threshold_residual, threshold_window
from utils.config_loader import load_experiment_config
from utils.messages import ARGS, COMMANDS, MSG, format_matrix, format_slope

logging.basicConfig(format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
                    level=getattr(logging, config.LOG_LEVEL, logging.INFO))
logger = logging.getLogger(__name__)


def _writer(out_dir):
    return ResultsWriter(WriterConfig(Path(out_dir)))


# ========================================
# HANDLERS (each returns the list of failed checks)
# ========================================
def cmd_validate(cfg, out_dir, pool):
    lattice = build_lattice(cfg.basis)
    symbol = build_symbol(cfg.symbol.p, cfg.symbol.terms, lattice.dimension)
    coef = make_coefficient(lattice, cfg.coefficient.terms, cfg.coefficient.complete_hermitian,
                            grid_resolution=cfg.coefficient.validation_resolution)
    window = threshold_window(lattice, symbol, coef.certificate)
    cert = coef.certificate
    logger.info(MSG["config_ok"], cfg.run.config_id, lattice.dimension, symbol.order, symbol.n, symbol.m)
    logger.info(MSG["alpha"], symbol.alpha0, symbol.alpha1)
    logger.info(MSG["positivity"], cert.min_eigenvalue, cert.max_eigenvalue, cert.grid_resolution)
    logger.info(MSG["window"], window.delta, window.t0, window.r0)
    return []


def cmd_cell(cfg, out_dir, pool):
    problem = build_problem(cfg)
    eff = problem.eff
    report = special_cases(problem)
    logger.info(MSG["g0"], format_matrix(eff.g0))
    logger.info(MSG["voigt"], format_matrix(eff.g_voigt))
    logger.info(MSG["reuss"], format_matrix(eff.g_reuss))
    logger.info(MSG["special"], report.voigt_case, report.reuss_case, report.gtilde_constant, report.real_scalar_case)

    limit = cfg.truncation.report * problem.lattice.longest_dual * (1.0 + 1e-12)
    rows = []
    for coord, vec, mat in zip(eff.gtilde_freq.coords, eff.gtilde_freq.vectors, eff.gtilde):
        if np.linalg.norm(vec) > limit:
            continue
        for (a, b), v in np.ndenumerate(mat):
            rows.append({"freq": " ".join(str(int(c)) for c in coord), "row": a, "col": b,
                         "re": v.real, "im": v.imag})
    writer = _writer(out_dir)
    writer.write_rows("gtilde.csv", rows)
    writer.write_summary("cell_summary.json", {
        "config_id": cfg.run.config_id,
        "residual": problem.cell.residual,
        "g0": eff.g0, "g_voigt": eff.g_voigt, "g_reuss": eff.g_reuss,
        "special_cases": asdict(report),
        "cell_frequencies": len(problem.cell_freq),
    })
    return list(report.violations)


def cmd_germ(cfg, out_dir, pool):
    problem = build_problem(cfg)
    report = special_cases(problem)
    rows, failures = [], []
    for theta in sample_directions(problem.lattice.dimension, cfg.brillouin.directions):
        data = direction_data(problem.cell, problem.eff, problem.symbol, theta)
        ratio = float(np.linalg.norm(data.correction, 2) / np.linalg.norm(data.germ, 2))
        row = {f"theta{i}": float(t) for i, t in enumerate(theta)}
        row.update({f"gamma{j}": float(g) for j, g in enumerate(data.germ_values)})
        for j, omega in enumerate(data.germ_vectors.T):
            # fix the phase: largest component real and positive
            lead = omega[np.argmax(np.abs(omega))]
            omega = omega * (abs(lead) / lead)
            for i, c in enumerate(omega):
                row[f"omega{j}_{i}_re"] = float(c.real)
                row[f"omega{j}_{i}_im"] = float(c.imag)
        split = float(np.linalg.norm(data.germ_factor.conj().T @ data.germ_factor - data.germ, 2))
        row.update({"g_norm": float(np.linalg.norm(data.correction, 2)), "g_over_s": ratio, "r_split": split})
        rows.append(row)
        if report.correction_vanishes and ratio > 1e-9:
            failures.append(f"G(theta) = {ratio:.3e} |S| at theta={theta} although G must vanish")
        if split > 1e-8 * float(np.linalg.norm(data.germ, 2)):
            failures.append(f"|R* R - S| = {split:.3e} at theta={theta}")

    worst = max(r["g_over_s"] for r in rows)
    logger.info(MSG["regime"], worst, "vanishing" if worst <= 1e-9 else "generic")
    _writer(out_dir).write_rows("germ.csv", rows)
    return failures


def cmd_rates(cfg, out_dir, pool):
    problem = build_problem(cfg)
    _, vanishing = correction_regime(problem)
    result = run_rate_experiment(problem, pool)
    failures = [f"sup error {r.sup_error:.3e} outside [0, 2]" for r in result.records
                if not (0.0 <= r.sup_error <= 2.0 + 1e-12)]
    for (tau, s), fit in sorted(result.fits.items()):
        logger.info(MSG["slope"], tau, s, format_slope(fit))
        expected, _ = predicted_exponents(s, problem.symbol.order, vanishing)
        if not fit.exact and fit.slope < expected - 0.15:
            failures.append(f"tau={tau} s={s}: slope {fit.slope:.3f} below {expected:.3f} - 0.15")
    failures.extend(tau_growth_violations(result))
    failures.extend(trivial_region_violations(problem, result))

    emit_results(result.records, out_dir, "rates", {
        "config_id": cfg.run.config_id,
        "seed": cfg.run.seed,
        "correction_vanishes": vanishing,
        "fits": fit_summary(result.fits),
    })
    return failures


def cmd_interp(cfg, out_dir, pool):
    problem = build_problem(cfg)
    rows, result = run_interpolation_experiment(problem, cfg.interp.s_list, pool)
    writer = _writer(out_dir)
    writer.write_rows("interp.csv", rows)
    emit_results(result.records, out_dir, "interp_rates", {
        "config_id": cfg.run.config_id,
        "seed": cfg.run.seed,
        "fits": fit_summary(result.fits),
    })
    return [f"s={r.s} tau={r.tau}: observed {r.observed_eps_exponent:.3f} vs predicted "
            f"{r.predicted_eps_exponent:.3f}" for r in rows if not r.passed]


def cmd_threshold(cfg, out_dir, pool):
    problem = build_problem(cfg)
    window = problem.window
    problem.assembler.verify_gap(window)
    p = problem.symbol.order
    ladder = geometric_ladder(window.t0, cfg.threshold.t_ratio, cfg.threshold.t_count)

    taus = cfg.rates.taus
    rows, failures = [], []
    for theta in sample_directions(problem.lattice.dimension, cfg.threshold.directions):
        rep = threshold_residual(problem.assembler, problem.fiber_cell, problem.fiber_eff, window, theta, ladder,
                                 taus=taus)
        for rung in rep.rungs:
            row = {f"theta{i}": float(t) for i, t in enumerate(theta)}
            data = asdict(rung)
            j_norms = data.pop("j_norms")
            row.update(data)
            for tau in taus:
                row[f"j_tau{tau:g}"] = j_norms[float(tau)]
                row[f"j_bound_tau{tau:g}"] = rung.j_bound(tau)
                if j_norms[float(tau)] > rung.j_bound(tau) * (1.0 + 1e-9) + 1e-14:
                    failures.append(f"|J| = {j_norms[float(tau)]:.3e} above its bound {rung.j_bound(tau):.3e} "
                                    f"at t={rung.t:.3e}, tau={tau:g}")
            rows.append(row)
        checks = [
            (rep.projection_fit, 1.0 - 0.1, "|F - P|"),
            (rep.projection_fit, p - 0.2, "|F - P| (order p)"),
            (rep.residual_fit_without_g, 2 * p + 1 - 0.2, "|AF - t^2p SP|"),
            (rep.residual_fit_with_g, 2 * p + 2 - 0.3, "|AF - t^2p SP - t^(2p+1) GP|"),
        ]
        for fit, minimum, label in checks:
            logger.info("[Threshold] theta=%s %s slope %s", theta, label, format_slope(fit))
            if not fit.exact and fit.slope < minimum:
                failures.append(f"{label} slope {fit.slope:.3f} < {minimum:.2f} at theta={theta}")
        if rep.germ_ratio_error > 0.01:
            failures.append(f"lambda_1/t^2p misses gamma_1 by {100 * rep.germ_ratio_error:.2f}% at theta={theta}")
        for eps in cfg.eps_ladder():
            for rung in rep.rungs:
                bound = projection_removal_bound(problem.fiber_freq, rung.t * theta, eps)
                if bound > eps / problem.lattice.inradius * (1 + 1e-12):
                    failures.append(f"|R0^(1/2)(I - P)| = {bound:.3e} exceeds eps/r0 at t={rung.t:.3e}, eps={eps}")

    _writer(out_dir).write_rows("threshold.csv", rows)
    return failures


def cmd_evolve(cfg, out_dir, pool):
    problem = build_problem(cfg)
    _, vanishing = correction_regime(problem)
    spec = cfg.evolution
    ladder = run_evolution_ladder(problem.assembler, problem.fiber_eff.g0, spec,
                                  cfg.brillouin.resolution, vanishing, pool)

    failures = []
    for r in ladder.results:
        if spec.forcing == "zero" and abs(r.norm_u_eps - r.norm_phi) > 1e-8 * r.norm_phi:
            failures.append(f"eps={r.eps}: |u_eps| = {r.norm_u_eps:.12g} != |phi| = {r.norm_phi:.12g}")
    if ladder.fit is not None:
        logger.info("[Evolve] eps-exponent %s", format_slope(ladder.fit))
        if vanishing and spec.profile == "gaussian" and not ladder.fit.exact and ladder.fit.slope < 1.8:
            failures.append(f"eps-exponent {ladder.fit.slope:.3f} below 1.8")

    writer = _writer(out_dir)
    rows = [{k: v for k, v in asdict(r).items() if k != "field"} for r in ladder.results]
    writer.write_rows("evolve.csv", rows)
    for r in ladder.results:
        if r.field is not None:
            writer.write_rows(f"field_eps{r.eps:g}.csv", [
                {"x": x, "re_u_eps": a.real, "im_u_eps": a.imag, "re_u_hom": b.real, "im_u_hom": b.imag}
                for x, a, b in zip(r.field.x, r.field.u_eps[:, 0], r.field.u_hom[:, 0])
            ])
    writer.write_summary("evolve_summary.json", {
        "config_id": cfg.run.config_id,
        "correction_vanishes": vanishing,
        "fit": ladder.fit,
    })
    return failures


HANDLERS = {
    "validate": cmd_validate,
    "cell": cmd_cell,
    "germ": cmd_germ,
    "rates": cmd_rates,
    "interp": cmd_interp,
    "threshold": cmd_threshold,
    "evolve": cmd_evolve,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="homogenize", description=f"{config.APP_NAME} v{config.APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in HANDLERS:
        cmd = sub.add_parser(name, help=COMMANDS[name])
        cmd.add_argument("--config", required=True, help=ARGS["config"])
        cmd.add_argument("--out", default=None, help=ARGS["out"])
        cmd.add_argument("--threads", type=int, default=None, help=ARGS["threads"])
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    errors = validate_config()
    if errors:
        logger.error(MSG["config_errors"])
        for e in errors:
            logger.error(f"Config error: {e}")
        return 2

    try:
        cfg = load_experiment_config(args.config)
        out_dir = Path(args.out or cfg.run.out_dir or config.OUTPUT_DIR)
        threads = args.threads or cfg.run.threads
        logger.info(MSG["starting"], config.APP_NAME, config.APP_VERSION, args.command)
        with WorkerPool(threads) as pool:
            failures = HANDLERS[args.command](cfg, out_dir, pool)
    except HomogError as e:
        logger.error(MSG["homog_error"], type(e).__name__, e)
        return 2
    except Exception:
        logger.exception("Unexpected failure in %s", args.command)
        return 2

    for f in failures:
        logger.error(MSG["invariant_failed"], f)
    if failures:
        logger.error(MSG["failed"], len(failures))
        return 1
    logger.info(MSG["done"], args.command)
    return 0


if __name__ == "__main__":
    sys.exit(main())
