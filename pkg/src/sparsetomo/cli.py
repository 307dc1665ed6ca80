"""Command-line entry point.

Subcommands cover the whole pipeline: phantom generation, source-condition
construction and verification, the decay-rate experiments, the p -> 1 study,
and the cross-strategy comparison.  Each run writes its results as CSV (and
SVG where a figure makes sense) plus a JSON manifest listing every output,
the full config snapshot, and the seeds, so any run can be reproduced from
its manifest alone.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    Settings,
    build_experiment,
    build_phantom,
    build_solver,
    build_transform,
    compare_configs,
    gamma_params,
    load_config,
    sc_build_params,
    sc_verify_params,
)
from .experiments import (
    fit_from_records,
    gamma_convergence_study,
    compare_regularizers,
    n_grid,
    pilot_c_alpha,
    run_decay_experiment,
    summarize_decay,
)
from .io import (
    finite_or_none,
    write_decay_csv,
    write_json,
    write_pgm,
    write_raw_f64,
    write_rows_csv,
    write_summary_csv,
)
from .radon import refined_operator
from .solvers import SolverError
from .source_condition import build_strong_sc_phantom, verify_approx_sc
from .svgplot import Series, anchored_slope_series, loglog_svg, monomial_series, save_svg

log = logging.getLogger("sparsetomo")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

THEORETICAL_EXPONENT = {"fixed_noise": -1.0 / 3.0, "decreasing_noise": -1.0}


@dataclass
class RunManifest:
    """Reproducibility sidecar written next to every command's outputs."""

    command: str
    config_path: str
    config_snapshot: dict
    version: str
    master_seed: int
    started_utc: str
    finished_utc: str = ""
    outputs: list[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def add_output(self, path) -> str:
        self.outputs.append(str(path))
        return str(path)

    def write(self, path):
        self.finished_utc = _utc_now()
        payload = asdict(self)
        payload["outputs"] = sorted(payload["outputs"])
        write_json(path, payload)


def _utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _start_manifest(args, sections, command) -> RunManifest:
    seed = args.seed
    if seed is None:
        seed = int(sections.get("experiment", {}).get("master_seed", 0) or 0)
    return RunManifest(
        command=command,
        config_path=str(args.config),
        config_snapshot=sections,
        version=__version__,
        master_seed=seed,
        started_utc=_utc_now(),
    )


def _resolve_c_alpha(cfg, f_dag):
    """Run the pilot search when the config leaves c_alpha open."""
    if cfg.c_alpha is not None:
        return cfg, "config"
    picked = pilot_c_alpha(cfg, f_dag)
    log.info("pilot search selected c_alpha = %g", picked)
    return replace(cfg, c_alpha=picked), "pilot"


# ------------------------------------------------------------ subcommands


def cmd_phantom(args, st, manifest, out):
    img = build_phantom(st)
    write_raw_f64(manifest.add_output(out / "phantom.raw_f64"), img)
    write_pgm(manifest.add_output(out / "phantom.pgm"), img)
    manifest.details.update(
        side=img.side,
        min=float(img.values.min()),
        max=float(img.values.max()),
        mean=float(img.values.mean()),
        nonzero=int(np.count_nonzero(img.values)),
    )
    log.info("phantom side=%d range=[%g, %g]", img.side,
             manifest.details["min"], manifest.details["max"])


def cmd_sc_build(args, st, manifest, out):
    f0 = build_phantom(st)
    p, alpha_sc = sc_build_params(st)
    wavelet = build_transform(st)
    refined = refined_operator(st.geo("side"), None, st.geo("n_ref"))
    f_dag, element = build_strong_sc_phantom(f0, p, alpha_sc, refined, wavelet,
                                             build_solver(st))
    write_raw_f64(manifest.add_output(out / "sc_phantom.raw_f64"), f_dag)
    write_pgm(manifest.add_output(out / "sc_phantom.pgm"), f_dag)
    np.ascontiguousarray(element.w, dtype="<f8").tofile(
        manifest.add_output(out / "sc_certificate.raw_f64"))
    write_rows_csv(manifest.add_output(out / "sc_report.csv"),
                   ("p", "alpha_sc", "n_ref", "side", "residual_rel"),
                   [(p, alpha_sc, st.geo("n_ref"), f_dag.side, element.residual_rel)])
    manifest.details.update(p=p, alpha_sc=alpha_sc,
                            residual_rel=element.residual_rel)
    log.info("strong source condition residual_rel = %.4g", element.residual_rel)


def cmd_sc_verify(args, st, manifest, out):
    f_dag = build_phantom(st)
    # the verification has no noise regime; any placeholder gives the N grid
    cfg = build_experiment(st, seed_override=args.seed, default_regime="fixed_noise")
    beta, k = sc_verify_params(st)
    report = verify_approx_sc(f_dag, cfg.transform, cfg.p, beta, n_grid(cfg),
                              k, cfg.master_seed, cfg.solver)
    report.to_csv(manifest.add_output(out / "approx_sc.csv"))
    means = Series("mean reachability", np.array(report.N_values, float),
                   np.array(report.means))
    fitted = monomial_series(
        means.x, float(np.exp(np.mean(np.log(report.means))
                              - report.fitted_exponent * np.mean(np.log(means.x)))),
        report.fitted_exponent, f"fit slope {report.fitted_exponent:.3f}")
    theory = anchored_slope_series(means.x, float(report.means[0]),
                                   report.target_exponent,
                                   f"reference slope {report.target_exponent:g}")
    save_svg(manifest.add_output(out / "approx_sc.svg"),
             loglog_svg([means, fitted, theory], title="Approximate source condition",
                        xlabel="N", ylabel="reachability functional"))
    manifest.details.update(beta=beta, k=k, p=cfg.p,
                            fitted_exponent=report.fitted_exponent,
                            target_exponent=report.target_exponent)
    log.info("reachability decay: fitted %.4f (target %.4f)",
             report.fitted_exponent, report.target_exponent)


def cmd_decay(args, st, manifest, out):
    f_dag = build_phantom(st)
    cfg = build_experiment(st, seed_override=args.seed)
    cfg, c_source = _resolve_c_alpha(cfg, f_dag)
    manifest.details.update(c_alpha=cfg.c_alpha, c_alpha_source=c_source)
    records = run_decay_experiment(cfg, f_dag, jobs=args.jobs)
    try:
        fit = fit_from_records(records)
    except ValueError as exc:
        raise SolverError(f"no fittable decay curve: {exc}") from None
    rows = summarize_decay(records)
    theory = THEORETICAL_EXPONENT[cfg.regime]

    write_decay_csv(manifest.add_output(out / "decay.csv"), records)
    write_summary_csv(manifest.add_output(out / "decay_summary.csv"), rows,
                      fit=fit, theoretical_exp=theory)
    ok = [r for r in rows if r.n_ok > 0]
    x = np.array([r.N for r in ok], float)
    mean = np.array([r.mean_bregman for r in ok])
    std = np.array([r.std_bregman for r in ok])
    curves = [
        Series("mean Bregman distance", x, mean,
               band_lo=mean - std, band_hi=mean + std),
        monomial_series(x, fit.c, fit.beta_exp,
                        f"fit slope {fit.beta_exp:.3f}"),
        anchored_slope_series(x, float(mean[0]), theory,
                              f"reference slope {theory:g}"),
    ]
    save_svg(manifest.add_output(out / "decay.svg"),
             loglog_svg(curves, title=f"{cfg.transform.kind}, p={cfg.p:g}, {cfg.regime}",
                        xlabel="N", ylabel="Bregman distance"))
    failed = sum(r.status == "failed" for r in records)
    manifest.details.update(
        regime=cfg.regime, p=cfg.p, transform=cfg.transform.kind,
        n_grid=[int(v) for v in n_grid(cfg)], K=cfg.K, failed_cells=failed,
        fitted_exponent=finite_or_none(fit.beta_exp),
        fitted_c=finite_or_none(fit.c),
        r_squared=finite_or_none(fit.r_squared),
        theoretical_exponent=theory,
    )
    log.info("decay fit: %.5g * N^%.4f (r^2 %.4f, theory %g, %d failed cells)",
             fit.c, fit.beta_exp, fit.r_squared, theory, failed)


def cmd_gamma(args, st, manifest, out):
    f_dag = build_phantom(st)
    cfg = build_experiment(st, seed_override=args.seed)
    p_list, shared_seed = gamma_params(st)
    cfg, c_source = _resolve_c_alpha(cfg, f_dag)
    manifest.details.update(c_alpha=cfg.c_alpha, c_alpha_source=c_source)
    rows = gamma_convergence_study(cfg, p_list, shared_seed, f_dag=f_dag)
    write_rows_csv(manifest.add_output(out / "gamma.csv"),
                   ("p", "rel_distance_to_p1"), rows)
    positive = [(p, d) for p, d in rows if d > 0 and p > 1]
    if positive:
        series = Series("distance to the p=1 solution",
                        np.array([p - 1.0 for p, _ in positive]),
                        np.array([d for _, d in positive]))
        save_svg(manifest.add_output(out / "gamma.svg"),
                 loglog_svg([series], title="p -> 1 solution convergence",
                            xlabel="p - 1", ylabel="relative distance"))
    manifest.details.update(shared_seed=shared_seed,
                            table=[[p, d] for p, d in rows])
    log.info("gamma distances: %s",
             ", ".join(f"p={p:g}: {d:.3e}" for p, d in rows))


def cmd_compare(args, st, manifest, out):
    f_dag = build_phantom(st)
    cfgs = compare_configs(st, seed_override=args.seed)
    resolved = []
    for cfg in cfgs:
        cfg, _ = _resolve_c_alpha(cfg, f_dag)
        resolved.append(cfg)
        manifest.details.setdefault("c_alpha", {})[
            f"{cfg.transform.kind}-p{cfg.p:g}"] = cfg.c_alpha
    result = compare_regularizers(resolved, f_dag=f_dag, jobs=args.jobs)
    write_rows_csv(manifest.add_output(out / "compare.csv"),
                   ("strategy", "N", "mean_rel_err_sq"), result.table)
    all_records = [r for lbl in result.labels for r in result.records[lbl]]
    write_decay_csv(manifest.add_output(out / "compare_records.csv"), all_records)
    curves = []
    for lbl in result.labels:
        pts = sorted((N, v) for l, N, v in result.table if l == lbl and v > 0)
        if pts:
            curves.append(Series(lbl, np.array([n for n, _ in pts], float),
                                 np.array([v for _, v in pts])))
    save_svg(manifest.add_output(out / "compare.svg"),
             loglog_svg(curves, title="Regularization strategies",
                        xlabel="N", ylabel="mean squared relative error"))
    manifest.details.update(best_at_n_max=result.best_at_n_max,
                            labels=list(result.labels))
    log.info("lowest error at N_max: %s", result.best_at_n_max)


COMMANDS = {
    "phantom": cmd_phantom,
    "sc-build": cmd_sc_build,
    "sc-verify": cmd_sc_verify,
    "decay": cmd_decay,
    "gamma": cmd_gamma,
    "compare": cmd_compare,
}


# ------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsetomo",
        description="Sparsity-regularized tomography experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        cmd = sub.add_parser(name, help=fn.__doc__)
        cmd.add_argument("--config", required=True, help="run configuration file")
        cmd.add_argument("--out", default=".", help="output directory (created if needed)")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the master seed")
        cmd.add_argument("--jobs", type=int, default=None,
                         help="worker processes (default: available parallelism)")
        cmd.add_argument("--desk-scale", action="store_true",
                         help="reduced geometry defaults for keys the config omits")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.jobs is None:
        count = getattr(os, "process_cpu_count", os.cpu_count)
        args.jobs = count() or 1
    try:
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
        if args.seed is not None and args.seed < 0:
            raise ConfigError(f"--seed must be >= 0, got {args.seed}")
        sections = load_config(args.config)
        st = Settings(sections, desk_scale=args.desk_scale)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        manifest = _start_manifest(args, sections, args.command)
        COMMANDS[args.command](args, st, manifest, out)
        manifest_path = out / f"{args.command.replace('-', '_')}_manifest.json"
        manifest.add_output(manifest_path)
        manifest.write(manifest_path)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except SolverError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
