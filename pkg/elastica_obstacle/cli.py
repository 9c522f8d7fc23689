"""Command-line front end.

Subcommands: curve, solve, threshold, hbound, sweep, figures. Each writes its
data files and a manifest.json into --out and returns an exit code:
0 success, 2 configuration error, 3 assumption violation, 4 non-convergence.
"""
import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from . import __version__, curves, diagnostics, gentrig, plotting, reports, solver
from .config import RunConfig
from .energy import ShapeFunction
from .exceptions import (
    AssumptionViolation,
    ConfigError,
    DomainError,
    InfeasibleIterateError,
    SlopeBlowupError,
    ThresholdError,
    UnsupportedObstacleError,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3
EXIT_NOT_CONVERGED = 4

FIGURE_POWERS = (2.0, 5.0)
FIGURE_FRACTIONS = (0.2, 0.4, 0.6, 0.8)


def configure_logging() -> None:
    """Log to <ELASTICA_LOG_DIR>/elastica_obstacle.log and to the console."""
    log_dir = os.getenv("ELASTICA_LOG_DIR", os.path.join(os.path.dirname(os.path.dirname(__file__)), "logs"))
    os.makedirs(log_dir, exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, os.getenv("LOG_LEVEL", "INFO").upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[
            logging.FileHandler(os.path.join(log_dir, "elastica_obstacle.log")),
            logging.StreamHandler(),
        ],
    )


def _path(config: RunConfig, name: str) -> str:
    return os.path.join(config.out, name)


def _label(value: float) -> str:
    return f"{value:g}".replace(".", "_")


# ========== CURVE ==========

def u0_profile_frame(powers: Sequence[float] = FIGURE_POWERS, points: int = 401) -> pd.DataFrame:
    x = np.linspace(0.0, 1.0, points)
    data: Dict[str, np.ndarray] = {"x": x}
    for p in powers:
        data[f"U0_p{_label(p)}"] = np.asarray(curves.profile_U0(ShapeFunction.eu_p(p), x))
    return pd.DataFrame(data)


def cmd_curve(config: RunConfig) -> Tuple[int, List[str], Dict[str, Any]]:
    curve = curves.sample_curve(config.p, config.lam, config.samples)
    frame = curve.to_frame()
    outputs = [reports.write_csv(frame, _path(config, "curve.csv"))]
    profiles = u0_profile_frame()
    outputs.append(reports.write_csv(profiles, _path(config, "u0_profile.csv")))
    if config.fmt == "json":
        outputs.append(reports.write_json({"curve": frame.to_dict(orient="list")}, _path(config, "curve.json")))
    if config.fmt == "svg" or config.figures:
        outputs.append(plotting.plot_curve(frame, _path(config, "curve.svg"), f"p={config.p:g}, lambda={config.lam:g}"))
        outputs.append(_figure1(profiles, _path(config, "figure1.svg")))
    summary = {
        "half_period": curve.half_period,
        "total_length": curve.length,
        "endpoint": [float(curve.X[-1]), float(curve.Y[-1])],
    }
    print(f"✅ Curve p={config.p:g}, lambda={config.lam:g}: total length {curve.length:.10f}")
    return EXIT_OK, outputs, summary


def _figure1(profiles: pd.DataFrame, path: str) -> str:
    columns = {c.replace("U0_p", "p = ").replace("_", "."): profiles[c].to_numpy() for c in profiles.columns[1:]}
    return plotting.plot_profiles(profiles["x"].to_numpy(), columns, path, "U_0 for G = EU_p")


# ========== SOLVE ==========

def cone_family_frame(p: float, N: int, fractions: Sequence[float] = FIGURE_FRACTIONS) -> pd.DataFrame:
    """Exact cone minimizers at heights fraction * h_*(p) on the N-cell grid."""
    threshold = curves.h_star(p)
    data: Dict[str, np.ndarray] = {"x": np.linspace(0.0, 1.0, N + 1)}
    for fraction in fractions:
        h = fraction * threshold
        data[f"u_h{_label(fraction)}"] = curves.exact_cone_minimizer(p, h).on_grid(N).values
        data[f"psi_h{_label(fraction)}"] = solver.Obstacle.symmetric_cone(h).nodal(N)
    return pd.DataFrame(data)


def _cone_figures(config: RunConfig, N: int) -> List[str]:
    outputs = []
    for p in FIGURE_POWERS:
        frame = cone_family_frame(p, N)
        outputs.append(reports.write_csv(frame, _path(config, f"cones_p{_label(p)}.csv")))
        x = frame["x"].to_numpy()
        profiles = {c: frame[c].to_numpy() for c in frame.columns if c.startswith("u_")}
        obstacles = {c: frame[c].to_numpy() for c in frame.columns if c.startswith("psi_")}
        outputs.append(
            plotting.plot_profiles(
                x, profiles, _path(config, f"figure_cones_p{_label(p)}.svg"),
                f"Cone obstacles and minimizers, p = {p:g}", obstacles,
            )
        )
    return outputs


def cmd_solve(config: RunConfig) -> Tuple[int, List[str], Dict[str, Any]]:
    G = config.shape_function()
    psi = config.obstacle()
    psi.check_assumption()
    outputs: List[str] = []

    if psi.kind == "symmetric_cone" and G.is_eu_p:
        verdict = solver.threshold_verdict(config.p, psi)
        if verdict.verdict == "no_minimizer" and not config.force:
            data = dict(verdict._asdict(), solved=False, reason="cone height at or above h_*; pass --force to solve")
            outputs.append(reports.write_json(data, _path(config, "verdict.json")))
            print(f"⚠️  h = {verdict.height:g} >= h_* = {verdict.h_star:.10f}: no minimizer, solve skipped")
            return EXIT_ASSUMPTION, outputs, {"verdict": verdict.verdict}

    report = solver.minimize(G, config.p, psi, config.solver_options())
    u = report.minimizer
    frame = u.to_frame()
    frame["psi"] = report.psi
    frame["mu"] = report.multipliers
    outputs.append(reports.write_csv(frame, _path(config, "minimizer.csv")))

    diag = diagnostics.run_diagnostics(G, config.p, u, psi, report.coincidence_nodes)
    payload = report.to_dict()
    summary: Dict[str, Any] = {
        "energy": report.energy,
        "kkt_residual": report.kkt_residual,
        "converged": report.converged,
    }
    if config.with_exact:
        if psi.kind != "symmetric_cone" or not G.is_eu_p:
            raise UnsupportedObstacleError("--with-exact needs G = eu_p and a symmetric cone")
        exact = curves.exact_cone_minimizer(config.p, psi.height)
        exact_grid = exact.on_grid(u.N)
        gap = float(np.max(np.abs(u.values - exact_grid.values)))
        exact_frame = exact_grid.to_frame()
        outputs.append(reports.write_csv(exact_frame, _path(config, "exact.csv")))
        payload["exact_energy"] = exact.energy
        payload["sup_gap"] = gap
        payload["energy_gap"] = abs(report.energy - exact.energy) / exact.energy
        summary["sup_gap"] = gap
        summary["energy_gap"] = payload["energy_gap"]
    outputs.append(reports.write_json(payload, _path(config, "report.json")))
    outputs.append(reports.write_json(diag.to_dict(), _path(config, "diagnostics.json")))
    if config.figures or config.fmt == "svg":
        outputs.extend(_cone_figures(config, u.N))
        outputs.append(
            plotting.plot_profiles(u.x, {"u": u.values}, _path(config, "minimizer.svg"),
                                   f"Minimizer, p = {config.p:g}", {"psi": report.psi})
        )

    print(reports.format_report_text({k: v for k, v in payload.items() if k != "verdicts"}, "SOLVE REPORT"))
    if not report.converged:
        print(f"❌ Not converged: KKT residual {report.kkt_residual:.3e} >= {config.tol:.1e}")
        return EXIT_NOT_CONVERGED, outputs, summary
    print(f"✅ Converged: energy {report.energy:.10f}, KKT residual {report.kkt_residual:.3e}")
    return EXIT_OK, outputs, summary


# ========== THRESHOLD / HBOUND / SWEEP ==========

def threshold_row(p: float) -> Dict[str, float]:
    x_end, y_end = curves.endpoint_constants(p)
    threshold = curves.h_star(p)
    params = curves.trig_params(p)
    beta_check = gentrig.beta_formula_discrepancy(params)
    return {
        "p": p,
        "p_conj": curves.conjugate(p),
        "c_p": curves.c_p_eu(p),
        "h_star": threshold,
        "X1_L1": x_end,
        "Y1_L1": y_end,
        "ratio": y_end / x_end,
        "ratio_minus_2h_star": y_end / x_end - 2.0 * threshold,
        "pi_quadrature": beta_check["quadrature"],
        "pi_beta": beta_check["beta_substituted"],
        "pi_printed_error": beta_check["printed_error"],
    }


def cmd_threshold(config: RunConfig) -> Tuple[int, List[str], Dict[str, Any]]:
    row = threshold_row(config.p)
    frame = pd.DataFrame([row])
    outputs = [reports.write_csv(frame, _path(config, "threshold.csv"))]
    if config.fmt == "json":
        outputs.append(reports.write_json(row, _path(config, "threshold.json")))
    print(reports.format_report_text(row, f"THRESHOLD p = {config.p:g}"))
    return EXIT_OK, outputs, {"h_star": row["h_star"], "c_p": row["c_p"]}


def cmd_hbound(config: RunConfig) -> Tuple[int, List[str], Dict[str, Any]]:
    G = config.shape_function()
    table = solver.hbound_table(G, config.p)
    outputs = [reports.write_csv(table, _path(config, "hbound.csv"))]
    bound = 0.5 * float(table["H"].max())
    if config.fmt == "svg" or config.figures:
        outputs.append(plotting.plot_table(table, "A", ["H"], _path(config, "hbound.svg"), f"H(A), p = {config.p:g}", True))
    limit = float(table["H"].iloc[-1])
    print(f"✅ H(A) for {G.name}: limit {limit:.10f}, nonexistence bound {bound:.10f}")
    return EXIT_OK, outputs, {"limit": limit, "bound": bound}


def sweep_cell(p: float, h: float, out_dir: str) -> Dict[str, Any]:
    verdict = solver.threshold_verdict(p, solver.Obstacle.symmetric_cone(h))
    cell = {"p": p, "h": h, "h_star": verdict.h_star, "verdict": verdict.verdict,
            "exists": "yes" if verdict.verdict == "exists_unique" else "no"}
    reports.write_json(cell, os.path.join(out_dir, f"cell_p{_label(p)}_h{_label(h)}.json"))
    return cell


def cmd_sweep(config: RunConfig) -> Tuple[int, List[str], Dict[str, Any]]:
    cell_dir = _path(config, "sweep")
    jobs = [(p, h) for p in config.p_list for h in config.h_list]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        cells = list(pool.map(lambda job: sweep_cell(job[0], job[1], cell_dir), jobs))
    matrix = pd.DataFrame(cells).pivot(index="p", columns="h", values="exists")
    matrix.columns = [f"h={h:g}" for h in matrix.columns]
    matrix = matrix.reset_index()
    outputs = [reports.write_csv(matrix, _path(config, "sweep.csv"))]
    outputs.extend(os.path.join(cell_dir, f"cell_p{_label(c['p'])}_h{_label(c['h'])}.json") for c in cells)
    print(f"✅ Sweep of {len(cells)} cells written to {cell_dir}")
    return EXIT_OK, outputs, {"cells": len(cells)}


def cmd_figures(config: RunConfig) -> Tuple[int, List[str], Dict[str, Any]]:
    profiles = u0_profile_frame()
    outputs = [reports.write_csv(profiles, _path(config, "u0_profile.csv")),
               _figure1(profiles, _path(config, "figure1.svg"))]
    outputs.extend(_cone_figures(config, config.N))
    peaks = {c: float(profiles[c].max()) for c in profiles.columns[1:]}
    print(f"✅ Figures regenerated in {config.out}")
    return EXIT_OK, outputs, {"u0_peaks": peaks}


COMMANDS: Dict[str, Callable[[RunConfig], Tuple[int, List[str], Dict[str, Any]]]] = {
    "curve": cmd_curve,
    "solve": cmd_solve,
    "threshold": cmd_threshold,
    "hbound": cmd_hbound,
    "sweep": cmd_sweep,
    "figures": cmd_figures,
}


# ========== ARGUMENTS ==========

def _float_list(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers, got '{text}'") from e


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", type=float, help="Energy exponent p > 1")
    common.add_argument("--G", dest="G", help="Shape function: eu_p (default) or tanh")
    common.add_argument("--lambda", dest="lam", type=float, help="Curve scale lambda > 0")
    common.add_argument("--samples", type=int, help="Curve samples per half period")
    common.add_argument("--height", type=float, help="Obstacle height psi(1/2)")
    common.add_argument("--theta", type=float, help="Cone tip position (non-symmetric cones)")
    common.add_argument(
        "--obstacle", dest="obstacle_kind", choices=["symmetric_cone", "cone", "sampled"], help="Obstacle kind"
    )
    common.add_argument("--obstacle-file", dest="obstacle_file", help="x,psi CSV for a sampled obstacle")
    common.add_argument("--grid", dest="N", type=int, help="Grid cells N")
    common.add_argument("--tol", type=float, help="KKT tolerance")
    common.add_argument("--max-iter", dest="max_iter", type=int, help="Iteration cap per stage")
    common.add_argument("--method", choices=["lbfgsb", "projected-gradient"], help="Solver method")
    common.add_argument("--symmetric", action="store_true", default=None, help="Minimize over symmetric functions")
    common.add_argument("--with-exact", dest="with_exact", action="store_true", default=None,
                        help="Compare with the exact cone minimizer")
    common.add_argument("--force", action="store_true", default=None, help="Solve even above the threshold")
    common.add_argument("--figures", action="store_true", default=None, help="Also write SVG figures")
    common.add_argument("--p-list", dest="p_list", type=_float_list, help="Sweep exponents, comma separated")
    common.add_argument("--h-list", dest="h_list", type=_float_list, help="Sweep heights, comma separated")
    common.add_argument("--out", help="Output directory")
    common.add_argument("--format", dest="fmt", choices=["csv", "json", "svg"], help="Extra output format")
    common.add_argument("--config", dest="config_file", help="key=value run config file")

    parser = argparse.ArgumentParser(
        prog="elastica-obstacle",
        description="Obstacle problems for the p-elastic energy of graphs",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Sample the free p-elastica and the U_0 profiles
  elastica-obstacle curve --p 2 --lambda 1 --out results/curve

  # Solve a symmetric cone obstacle and compare with the exact minimizer
  elastica-obstacle solve --p 2 --height 0.4 --grid 512 --symmetric --with-exact

  # Threshold constants, H(A) bound and an existence sweep
  elastica-obstacle threshold --p 3
  elastica-obstacle hbound --p 2
  elastica-obstacle sweep --p-list 1.5,2,3 --h-list 0.5,1.0
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} command")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    configure_logging()

    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config_file")}
    try:
        config = RunConfig.from_sources(args.command, overrides, args.config_file)
        os.makedirs(config.out, exist_ok=True)
        code, outputs, summary = COMMANDS[args.command](config)
        outputs.append(reports.write_manifest(config.out, args.command, config.resolved(), outputs, summary))
        return code
    except (ConfigError, DomainError) as e:
        logger.error(f"Configuration error: {e}", exc_info=True)
        print(f"❌ {e}")
        return EXIT_CONFIG
    except (AssumptionViolation, UnsupportedObstacleError, SlopeBlowupError, ThresholdError) as e:
        logger.error(f"Assumption violated: {e}", exc_info=True)
        print(f"❌ {e}")
        return EXIT_ASSUMPTION
    except InfeasibleIterateError as e:
        logger.error(f"Solver left the feasible set: {e}", exc_info=True)
        print(f"❌ {e}")
        return EXIT_NOT_CONVERGED


def cli_main() -> None:
    """Console script entry point."""
    sys.exit(main())


if __name__ == "__main__":
    cli_main()
