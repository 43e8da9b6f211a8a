"""Command line interface: ``plasmafb {solve,verify,oracle-compare,weiss,blowup}``.

Exit codes: 0 success, 2 configuration or input error, 3 solver failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import freeboundary as fb
from .config import RunConfig, load_config
from .errors import (
    ConfigurationError,
    OracleError,
    PlasmaFBError,
    SolverError,
)
from .grid import build_grid
from .io import (
    atomic_write,
    read_field_csv,
    svg_curves,
    svg_heatmap,
    write_field_csv,
    write_json,
    write_pgm,
    write_table_csv,
)
from .solver import continuation_solve
from .verify import (
    homogeneity_radii,
    oracle_compare,
    verify_field,
    weiss_radii,
    weiss_vertices,
)
from .weiss import homogeneity_test, monotonicity_report

__all__ = ["main", "run_solve", "run_verify", "run_oracle_compare"]

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4

log = logging.getLogger("plasmafb")


def prepare_out(out: str | Path, force: bool) -> Path:
    """Create the output directory; an existing one needs ``force``."""
    out = Path(out)
    if out.exists():
        if not force:
            raise ConfigurationError(f"output directory {out} exists (use --force)")
        if not out.is_dir():
            raise ConfigurationError(f"{out} exists and is not a directory")
    else:
        out.mkdir(parents=True)
    return out


def _weiss_svg(report) -> str:
    series = [(f"vertex {p['vertex']}", np.array(p["radii"]), np.array(p["psi"]))
              for p in report.tables.get("weiss", [])]
    return svg_curves(series, "r", "psi(r)")


def write_solution(out: Path, grid, u, config: RunConfig, trace, report) -> None:
    write_field_csv(grid, u, out / "u.csv")
    write_table_csv(trace.rows(), out / "trace.csv")
    payload = {"config": config.as_dict(), "report": report.as_dict()}
    write_json(payload, out / "report.json")
    curve = fb.extract_free_boundary(grid, u)
    atomic_write(out / "u.svg", svg_heatmap(grid, u, curve.segments))
    atomic_write(out / "weiss.svg", _weiss_svg(report))


def run_solve(config: RunConfig, out: Path):
    """Solve, verify and write the five artifacts; returns the report."""
    grid = build_grid(config.shape, config.extent, config.n)
    try:
        u, trace = continuation_solve(config.problem(), grid)
    except SolverError as exc:
        partial = getattr(exc, "trace", None)
        if partial is not None and partial.records:
            write_table_csv(partial.rows(), out / "trace.csv")
        raise
    report = verify_field(grid, u, config, trace)
    write_solution(out, grid, u, config, trace, report)
    return report


def run_verify(config: RunConfig, field_path: Path, out: Path):
    grid = build_grid(config.shape, config.extent, config.n)
    u = read_field_csv(grid, field_path)
    report = verify_field(grid, u, config)
    write_json({"config": config.as_dict(), "report": report.as_dict()}, out / "report.json")
    return report


def run_oracle_compare(config: RunConfig, out: Path) -> dict:
    result = oracle_compare(config)
    write_json(result, out / "oracle.json")
    return result


def _load_field(config: RunConfig, field_path):
    grid = build_grid(config.shape, config.extent, config.n)
    if field_path is None:
        u, _ = continuation_solve(config.problem(), grid)
    else:
        u = read_field_csv(grid, field_path)
    return grid, u


def run_weiss(config: RunConfig, field_path, out: Path) -> bool:
    grid, u = _load_field(config, field_path)
    curve = fb.extract_free_boundary(grid, u)
    delta0 = fb.boundary_gap(grid, curve)
    radii = weiss_radii(grid, delta0)
    if radii.size < 2:
        raise ConfigurationError("fewer than two admissible Weiss radii; refine the grid")
    profiles = []
    for vid in weiss_vertices(curve, config.weiss_vertices):
        prof = monotonicity_report(grid, u, curve.vertices[vid], radii, p=config.p,
                                   c_slack=config.c_slack)
        d = prof.as_dict()
        d["vertex"] = vid
        profiles.append(d)
    passed = all(p["passed"] for p in profiles)
    write_json({"delta0": delta0, "c_slack": config.c_slack, "profiles": profiles,
                "passed": passed}, out / "weiss.json")
    series = [(f"vertex {p['vertex']}", np.array(p["radii"]), np.array(p["psi"]))
              for p in profiles]
    atomic_write(out / "weiss.svg", svg_curves(series, "r", "psi(r)"))
    return passed


def run_blowup(config: RunConfig, field_path, out: Path, vertex: int, r: float | None) -> bool:
    grid, u = _load_field(config, field_path)
    curve = fb.extract_free_boundary(grid, u)
    delta0 = fb.boundary_gap(grid, curve)
    if not 0 <= vertex < len(curve.vertices):
        raise ConfigurationError(f"vertex must lie in [0, {len(curve.vertices)})")
    x0 = curve.vertices[vertex]
    eps_floor = config.schedule(grid.h).eps_min
    radii = homogeneity_radii(grid, delta0, eps_floor)
    if r is None:
        r = config.blowup_r if config.blowup_r > 0 else float(radii[-1] if radii.size else 0.5 * delta0)
    b = fb.blow_up(grid, u, x0, r, config.blowup_m)
    devs = [homogeneity_test(fb.blow_up(grid, u, x0, rr, config.blowup_m)) for rr in radii]
    flat = fb.flatness_profile(grid, u, x0, radii) if radii.size else []
    decreasing = bool(np.all(np.diff(devs) < 0.0))
    write_pgm(b.w, out / "blowup.pgm")
    write_json({"vertex": vertex, "x0": x0.tolist(), "r": r, "m": config.blowup_m,
                "w_max_abs": float(np.abs(b.w).max()), "radii": radii.tolist(),
                "homogeneity": devs, "homogeneity_decreasing": decreasing,
                "flatness": flat}, out / "blowup.json")
    return decreasing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plasmafb", description="Plasma free boundary solver and verification suite."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, field=False):
        sp.add_argument("--config", type=Path, help="key = value configuration file")
        sp.add_argument("--out", type=Path, required=True, help="output directory")
        sp.add_argument("--force", action="store_true", help="reuse an existing output directory")
        sp.add_argument("--n", type=int, help="override grid size")
        sp.add_argument("--p", type=float, help="override exponent")
        if field:
            sp.add_argument("--field", type=Path, help="field CSV written by 'solve'")

    common(sub.add_parser("solve", help="continuation solve, verify, write artifacts"))
    sp = sub.add_parser("verify", help="run the verification suite on a stored field")
    common(sp)
    sp.add_argument("--field", type=Path, required=True, help="field CSV written by 'solve'")
    common(sub.add_parser("oracle-compare", help="compare with the radial shooting oracle"))
    common(sub.add_parser("weiss", help="Weiss density profiles at free boundary vertices"),
           field=True)
    sp = sub.add_parser("blowup", help="blow-up and homogeneity at a free boundary vertex")
    common(sp, field=True)
    sp.add_argument("--vertex", type=int, default=0, help="contour vertex id")
    sp.add_argument("--r", type=float, help="blow-up radius")
    return parser


def _dispatch(args) -> int:
    config = load_config(args.config, n=args.n, p=args.p)
    out = prepare_out(args.out, args.force)
    if args.command == "solve":
        report = run_solve(config, out)
        return EXIT_OK if report.passed else EXIT_VERIFY
    if args.command == "verify":
        report = run_verify(config, args.field, out)
        return EXIT_OK if report.passed else EXIT_VERIFY
    if args.command == "oracle-compare":
        result = run_oracle_compare(config, out)
        ok = result["linf"] <= 0.02 and result["radius_discrepancy"] <= 2.0 * result["h"]
        return EXIT_OK if ok else EXIT_VERIFY
    if args.command == "weiss":
        return EXIT_OK if run_weiss(config, args.field, out) else EXIT_VERIFY
    if args.command == "blowup":
        return EXIT_OK if run_blowup(config, args.field, out, args.vertex, args.r) else EXIT_VERIFY
    raise ConfigurationError(f"unknown command {args.command}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (SolverError, OracleError) as exc:
        print(f"plasmafb: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (PlasmaFBError, OSError) as exc:
        print(f"plasmafb: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
