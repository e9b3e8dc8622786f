"""Batch front-end: model ingestion, experiment orchestration, CSV emission.

Subcommands: bands, verify, sweep.  Exit codes: 0 ok; 1 usage or config
error; 2 no spectral gap; 3 invariant failure; 4 sweep degradation (more
than 5% of parameter points failed).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .config import SCHEMA_VERSION, RunConfig, load_config
from .errors import (
    ConfigurationError,
    EpsilonTooLargeError,
    InstabilityError,
    NoGapError,
    SuperblochError,
)
from .expansion import SGrid, build_expansion, recurrence_residuals, truncated_sum, truncation_defects
from .linalg import enclosing_contour
from .model import band_interval, band_table, driven_fiber_family, gap_certificate, uniform_k_grid
from .projector import deformed_projector, invariance_defect
from .transitions import loglog_fit, scaling_sweep, write_fits_csv, write_rows_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_GAP = 2
EXIT_INVARIANT = 3
EXIT_DEGRADED = 4

PN_IDEMPOTENCY_TOL = 1e-9
PN_HERMITICITY_TOL = 1e-10
PN_AGREEMENT_TOL = 1e-6


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _header(fh, config: RunConfig, schema: str):
    fh.write(f"# schema: {schema}\n")
    fh.write(f"# config: sha256:{config.hash}\n")


def reference_config_path() -> Path:
    """Path of the bundled reference (canonical acceptance) configuration."""
    return Path(__file__).parent / "data" / "reference.yaml"


def cmd_bands(config: RunConfig, out_dir: Path) -> int:
    """Band functions over the k grid and the gap certificate."""
    potential = config.make_potential()
    truncation = config.make_truncation()
    window = config.make_window()
    k_grid = uniform_k_grid(potential, config.k_points)
    table = band_table(potential, truncation, k_grid, config.n_bands)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        gap = gap_certificate(potential, window, k_grid, truncation,
                              min_gap=config.gap_min)
    except NoGapError as exc:
        print(f"no-gap: {exc}", file=sys.stderr)
        return EXIT_NO_GAP
    path = out_dir / "bands.csv"
    with open(path, "w", newline="") as fh:
        _header(fh, config, f"{SCHEMA_VERSION}/bands")
        fh.write(f"# gap: {_fmt(gap)}\n")
        writer = csv.writer(fh)
        writer.writerow(["k", "band", "energy"])
        for i, k in enumerate(k_grid):
            for b in range(table.shape[1]):
                writer.writerow([_fmt(float(k)), b, _fmt(float(table[i, b]))])
    lo, hi = band_interval(potential, truncation, window, k_grid)
    print(f"gap d = {gap:.10g}; selected band interval [{lo:.10g}, {hi:.10g}]")
    print(f"wrote {path}")
    return EXIT_OK


def _verify_rows(config: RunConfig):
    """Residuals, defects and projector diagnostics over the (eps, a) grid."""
    potential = config.make_potential()
    truncation = config.make_truncation()
    window = config.make_window()
    k_grid = uniform_k_grid(potential, config.k_points)
    gap = gap_certificate(potential, window, k_grid, truncation,
                          min_gap=config.gap_min)
    interval = band_interval(potential, truncation, window, k_grid)
    contour = enclosing_contour(interval, gap, config.contour_nodes)
    margin = 0.5 * gap * (1.0 - 1e-9)
    drive = config.make_drive()
    k0 = float(k_grid[len(k_grid) // 3])  # a generic fiber, off symmetry points
    rows = []
    for a in config.a_values:
        family = driven_fiber_family(potential, truncation, k0, drive, a,
                                     derivative_order=min(
                                         2, drive.max_derivative_order + 1))
        grid = SGrid(config.s_max, config.s_count)
        exp = build_expansion(family, contour, grid, config.n_max, margin)
        report = recurrence_residuals(exp)
        e1 = report.max_convolution
        e2 = report.max_commutator
        for eps in config.epsilons:
            for n in range(config.n_max + 1):
                tn = truncated_sum(exp, eps, n)
                idem, comm = truncation_defects(tn)
                proj = deformed_projector(tn, circle_nodes=config.circle_nodes)
                defect = invariance_defect(proj)
                rows.append({
                    "epsilon": eps, "a": a, "n": n,
                    "e1_max": e1, "e2_max": e2,
                    "tn_idem": idem, "tn_identity": comm,
                    "pn_idem": proj.idempotency, "pn_herm": proj.hermiticity,
                    "pn_rank": proj.rank,
                    "defect_lhs": defect.defect_norm,
                    "defect_rhs": defect.rhs_norm,
                    "defect_agreement": defect.agreement,
                })
    return rows


def cmd_verify(config: RunConfig, out_dir: Path) -> int:
    """Identity and defect verification across the config's (eps, a) grid."""
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        rows = _verify_rows(config)
    except NoGapError as exc:
        print(f"no-gap: {exc}", file=sys.stderr)
        return EXIT_NO_GAP
    except (EpsilonTooLargeError, InstabilityError) as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    failures = []
    for r in rows:
        point = f"(eps={r['epsilon']:g}, a={r['a']:g}, n={r['n']})"
        if r["pn_idem"] > PN_IDEMPOTENCY_TOL:
            failures.append(f"projector idempotency {r['pn_idem']:.2e} at {point}")
        if r["pn_herm"] > PN_HERMITICITY_TOL:
            failures.append(f"projector hermiticity {r['pn_herm']:.2e} at {point}")
        if r["defect_agreement"] > PN_AGREEMENT_TOL:
            failures.append(
                f"defect identity mismatch {r['defect_agreement']:.2e} at {point}")
    # defect slope per (n, a) over the epsilon grid
    fits = []
    for a in config.a_values:
        for n in range(config.n_max + 1):
            pts = [(r["epsilon"], r["defect_lhs"]) for r in rows
                   if r["a"] == a and r["n"] == n]
            if len(pts) >= 4 and min(p[1] for p in pts) > 0:
                eps, lhs = zip(*pts)
                fit = loglog_fit(eps, lhs)
                fits.append((n, a, fit))
    path = out_dir / "verify.csv"
    with open(path, "w", newline="") as fh:
        _header(fh, config, f"{SCHEMA_VERSION}/verify")
        names = ["epsilon", "a", "n", "e1_max", "e2_max", "tn_idem",
                 "tn_identity", "pn_idem", "pn_herm", "pn_rank",
                 "defect_lhs", "defect_rhs", "defect_agreement"]
        writer = csv.writer(fh)
        writer.writerow(names)
        for r in rows:
            writer.writerow([_fmt(r[name]) for name in names])
    fits_path = out_dir / "verify_fits.csv"
    with open(fits_path, "w", newline="") as fh:
        _header(fh, config, f"{SCHEMA_VERSION}/verify-fits")
        writer = csv.writer(fh)
        writer.writerow(["n", "a", "defect_slope", "intercept", "residual"])
        for n, a, fit in fits:
            writer.writerow([n, _fmt(a), _fmt(fit.slope), _fmt(fit.intercept),
                             _fmt(fit.residual)])
    print(f"wrote {path} and {fits_path}")
    for n, a, fit in fits:
        print(f"defect slope n={n} a={a:g}: {fit.slope:.3f} "
              f"(expected {n + 1}, residual {fit.residual:.3f})")
    if failures:
        for msg in failures:
            print(f"invariant failure: {msg}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_sweep(config: RunConfig, out_dir: Path, workers: int | None) -> int:
    """Full scaling study with CSV output; deterministic across worker counts."""
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        report = scaling_sweep(config, workers=workers)
    except NoGapError as exc:
        print(f"no-gap: {exc}", file=sys.stderr)
        return EXIT_NO_GAP
    write_rows_csv(report, out_dir / "sweep.csv", f"{SCHEMA_VERSION}/sweep")
    write_fits_csv(report, out_dir / "fits.csv", f"{SCHEMA_VERSION}/fits")
    print(f"wrote {out_dir / 'sweep.csv'} ({report.total_rows} rows, "
          f"{report.failed_rows} failed)")
    for n, a, fit in report.epsilon_fits:
        print(f"gamma slope n={n} a={a:g}: {fit.slope:.3f} "
              f"(residual {fit.residual:.3f})")
    if report.ok_fraction() < 0.95:
        print(f"sweep degraded: only {100 * report.ok_fraction():.1f}% of "
              "points succeeded", file=sys.stderr)
        return EXIT_DEGRADED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="superbloch",
        description="Deformed-band projectors and interband transition "
                    "bounds for driven 1D Bloch electrons.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("bands", "band structure and gap certificate"),
            ("verify", "identity and defect verification"),
            ("sweep", "scaling sweep over epsilon and the frequency ratio")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML config path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: from config)")
        p.add_argument("--refine", action="store_true",
                       help="double all grids for a convergence audit")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        config = load_config(args.config)
        if args.refine:
            config = config.refined()
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out_dir = Path(args.out)
    try:
        if args.command == "bands":
            return cmd_bands(config, out_dir)
        if args.command == "verify":
            return cmd_verify(config, out_dir)
        if args.command == "sweep":
            return cmd_sweep(config, out_dir, args.workers)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SuperblochError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
