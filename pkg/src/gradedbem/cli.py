"""Command line interface.

Subcommands:
  grade     remesh an input mesh toward a graded target edge length
  calc      reciprocal solve on a mesh, pressure field CSV per frequency
  analytic  rigid-sphere reference field for a point source, same CSV layout
  compare   error report between two field CSVs on a grid
  study     run a mesh-variant error study from a JSON config
  report    merge study CSVs and add relative computation time
  run       execute a full pipeline config (mesh/grade/calc/compare stages)

Exit codes: 0 success, 2 configuration error, 3 input error, 4 numerical
failure. Errors print one line to stderr: `error[<category>]: <message>`.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .bem import SolverError
from .fields import PressureField
from .grading import GradingSpec, remesh
from .mesh import MeshError
from .meshio import load_mesh, save_mesh
from .metrics import compare_fields, error_study
from .analytic import reference_field
from .pipeline import (
    ConfigError,
    InputError,
    PipelineError,
    RunConfig,
    build_study,
    calc_field,
    file_digest,
    make_grid,
    parse_freqs,
    report_tables,
    run_pipeline,
    save_report,
    _peak_memory_mb,
)


def _vec3(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numeric x,y,z, got {text!r}")


def _load_mesh_arg(args):
    return load_mesh(args.mesh, args.tags)


def cmd_grade(args):
    mesh = _load_mesh_arg(args)
    spec = GradingSpec(
        family=args.family,
        alpha=args.alpha,
        lmin_mm=args.lmin,
        lmax_mm=args.lmax,
        patch_label=args.patch or "",
        iterations=args.iterations,
    )
    graded, report = remesh(mesh, spec)
    save_mesh(graded, args.out, args.out_tags)
    print(f"{spec.label()}: {report.summary()}")
    if args.report:
        doc = {
            "label": spec.label(),
            "input_faces": report.input_faces,
            "faces": report.stats.n_faces,
            "edge_avg_mm": report.stats.edge_avg_mm,
            "band_fraction": report.band_fraction,
        }
        with open(args.report, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_calc(args):
    mesh = _load_mesh_arg(args)
    grid = make_grid(args.grid, args.grid_radius)
    freqs = parse_freqs(args.freqs)
    field, seconds = calc_field(
        mesh, args.patch, grid, freqs,
        solver=args.solver, tol=args.tol, dense_cap=args.dense_cap,
        quad_rule=args.quad_rule, normalize=args.normalize,
    )
    field.save_csv(args.out)
    manifest = {
        "mesh": file_digest(args.mesh),
        "settings": {
            "patch": args.patch, "grid": args.grid, "grid_radius_m": args.grid_radius,
            "freqs_hz": freqs, "solver": args.solver, "tol": args.tol,
            "dense_cap": args.dense_cap, "quad_rule": args.quad_rule,
            "normalize": args.normalize,
        },
        "per_frequency_seconds": seconds,
        "peak_memory_mb": _peak_memory_mb(),
    }
    with open(f"{args.out}.manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for f, s in zip(freqs, seconds):
        print(f"{f:10.1f} Hz  {s:8.3f} s")
    print(f"wrote {args.out} ({mesh.n_faces} faces, {grid.n_points} grid points)")
    return 0


def cmd_analytic(args):
    grid = make_grid(args.grid, args.grid_radius)
    freqs = parse_freqs(args.freqs)
    field = reference_field(args.sphere_radius, args.source, grid, freqs, order=args.order)
    field.save_csv(args.out)
    print(f"wrote {args.out} ({len(freqs)} frequencies, {grid.n_points} grid points)")
    return 0


def cmd_compare(args):
    grid = make_grid(args.grid, args.grid_radius)
    field = PressureField.load_csv(args.field)
    reference = PressureField.load_csv(args.reference)
    report = compare_fields(field, reference, grid)
    print(report.summary())
    if args.out:
        doc = {
            "e_l2": report.e_l2,
            "e_linf": report.e_linf,
            "ratio": report.ratio,
            "per_frequency": [
                {"freq_hz": row.freq_hz, "e_l2": row.e_l2, "e_linf": row.e_linf}
                for row in report.per_frequency
            ],
        }
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_study(args):
    try:
        with open(args.config) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"config file not found: {args.config}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.config}: not valid JSON ({exc})")
    variants, scene = build_study(data, base_dir=os.path.dirname(os.path.abspath(args.config)))
    table = error_study(variants, scene)
    table.save_csv(args.out)
    for row in table.rows:
        print(
            f"{row.label:<14} {row.n_faces:7d} faces  "
            f"eL2 all={100 * row.report.e_l2['all']:6.2f}%  "
            f"ipsi={100 * row.report.e_l2['ipsi']:6.2f}%  "
            f"contra={100 * row.report.e_l2['contra']:6.2f}%  "
            f"{row.seconds:8.2f} s"
        )
    print(f"wrote {args.out}")
    return 0


def cmd_report(args):
    rows = report_tables(args.tables, args.reference)
    save_report(rows, args.out)
    for row in rows:
        print(f"{row['label']:<14} {float(row['timePercent']):7.1f} % of reference time")
    print(f"wrote {args.out}")
    return 0


def cmd_run(args):
    config = RunConfig.from_file(args.config)
    manifest = run_pipeline(config)
    for stage in manifest.stages:
        print(f"{stage.name:<8} {stage.seconds:9.3f} s   peak {stage.peak_memory_mb:.0f} MB")
    print(f"status: {manifest.status}  outputs: {len(manifest.outputs)} files in {config['output_dir']}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gradedbem",
        description="Graded remeshing and boundary-element runs for exterior acoustics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grade", help="remesh toward graded target edge lengths")
    p.add_argument("--mesh", required=True)
    p.add_argument("--tags")
    p.add_argument("--family", required=True, choices=("power", "raised-cosine", "uniform"))
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--lmin", type=float, required=True, help="target edge length near the patch, mm")
    p.add_argument("--lmax", type=float, required=True, help="target edge length far from the patch, mm")
    p.add_argument("--patch", default="", help="face tag marking the microphone patch")
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--out", required=True)
    p.add_argument("--out-tags")
    p.add_argument("--report", help="write remesh statistics JSON here")
    p.set_defaults(func=cmd_grade)

    p = sub.add_parser("calc", help="reciprocal solve, field CSV per frequency")
    p.add_argument("--mesh", required=True)
    p.add_argument("--tags")
    p.add_argument("--patch", required=True)
    p.add_argument("--grid", required=True, choices=("eqa", "ari"))
    p.add_argument("--grid-radius", type=float, default=1.2)
    p.add_argument("--freqs", required=True, help="start:step:count in Hz")
    p.add_argument("--solver", default="auto", choices=("auto", "direct", "gmres"))
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--dense-cap", type=int, default=8000)
    p.add_argument("--quad-rule", default="tri7", choices=("tri7", "tri12"))
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True,
                   help="rescale to a unit point source at the patch")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calc)

    p = sub.add_parser("analytic", help="rigid-sphere reference field")
    p.add_argument("--sphere-radius", type=float, required=True)
    p.add_argument("--source", type=_vec3, required=True, help="x,y,z in meters")
    p.add_argument("--grid", required=True, choices=("eqa", "ari"))
    p.add_argument("--grid-radius", type=float, default=1.2)
    p.add_argument("--freqs", required=True, help="start:step:count in Hz")
    p.add_argument("--order", type=int, default=125)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("compare", help="error report between two field CSVs")
    p.add_argument("--field", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--grid", required=True, choices=("eqa", "ari"))
    p.add_argument("--grid-radius", type=float, default=1.2)
    p.add_argument("--out", help="write the report JSON here")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("study", help="mesh-variant error study from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("report", help="merge study CSVs, add relative run time")
    p.add_argument("tables", nargs="+")
    p.add_argument("--reference", required=True, help="label of the 100%% row")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="execute a pipeline config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    return parser


def _categorize(exc):
    if isinstance(exc, ConfigError):
        return "config", 2
    if isinstance(exc, (InputError, FileNotFoundError, MeshError)):
        return "input", 3
    if isinstance(exc, SolverError):
        return "numerical", 4
    if isinstance(exc, ValueError):
        return "input", 3
    return None


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        inner = _categorize(exc.cause) or ("numerical", 4)
        print(f"error[{inner[0]}]: {exc}", file=sys.stderr)
        return inner[1]
    except Exception as exc:
        category = _categorize(exc)
        if category is None:
            raise
        print(f"error[{category[0]}]: {exc}", file=sys.stderr)
        return category[1]


if __name__ == "__main__":
    sys.exit(main())
