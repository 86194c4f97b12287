"""Config-driven runs: validate a JSON config, execute stages, record a manifest.

A run executes up to four stages in a fixed order: mesh (build a sphere or
load a file, optionally tag the microphone patch), grade (remesh to the
graded target lengths), calc (reciprocal solve over the frequency list),
compare (errors against an analytic or stored reference field). Outputs are
staged in a scratch directory and moved into place with a single rename, so
a crashed run never leaves a half-written output directory behind.

Wall times and memory high-water marks go into the manifest only. The study
CSV written by the compare stage carries a zero seconds column, keeping
every output file byte-identical across repeated runs of the same config.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
import resource
import shutil
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analytic import reference_field
from .bem import SolverError, calc_hrtf_reciprocal
from .fields import PressureField
from .grading import GradingSpec, remesh
from .grids import make_ari_grid, make_eqa_grid
from .mesh import MeshError, make_sphere_mesh, tag_faces_near
from .meshio import load_mesh, save_mesh
from .metrics import (
    STUDY_CSV_HEADER,
    StudyScene,
    StudyVariant,
    error_study,
    normalized_point_source_field,
)

SCHEMA_VERSION = 1
TOOL_VERSION = f"gradedbem {__version__}"


class ConfigError(ValueError):
    """The run configuration violates the schema."""


class InputError(ValueError):
    """An input file or referenced row is missing or malformed."""


class PipelineError(RuntimeError):
    """A stage failed; carries the partial manifest that was written."""

    def __init__(self, stage, manifest, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.manifest = manifest
        self.cause = cause


# -- configuration schema ---------------------------------------------------------

def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _require(cond, path, message):
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _check_keys(obj, path, allowed, required=()):
    _require(isinstance(obj, dict), path, "must be a mapping")
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown key at {path}: {key!r}")
    for key in required:
        _require(key in obj, path, f"missing required key {key!r}")


def _check_positive(obj, path, key, default=None):
    value = obj.get(key, default)
    if value is None:
        return None
    _require(_is_number(value) and value > 0, f"{path}.{key}", "must be a positive number")
    return float(value)


def _check_vec3(obj, path, key):
    value = obj[key]
    ok = (
        isinstance(value, list)
        and len(value) == 3
        and all(_is_number(v) for v in value)
    )
    _require(ok, f"{path}.{key}", "must be a list of 3 numbers")
    return tuple(float(v) for v in value)


def _check_str(obj, path, key, default=None, choices=None):
    value = obj.get(key, default)
    if value is None:
        return None
    _require(isinstance(value, str) and value != "", f"{path}.{key}", "must be a nonempty string")
    if choices is not None:
        _require(value in choices, f"{path}.{key}", f"must be one of {sorted(choices)}")
    return value


def _validate_mesh_section(cfg):
    _check_keys(cfg, "mesh", {"sphere", "load", "patch"})
    has_sphere = "sphere" in cfg
    has_load = "load" in cfg
    _require(has_sphere != has_load, "mesh", "needs exactly one of 'sphere' or 'load'")
    if has_sphere:
        sphere = cfg["sphere"]
        _check_keys(sphere, "mesh.sphere", {"radius_m", "edge_mm"}, ("radius_m", "edge_mm"))
        _check_positive(sphere, "mesh.sphere", "radius_m")
        _check_positive(sphere, "mesh.sphere", "edge_mm")
    else:
        load = cfg["load"]
        _check_keys(load, "mesh.load", {"path", "tags"}, ("path",))
        _check_str(load, "mesh.load", "path")
        _check_str(load, "mesh.load", "tags")
    if "patch" in cfg:
        patch = cfg["patch"]
        _check_keys(patch, "mesh.patch", {"label", "center_m", "radius_mm"}, ("label", "center_m", "radius_mm"))
        _check_str(patch, "mesh.patch", "label")
        _check_vec3(patch, "mesh.patch", "center_m")
        _check_positive(patch, "mesh.patch", "radius_mm")


def _validate_grade_section(cfg):
    _check_keys(
        cfg,
        "grade",
        {"family", "alpha", "lmin_mm", "lmax_mm", "patch", "iterations", "d_max_m"},
        ("family", "lmin_mm", "lmax_mm"),
    )
    _check_str(cfg, "grade", "family", choices={"power", "raised-cosine", "uniform"})
    if "alpha" in cfg:
        _require(
            _is_number(cfg["alpha"]) and cfg["alpha"] >= 0,
            "grade.alpha",
            "must be a nonnegative number",
        )
    _check_positive(cfg, "grade", "lmin_mm")
    _check_positive(cfg, "grade", "lmax_mm")
    _check_str(cfg, "grade", "patch")
    _check_positive(cfg, "grade", "d_max_m")
    if "iterations" in cfg:
        value = cfg["iterations"]
        _require(
            isinstance(value, int) and not isinstance(value, bool) and value >= 1,
            "grade.iterations",
            "must be a positive integer",
        )


def _validate_calc_section(cfg):
    _check_keys(
        cfg,
        "calc",
        {"patch", "grid", "grid_radius_m", "freqs_hz", "solver", "tol", "dense_cap", "quad_rule", "normalize"},
        ("patch", "grid", "freqs_hz"),
    )
    _check_str(cfg, "calc", "patch")
    _check_str(cfg, "calc", "grid", choices={"eqa", "ari"})
    _check_positive(cfg, "calc", "grid_radius_m")
    freqs = cfg["freqs_hz"]
    ok = isinstance(freqs, list) and len(freqs) > 0 and all(_is_number(f) and f > 0 for f in freqs)
    _require(ok, "calc.freqs_hz", "must be a nonempty list of positive frequencies")
    _check_str(cfg, "calc", "solver", choices={"auto", "direct", "gmres"})
    _check_positive(cfg, "calc", "tol")
    if "dense_cap" in cfg:
        value = cfg["dense_cap"]
        _require(
            isinstance(value, int) and not isinstance(value, bool) and value >= 1,
            "calc.dense_cap",
            "must be a positive integer",
        )
    _check_str(cfg, "calc", "quad_rule", choices={"tri7", "tri12"})
    if "normalize" in cfg:
        _require(isinstance(cfg["normalize"], bool), "calc.normalize", "must be a boolean")


def _validate_compare_section(cfg):
    _check_keys(cfg, "compare", {"analytic", "reference_csv", "label"})
    has_analytic = "analytic" in cfg
    has_csv = "reference_csv" in cfg
    _require(has_analytic != has_csv, "compare", "needs exactly one of 'analytic' or 'reference_csv'")
    if has_analytic:
        ana = cfg["analytic"]
        _check_keys(ana, "compare.analytic", {"sphere_radius_m", "source_m", "order"}, ("sphere_radius_m", "source_m"))
        _check_positive(ana, "compare.analytic", "sphere_radius_m")
        _check_vec3(ana, "compare.analytic", "source_m")
        if "order" in ana:
            value = ana["order"]
            _require(
                isinstance(value, int) and not isinstance(value, bool) and value >= 1,
                "compare.analytic.order",
                "must be a positive integer",
            )
    else:
        _check_str(cfg, "compare", "reference_csv")
    _check_str(cfg, "compare", "label")


def validate_config(data):
    """Raise ConfigError naming the offending field; return the data unchanged."""
    _check_keys(
        data,
        "config",
        {"schema_version", "output_dir", "mesh", "grade", "calc", "compare"},
        ("schema_version", "output_dir", "mesh"),
    )
    _require(
        data["schema_version"] == SCHEMA_VERSION,
        "config.schema_version",
        f"must be {SCHEMA_VERSION}",
    )
    _check_str(data, "config", "output_dir")
    _validate_mesh_section(data["mesh"])
    if "grade" in data:
        _validate_grade_section(data["grade"])
    if "calc" in data:
        _validate_calc_section(data["calc"])
    if "compare" in data:
        _validate_compare_section(data["compare"])
        _require("calc" in data, "compare", "requires a calc section")
    return data


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration."""

    data: dict

    def __post_init__(self):
        validate_config(self.data)

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise InputError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})")
        return cls(data=data)

    def __getitem__(self, key):
        return self.data[key]

    def get(self, key, default=None):
        return self.data.get(key, default)


# -- manifest ---------------------------------------------------------------------

@dataclass
class StageRecord:
    name: str
    seconds: float
    peak_memory_mb: float
    detail: dict = field(default_factory=dict)


@dataclass
class RunManifest:
    """What a run did: config snapshot, input/output digests, stage costs."""

    tool: str
    status: str
    config: dict
    inputs: dict
    stages: list
    outputs: dict
    error: str = ""

    def to_dict(self):
        return {
            "tool": self.tool,
            "status": self.status,
            "config": self.config,
            "inputs": self.inputs,
            "stages": [dataclasses.asdict(s) for s in self.stages],
            "outputs": self.outputs,
            "error": self.error,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            raw = json.load(fh)
        raw["stages"] = [StageRecord(**s) for s in raw["stages"]]
        return cls(**raw)


def file_digest(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return f"sha256:{digest.hexdigest()}"


def _peak_memory_mb():
    return round(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0, 1)


# -- stage helpers ----------------------------------------------------------------

def parse_freqs(text):
    """Parse a 'start:step:count' frequency sweep into a list in Hz."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"frequency sweep must be start:step:count, got {text!r}")
    try:
        start, step = float(parts[0]), float(parts[1])
        count = int(parts[2])
    except ValueError:
        raise ConfigError(f"frequency sweep must be numeric, got {text!r}")
    if start <= 0 or step < 0 or count < 1:
        raise ConfigError(f"frequency sweep needs start > 0, step >= 0, count >= 1, got {text!r}")
    return [start + i * step for i in range(count)]


def make_grid(kind, radius_m=1.2):
    if kind == "eqa":
        return make_eqa_grid(radius_m=radius_m)
    if kind == "ari":
        return make_ari_grid(radius_m=radius_m)
    raise ConfigError(f"unknown grid kind {kind!r}")


def calc_field(mesh, patch, grid, freqs_hz, *, solver="auto", tol=1e-6,
               dense_cap=8000, quad_rule="tri7", normalize=True):
    """Reciprocal solve per frequency; returns (PressureField, seconds list)."""
    rows = []
    seconds = []
    for f in freqs_hz:
        start = time.perf_counter()
        one = calc_hrtf_reciprocal(
            mesh, patch, grid, [f],
            method=solver, tol=tol, dense_cap=dense_cap, quad_rule=quad_rule,
        )
        seconds.append(round(time.perf_counter() - start, 3))
        rows.append(one.values[0])
    out = PressureField(freqs_hz=np.array(freqs_hz, dtype=float), values=np.array(rows))
    if normalize:
        out = normalized_point_source_field(out, mesh, patch)
    return out, seconds


def _stage_mesh(cfg, workdir, inputs, outputs):
    section = cfg["mesh"]
    if "sphere" in section:
        sphere = section["sphere"]
        mesh = make_sphere_mesh(sphere["radius_m"], sphere["edge_mm"])
    else:
        load = section["load"]
        for key in ("path", "tags"):
            if key in load and not os.path.exists(load[key]):
                raise InputError(f"mesh.load.{key}: no such file {load[key]!r}")
        mesh = load_mesh(load["path"], load.get("tags"))
        inputs[load["path"]] = file_digest(load["path"])
        if "tags" in load:
            inputs[load["tags"]] = file_digest(load["tags"])
    if "patch" in section:
        patch = section["patch"]
        mesh = tag_faces_near(mesh, patch["label"], tuple(patch["center_m"]), patch["radius_mm"])
    tags_path = None
    if np.any(mesh.face_tags != ""):
        tags_path = os.path.join(workdir, "mesh.tags")
    save_mesh(mesh, os.path.join(workdir, "mesh.obj"), tags_path)
    outputs.append("mesh.obj")
    if tags_path:
        outputs.append("mesh.tags")
    return mesh, {"faces": int(mesh.n_faces)}


def _stage_grade(cfg, mesh, workdir, outputs):
    section = cfg["grade"]
    spec = GradingSpec(
        family=section["family"],
        alpha=float(section.get("alpha", 0.0)),
        lmin_mm=section["lmin_mm"],
        lmax_mm=section["lmax_mm"],
        patch_label=section.get("patch", ""),
        d_max_m=section.get("d_max_m"),
        iterations=section.get("iterations", 10),
    )
    graded, report = remesh(mesh, spec)
    tags_path = os.path.join(workdir, "graded.tags") if np.any(graded.face_tags != "") else None
    save_mesh(graded, os.path.join(workdir, "graded.obj"), tags_path)
    outputs.append("graded.obj")
    if tags_path:
        outputs.append("graded.tags")
    report_doc = {
        "label": spec.label(),
        "input_faces": report.input_faces,
        "faces": report.stats.n_faces,
        "edge_avg_mm": report.stats.edge_avg_mm,
        "edge_min_mm": report.stats.edge_min_mm,
        "edge_max_mm": report.stats.edge_max_mm,
        "band_fraction": report.band_fraction,
        "iterations": [dataclasses.asdict(t) for t in report.iterations],
    }
    with open(os.path.join(workdir, "grade_report.json"), "w") as fh:
        json.dump(report_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append("grade_report.json")
    return graded, spec, {"faces": int(graded.n_faces), "band_fraction": report.band_fraction}


def _stage_calc(cfg, mesh, workdir, outputs):
    section = cfg["calc"]
    grid = make_grid(section["grid"], section.get("grid_radius_m", 1.2))
    fields, seconds = calc_field(
        mesh,
        section["patch"],
        grid,
        [float(f) for f in section["freqs_hz"]],
        solver=section.get("solver", "auto"),
        tol=section.get("tol", 1e-6),
        dense_cap=section.get("dense_cap", 8000),
        quad_rule=section.get("quad_rule", "tri7"),
        normalize=section.get("normalize", True),
    )
    fields.save_csv(os.path.join(workdir, "field.csv"))
    outputs.append("field.csv")
    return fields, grid, {"per_frequency_seconds": seconds, "grid_points": grid.n_points}


def _stage_compare(cfg, mesh, grade_spec, fields, grid, workdir, inputs, outputs):
    section = cfg["compare"]
    freqs = fields.freqs_hz
    if "analytic" in section:
        ana = section["analytic"]
        reference = reference_field(
            ana["sphere_radius_m"],
            tuple(ana["source_m"]),
            grid,
            freqs,
            order=ana.get("order", 125),
        )
    else:
        path = section["reference_csv"]
        if not os.path.exists(path):
            raise InputError(f"compare.reference_csv: no such file {path!r}")
        inputs[path] = file_digest(path)
        reference = PressureField.load_csv(path)
    label = section.get("label") or (grade_spec.label() if grade_spec else "mesh")
    scene = StudyScene(reference=reference, grid=grid, freqs_hz=tuple(freqs))
    table = error_study(
        [StudyVariant(label=label, mesh=mesh, field=fields, seconds=0.0)], scene
    )
    table.save_csv(os.path.join(workdir, "study.csv"))
    outputs.append("study.csv")
    report = table.rows[0].report
    doc = {
        "label": label,
        "e_l2": report.e_l2,
        "e_linf": report.e_linf,
        "ratio": report.ratio,
        "per_frequency": [
            {"freq_hz": row.freq_hz, "e_l2": row.e_l2, "e_linf": row.e_linf}
            for row in report.per_frequency
        ],
    }
    with open(os.path.join(workdir, "compare_report.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append("compare_report.json")
    return {"e_l2_all": report.e_l2["all"]}


def run_pipeline(config):
    """Execute the configured stages; write outputs and manifest atomically.

    Returns the manifest. On a stage failure the partial manifest (status
    "failed") is still written to the output directory, then PipelineError
    is raised with that manifest attached.
    """
    if not isinstance(config, RunConfig):
        config = RunConfig(data=config)
    out_dir = config["output_dir"]
    parent = os.path.dirname(os.path.abspath(out_dir))
    os.makedirs(parent, exist_ok=True)
    workdir = f"{out_dir}.partial-{os.getpid()}"
    if os.path.exists(workdir):
        shutil.rmtree(workdir)
    os.makedirs(workdir)

    manifest = RunManifest(
        tool=TOOL_VERSION, status="running", config=config.data,
        inputs={}, stages=[], outputs={},
    )
    outputs = []
    failure = None
    current_stage = "mesh"

    def record(name, started, detail):
        manifest.stages.append(
            StageRecord(
                name=name,
                seconds=round(time.perf_counter() - started, 3),
                peak_memory_mb=_peak_memory_mb(),
                detail=detail,
            )
        )

    try:
        started = time.perf_counter()
        mesh, detail = _stage_mesh(config, workdir, manifest.inputs, outputs)
        record("mesh", started, detail)

        grade_spec = None
        if "grade" in config.data:
            current_stage = "grade"
            started = time.perf_counter()
            mesh, grade_spec, detail = _stage_grade(config, mesh, workdir, outputs)
            record("grade", started, detail)

        if "calc" in config.data:
            current_stage = "calc"
            started = time.perf_counter()
            fields, grid, detail = _stage_calc(config, mesh, workdir, outputs)
            record("calc", started, detail)

            if "compare" in config.data:
                current_stage = "compare"
                started = time.perf_counter()
                detail = _stage_compare(
                    config, mesh, grade_spec, fields, grid, workdir,
                    manifest.inputs, outputs,
                )
                record("compare", started, detail)
        manifest.status = "ok"
    except Exception as exc:
        manifest.status = "failed"
        manifest.error = f"{current_stage}: {exc}"
        failure = (current_stage, exc)

    manifest.outputs = {
        name: file_digest(os.path.join(workdir, name)) for name in outputs
    }
    manifest.save(os.path.join(workdir, "manifest.json"))
    if os.path.exists(out_dir):
        shutil.rmtree(out_dir)
    os.rename(workdir, out_dir)
    if failure is not None:
        raise PipelineError(failure[0], manifest, failure[1])
    return manifest


# -- study configs ----------------------------------------------------------------

def _validate_study_config(data):
    _check_keys(
        data,
        "study",
        {"grid", "grid_radius_m", "freqs_hz", "patch", "solver", "tol",
         "dense_cap", "quad_rule", "reference", "variants"},
        ("grid", "freqs_hz", "patch", "reference", "variants"),
    )
    _check_str(data, "study", "grid", choices={"eqa", "ari"})
    _check_positive(data, "study", "grid_radius_m")
    freqs = data["freqs_hz"]
    ok = isinstance(freqs, list) and len(freqs) > 0 and all(_is_number(f) and f > 0 for f in freqs)
    _require(ok, "study.freqs_hz", "must be a nonempty list of positive frequencies")
    _check_str(data, "study", "patch")
    _check_str(data, "study", "solver", choices={"auto", "direct", "gmres"})
    _check_positive(data, "study", "tol")
    if "dense_cap" in data:
        value = data["dense_cap"]
        _require(
            isinstance(value, int) and not isinstance(value, bool) and value >= 1,
            "study.dense_cap",
            "must be a positive integer",
        )
    _check_str(data, "study", "quad_rule", choices={"tri7", "tri12"})
    ref = data["reference"]
    _check_keys(ref, "study.reference", {"analytic", "csv"})
    _require(
        ("analytic" in ref) != ("csv" in ref),
        "study.reference",
        "needs exactly one of 'analytic' or 'csv'",
    )
    if "analytic" in ref:
        ana = ref["analytic"]
        _check_keys(ana, "study.reference.analytic", {"sphere_radius_m", "source_m", "order"}, ("sphere_radius_m", "source_m"))
        _check_positive(ana, "study.reference.analytic", "sphere_radius_m")
        _check_vec3(ana, "study.reference.analytic", "source_m")
    else:
        _check_str(ref, "study.reference", "csv")
    variants = data["variants"]
    _require(isinstance(variants, list) and variants, "study.variants", "must be a nonempty list")
    for i, v in enumerate(variants):
        path = f"study.variants[{i}]"
        _check_keys(v, path, {"label", "mesh", "tags", "field"}, ("label", "mesh"))
        for key in ("label", "mesh", "tags", "field"):
            _check_str(v, path, key)
    return data


def build_study(data, base_dir="."):
    """Turn a study config mapping into (variants, scene) ready for error_study.

    Relative paths resolve against `base_dir` (normally the config file's
    directory).
    """
    _validate_study_config(data)

    def resolve(path):
        return path if os.path.isabs(path) else os.path.join(base_dir, path)

    grid = make_grid(data["grid"], data.get("grid_radius_m", 1.2))
    freqs = tuple(float(f) for f in data["freqs_hz"])
    ref = data["reference"]
    if "analytic" in ref:
        ana = ref["analytic"]
        reference = reference_field(
            ana["sphere_radius_m"], tuple(ana["source_m"]), grid, freqs,
            order=ana.get("order", 125),
        )
    else:
        path = resolve(ref["csv"])
        if not os.path.exists(path):
            raise InputError(f"study.reference.csv: no such file {path!r}")
        reference = PressureField.load_csv(path)
    variants = []
    for v in data["variants"]:
        mesh_path = resolve(v["mesh"])
        if not os.path.exists(mesh_path):
            raise InputError(f"variant {v['label']!r}: no such mesh {mesh_path!r}")
        tags = resolve(v["tags"]) if "tags" in v else None
        if tags and not os.path.exists(tags):
            raise InputError(f"variant {v['label']!r}: no such tags file {tags!r}")
        mesh = load_mesh(mesh_path, tags)
        field_obj = None
        if "field" in v:
            field_path = resolve(v["field"])
            if not os.path.exists(field_path):
                raise InputError(f"variant {v['label']!r}: no such field {field_path!r}")
            field_obj = PressureField.load_csv(field_path)
        variants.append(StudyVariant(label=v["label"], mesh=mesh, field=field_obj))
    scene = StudyScene(
        reference=reference,
        grid=grid,
        freqs_hz=freqs,
        patch_label=data["patch"],
        method=data.get("solver", "auto"),
        tol=data.get("tol", 1e-6),
        dense_cap=data.get("dense_cap", 8000),
        quad_rule=data.get("quad_rule", "tri7"),
    )
    return variants, scene


# -- consolidated cost report -----------------------------------------------------

REPORT_CSV_HEADER = [
    "label", "family", "lmin", "lmax", "nFaces",
    "eL2_all", "eL2_ipsi", "eL2_contra", "eLinf_all", "ratio",
    "seconds", "timePercent",
]


def report_tables(csv_paths, reference_label):
    """Merge study CSVs and express run time relative to a reference row.

    Returns the merged rows (dicts, one per input row, input order) with a
    `timePercent` column: 100 x seconds / reference row's seconds.
    """
    if not csv_paths:
        raise InputError("no study tables given")
    rows = []
    for path in csv_paths:
        if not os.path.exists(path):
            raise InputError(f"no such study table: {path}")
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != STUDY_CSV_HEADER:
                raise InputError(f"{path}: unexpected study CSV header {header}")
            for record in reader:
                rows.append(dict(zip(header, record)))
    reference = [r for r in rows if r["label"] == reference_label]
    if not reference:
        raise InputError(f"reference row {reference_label!r} not found in study tables")
    ref_seconds = float(reference[0]["seconds"])
    if ref_seconds <= 0:
        raise InputError(f"reference row {reference_label!r} has no recorded time")
    for row in rows:
        row["timePercent"] = repr(100.0 * float(row["seconds"]) / ref_seconds)
    return rows


def save_report(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_CSV_HEADER)
        writer.writeheader()
        writer.writerows(rows)
