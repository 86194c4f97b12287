"""Config validation, pipeline runs, manifests, CLI subcommands, exit codes."""

import csv
import json
import os

import numpy as np
import pytest

from gradedbem.cli import main
from gradedbem.fields import PressureField
from gradedbem.mesh import make_sphere_mesh, tag_faces_near
from gradedbem.meshio import save_mesh
from gradedbem.pipeline import (
    ConfigError,
    InputError,
    PipelineError,
    RunConfig,
    RunManifest,
    build_study,
    parse_freqs,
    report_tables,
    run_pipeline,
    save_report,
)

RADIUS = 0.05
PATCH_CENTER = [0.0, RADIUS, 0.0]


def base_config(tmp_path, **overrides):
    data = {
        "schema_version": 1,
        "output_dir": str(tmp_path / "run"),
        "mesh": {
            "sphere": {"radius_m": RADIUS, "edge_mm": 15.0},
            "patch": {"label": "mic", "center_m": PATCH_CENTER, "radius_mm": 1.0},
        },
        "calc": {
            "patch": "mic",
            "grid": "eqa",
            "freqs_hz": [1000.0],
        },
        "compare": {
            "analytic": {"sphere_radius_m": RADIUS, "source_m": [0.0, RADIUS + 0.001, 0.0]},
            "label": "UNI(15)",
        },
    }
    data.update(overrides)
    return data


# -- schema validation --------------------------------------------------------


def test_unknown_keys_rejected_with_path(tmp_path):
    data = base_config(tmp_path)
    data["extra"] = 1
    with pytest.raises(ConfigError, match=r"unknown key at config: 'extra'"):
        RunConfig(data=data)
    data = base_config(tmp_path)
    data["mesh"]["sphere"]["radius"] = 0.1
    with pytest.raises(ConfigError, match=r"unknown key at mesh.sphere: 'radius'"):
        RunConfig(data=data)


def test_negative_frequency_rejected_naming_field(tmp_path):
    data = base_config(tmp_path)
    data["calc"]["freqs_hz"] = [500.0, -1000.0]
    with pytest.raises(ConfigError, match="calc.freqs_hz"):
        RunConfig(data=data)


def test_schema_violations_name_their_field(tmp_path):
    data = base_config(tmp_path)
    del data["mesh"]["sphere"]
    with pytest.raises(ConfigError, match="exactly one of 'sphere' or 'load'"):
        RunConfig(data=data)

    data = base_config(tmp_path)
    data["mesh"]["load"] = {"path": "x.obj"}
    with pytest.raises(ConfigError, match="exactly one of"):
        RunConfig(data=data)

    data = base_config(tmp_path)
    data["schema_version"] = 99
    with pytest.raises(ConfigError, match="schema_version"):
        RunConfig(data=data)

    data = base_config(tmp_path)
    data["mesh"]["patch"]["center_m"] = [0.0, 1.0]
    with pytest.raises(ConfigError, match="mesh.patch.center_m"):
        RunConfig(data=data)

    data = base_config(tmp_path)
    data["compare"]["analytic"]["sphere_radius_m"] = -1.0
    with pytest.raises(ConfigError, match="compare.analytic.sphere_radius_m"):
        RunConfig(data=data)

    data = base_config(tmp_path)
    del data["calc"]
    with pytest.raises(ConfigError, match="requires a calc section"):
        RunConfig(data=data)


def test_config_file_loading(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        RunConfig.from_file(path)
    with pytest.raises(InputError, match="not found"):
        RunConfig.from_file(tmp_path / "absent.json")
    path.write_text(json.dumps(base_config(tmp_path)))
    config = RunConfig.from_file(path)
    assert config["schema_version"] == 1


def test_parse_freqs():
    assert parse_freqs("500:500:3") == [500.0, 1000.0, 1500.0]
    assert parse_freqs("1000:0:1") == [1000.0]
    for bad in ("500", "a:b:c", "0:100:2", "500:100:0"):
        with pytest.raises(ConfigError):
            parse_freqs(bad)


# -- pipeline runs ------------------------------------------------------------


def test_sphere_end_to_end_smoke(tmp_path):
    data = base_config(tmp_path)
    data["mesh"]["sphere"]["edge_mm"] = 7.5
    data["mesh"]["patch"]["radius_mm"] = 2.0
    data["grade"] = {
        "family": "raised-cosine",
        "alpha": 2.0,
        "lmin_mm": 5.0,
        "lmax_mm": 12.0,
        "patch": "mic",
    }
    data["calc"]["freqs_hz"] = [500.0, 1000.0, 1500.0]
    data["compare"]["label"] = "COS2(5,12)"
    manifest = run_pipeline(RunConfig(data=data))

    assert manifest.status == "ok"
    assert [s.name for s in manifest.stages] == ["mesh", "grade", "calc", "compare"]
    assert all(s.seconds >= 0 for s in manifest.stages)
    assert all(s.peak_memory_mb > 0 for s in manifest.stages)

    out = data["output_dir"]
    for name in ("mesh.obj", "graded.obj", "field.csv", "study.csv",
                 "compare_report.json", "grade_report.json", "manifest.json"):
        assert os.path.exists(os.path.join(out, name)), name

    listed = set(manifest.outputs)
    on_disk = {n for n in os.listdir(out) if n != "manifest.json"}
    assert listed == on_disk

    with open(os.path.join(out, "study.csv"), newline="") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 2
    assert rows[1][0] == "COS2(5,12)"
    assert rows[1][1] == "raised-cosine"
    assert float(rows[1][10]) == 0.0

    with open(os.path.join(out, "compare_report.json")) as fh:
        report = json.load(fh)
    assert 0.0 < report["e_l2"]["all"] < 0.5
    assert len(report["per_frequency"]) == 3

    saved = RunManifest.load(os.path.join(out, "manifest.json"))
    assert saved.status == "ok"
    assert saved.outputs == manifest.outputs


def test_identical_config_gives_identical_digests(tmp_path):
    data = base_config(tmp_path)
    first = run_pipeline(RunConfig(data=data))
    second = run_pipeline(RunConfig(data=data))
    assert first.outputs == second.outputs
    assert first.status == second.status == "ok"


def test_failed_stage_leaves_partial_manifest(tmp_path):
    data = base_config(tmp_path)
    data["calc"]["patch"] = "nosuchlabel"
    with pytest.raises(PipelineError, match="calc") as excinfo:
        run_pipeline(RunConfig(data=data))
    manifest = excinfo.value.manifest
    assert manifest.status == "failed"
    assert manifest.error.startswith("calc:")
    assert [s.name for s in manifest.stages] == ["mesh"]

    out = data["output_dir"]
    saved = RunManifest.load(os.path.join(out, "manifest.json"))
    assert saved.status == "failed"
    assert "mesh.obj" in saved.outputs
    leftovers = [n for n in os.listdir(os.path.dirname(out)) if ".partial-" in n]
    assert leftovers == []


def test_loaded_mesh_inputs_are_digested(tmp_path):
    mesh = tag_faces_near(make_sphere_mesh(RADIUS, 15.0), "mic", tuple(PATCH_CENTER), 1.0)
    mesh_path = str(tmp_path / "in.obj")
    tags_path = str(tmp_path / "in.tags")
    save_mesh(mesh, mesh_path, tags_path)
    data = base_config(tmp_path)
    data["mesh"] = {"load": {"path": mesh_path, "tags": tags_path}}
    del data["compare"]
    manifest = run_pipeline(RunConfig(data=data))
    assert set(manifest.inputs) == {mesh_path, tags_path}
    assert all(v.startswith("sha256:") for v in manifest.inputs.values())


# -- study configs and the consolidated report ---------------------------------


def test_build_study_validation(tmp_path):
    data = {
        "grid": "eqa",
        "freqs_hz": [1000.0],
        "patch": "mic",
        "reference": {"analytic": {"sphere_radius_m": RADIUS, "source_m": [0, RADIUS + 0.001, 0]}},
        "variants": [{"label": "UNI(15)", "mesh": "missing.obj"}],
    }
    with pytest.raises(InputError, match="missing.obj"):
        build_study(data, base_dir=str(tmp_path))
    data["variants"] = [{"label": "x", "mesh": "m.obj", "oops": 1}]
    with pytest.raises(ConfigError, match=r"study.variants\[0\]"):
        build_study(data, base_dir=str(tmp_path))
    data["variants"] = [{"label": "x", "mesh": "m.obj"}]
    data["reference"] = {"csv": "a.csv", "analytic": {}}
    with pytest.raises(ConfigError, match="exactly one of"):
        build_study(data, base_dir=str(tmp_path))


def study_csv(path, rows):
    header = ["label", "family", "lmin", "lmax", "nFaces", "eL2_all",
              "eL2_ipsi", "eL2_contra", "eLinf_all", "ratio", "seconds"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def test_report_relative_times(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    study_csv(a, [["UNI(5)", "uniform", "5", "5", "11520", "0.01", "0.01", "0.01", "0.02", "2.0", "10.0"]])
    study_csv(b, [
        ["COS2(2,20)", "raised-cosine", "2", "20", "3690", "0.02", "0.01", "0.03", "0.04", "2.0", "1.0"],
        ["UNI(10)", "uniform", "10", "10", "2880", "0.05", "0.05", "0.06", "0.1", "2.0", "2.5"],
    ])
    rows = report_tables([str(a), str(b)], "UNI(5)")
    assert len(rows) == 3
    assert [float(r["timePercent"]) for r in rows] == [100.0, 10.0, 25.0]
    out = tmp_path / "merged.csv"
    save_report(rows, out)
    with open(out, newline="") as fh:
        records = list(csv.DictReader(fh))
    assert len(records) == 3
    assert records[1]["timePercent"] == repr(10.0)

    with pytest.raises(InputError, match="not found"):
        report_tables([str(a)], "UNI(99)")
    with pytest.raises(InputError, match="no study tables"):
        report_tables([], "UNI(5)")
    bad = tmp_path / "bad.csv"
    bad.write_text("wrong,header\n1,2\n")
    with pytest.raises(InputError, match="header"):
        report_tables([str(bad)], "UNI(5)")


# -- CLI ------------------------------------------------------------------------


@pytest.fixture(scope="module")
def cli_workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    mesh = tag_faces_near(make_sphere_mesh(RADIUS, 15.0), "mic", tuple(PATCH_CENTER), 1.0)
    mesh_path = str(root / "sphere.obj")
    tags_path = str(root / "sphere.tags")
    save_mesh(mesh, mesh_path, tags_path)
    return {"root": root, "mesh": mesh_path, "tags": tags_path}


def test_cli_grade(cli_workspace, capsys):
    root = cli_workspace["root"]
    out = str(root / "graded.obj")
    code = main([
        "grade", "--mesh", cli_workspace["mesh"], "--tags", cli_workspace["tags"],
        "--family", "uniform", "--lmin", "12", "--lmax", "12", "--patch", "mic",
        "--out", out, "--out-tags", str(root / "graded.tags"),
        "--report", str(root / "grade.json"),
    ])
    assert code == 0
    assert os.path.exists(out)
    with open(root / "grade.json") as fh:
        doc = json.load(fh)
    assert doc["label"] == "UNI(12)"
    assert doc["faces"] > 0
    assert "UNI(12)" in capsys.readouterr().out


def test_cli_calc_analytic_compare_study_report(cli_workspace, capsys):
    root = cli_workspace["root"]
    field_csv = str(root / "field.csv")
    code = main([
        "calc", "--mesh", cli_workspace["mesh"], "--tags", cli_workspace["tags"],
        "--patch", "mic", "--grid", "eqa", "--freqs", "1000:0:1",
        "--out", field_csv,
    ])
    assert code == 0
    with open(f"{field_csv}.manifest.json") as fh:
        manifest = json.load(fh)
    assert manifest["mesh"].startswith("sha256:")
    assert len(manifest["per_frequency_seconds"]) == 1
    assert manifest["peak_memory_mb"] > 0

    ref_csv = str(root / "ref.csv")
    code = main([
        "analytic", "--sphere-radius", str(RADIUS),
        "--source", f"0,{RADIUS + 0.001},0", "--grid", "eqa",
        "--freqs", "1000:0:1", "--out", ref_csv,
    ])
    assert code == 0

    report_json = str(root / "compare.json")
    code = main([
        "compare", "--field", field_csv, "--reference", ref_csv,
        "--grid", "eqa", "--out", report_json,
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "%" in out
    with open(report_json) as fh:
        doc = json.load(fh)
    assert 0.0 < doc["e_l2"]["all"] < 0.5

    study_cfg = {
        "grid": "eqa",
        "freqs_hz": [1000.0],
        "patch": "mic",
        "reference": {"csv": "ref.csv"},
        "variants": [{"label": "UNI(15)", "mesh": "sphere.obj", "tags": "sphere.tags"}],
    }
    cfg_path = root / "study.json"
    cfg_path.write_text(json.dumps(study_cfg))
    study_out = str(root / "study.csv")
    code = main(["study", "--config", str(cfg_path), "--out", study_out])
    assert code == 0
    with open(study_out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 2 and rows[1][0] == "UNI(15)"
    assert float(rows[1][10]) > 0

    merged = str(root / "merged.csv")
    code = main(["report", study_out, "--reference", "UNI(15)", "--out", merged])
    assert code == 0
    assert "100.0 %" in capsys.readouterr().out


def test_cli_field_matches_library_route(cli_workspace):
    from gradedbem.grids import make_eqa_grid
    from gradedbem.meshio import load_mesh
    from gradedbem.pipeline import calc_field

    mesh = load_mesh(cli_workspace["mesh"], cli_workspace["tags"])
    grid = make_eqa_grid(radius_m=1.2)
    expected, _ = calc_field(mesh, "mic", grid, [1000.0])
    loaded = PressureField.load_csv(str(cli_workspace["root"] / "field.csv"))
    assert np.array_equal(loaded.freqs_hz, expected.freqs_hz)
    assert np.allclose(loaded.values, expected.values, rtol=1e-12, atol=0)


def test_cli_exit_codes(cli_workspace, tmp_path, capsys):
    code = main([
        "calc", "--mesh", str(tmp_path / "absent.obj"), "--patch", "mic",
        "--grid", "eqa", "--freqs", "1000:0:1", "--out", str(tmp_path / "f.csv"),
    ])
    assert code == 3
    assert "error[input]" in capsys.readouterr().err

    code = main([
        "calc", "--mesh", cli_workspace["mesh"], "--tags", cli_workspace["tags"],
        "--patch", "mic", "--grid", "eqa", "--freqs=-500:0:1",
        "--out", str(tmp_path / "f.csv"),
    ])
    assert code == 2
    assert "error[config]" in capsys.readouterr().err

    cfg = tmp_path / "study.json"
    cfg.write_text(json.dumps({"grid": "eqa", "bogus": 1}))
    code = main(["study", "--config", str(cfg), "--out", str(tmp_path / "s.csv")])
    assert code == 2
    assert "error[config]" in capsys.readouterr().err

    with pytest.raises(SystemExit) as excinfo:
        main(["report", "--reference", "x", "--out", str(tmp_path / "r.csv")])
    assert excinfo.value.code == 2


def test_cli_run_pipeline(tmp_path, capsys):
    data = base_config(tmp_path)
    del data["compare"]
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(data))
    code = main(["run", str(cfg)])
    assert code == 0
    assert "status: ok" in capsys.readouterr().out

    data["calc"]["patch"] = "nosuchlabel"
    cfg.write_text(json.dumps(data))
    code = main(["run", str(cfg)])
    assert code == 3
    assert "error[input]" in capsys.readouterr().err
    saved = RunManifest.load(os.path.join(data["output_dir"], "manifest.json"))
    assert saved.status == "failed"
