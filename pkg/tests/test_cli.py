import csv
import io
import json
import re
import subprocess
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from thermolim.cli import main
from thermolim.errors import UsageError
from thermolim.groups import Group, SiteSet
from thermolim.hamiltonian import anderson_matrix
from thermolim.plotting import Series, emit_plot, series_from_csv
from thermolim.runner import ConfigError, load_schema, run_experiment, validate_config
from thermolim.spectral import counting_function, eigenvalues

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_shipped_configs_validate():
    names = sorted(CONFIGS.glob("*.json"))
    assert names
    for p in names:
        validate_config(json.loads(p.read_text()))


@pytest.mark.parametrize("cfg, pointer", [
    ({"experiment": "nope"}, "/experiment"),
    ({"experiment": "tile", "group": {"kind": "zd", "d": 2}, "params": {"eps": [0.2]}}, "/params/eps/0"),
    ({"experiment": "bounds", "group": {"kind": "zd", "d": 1},
      "model": {"kind": "anderson", "potential": {"kind": "bernoulli", "p": 0.5}},
      "params": {"sizes": [4], "windows": [2]}}, "/params/sizes/0"),
    ({"experiment": "bounds", "group": {"kind": "zd", "d": 1},
      "model": {"kind": "anderson", "potential": {"kind": "interval", "lo": 0, "hi": 1}},
      "params": {"sizes": [16], "windows": [2]}}, "/model/potential"),
    ({"experiment": "ids", "group": {"kind": "zd", "d": 1}, "model": {"kind": "anderson"},
      "params": {"sizes": [8], "extra": 1}}, "/params"),
])
def test_validate_reports_pointer(tmp_path, capsys, cfg, pointer):
    assert main(["validate", write(tmp_path, cfg)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["pointer"] == pointer and err["error"] == "config"
    with pytest.raises(ConfigError):
        validate_config(cfg)


def test_validate_ok(capsys):
    assert main(["validate", str(CONFIGS / "tile_z2.json")]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def read_csv(path):
    return list(csv.DictReader(io.StringIO(Path(path).read_text())))


def test_ids_experiment_errors_decrease(tmp_path):
    cfg = json.loads((CONFIGS / "ids_free_laplacian.json").read_text())
    cfg["params"]["sizes"] = [64, 128, 256]
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path / "out")]) == 0
    rows = read_csv(tmp_path / "out" / "ids.csv")
    errs = [float(r["sup_error[states per site]"]) for r in rows]
    sizes = [int(r["size[sites per side]"]) for r in rows]
    assert sizes == [64, 128, 256] and errs == sorted(errs, reverse=True)
    assert all(e <= 4 / L for e, L in zip(errs, sizes))
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    jsonschema.validate(manifest, load_schema("manifest"))
    assert {o["path"] for o in manifest["outputs"]} >= {"ids.csv", "ids_error.svg", "counting.svg",
                                                        "counting_size64.csv"}


def test_tile_experiment_passes(tmp_path):
    cfg = {"experiment": "tile", "group": {"kind": "zd", "d": 2}, "params": {"eps": [0.09], "region": [120, 120]}}
    man = run_experiment(cfg, out=tmp_path)
    assert man.exit_code == 0
    row = read_csv(tmp_path / "tile.csv")[0]
    assert row["passed"] == "true" and float(row["uncovered_fraction[fraction of region]"]) <= 0.18
    doc = json.loads((tmp_path / "tiling_eps0.089999999999999997.json").read_text())
    jsonschema.validate(doc, load_schema("quasi-tiling"))


def test_csv_outputs_identical_across_runs_and_workers(tmp_path):
    cfg = json.loads((CONFIGS / "bounds_anderson_1d.json").read_text())
    cfg["params"]["realizations"] = 4
    a = run_experiment(cfg, workers=1, out=tmp_path / "a")
    b = run_experiment(cfg, workers=3, out=tmp_path / "b")
    c = run_experiment(cfg, workers=1, out=tmp_path / "c")
    csvs = [n for n in a.files if n.endswith(".csv")]
    assert csvs
    for n in csvs:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() == (tmp_path / "c" / n).read_bytes()
    assert a.data["config_hash"] == b.data["config_hash"]
    assert all(row["pass"] == "true" for row in read_csv(tmp_path / "a" / "bounds.csv"))


def test_seed_override_changes_results(tmp_path):
    cfg = {"experiment": "gc", "params": {"n": [50], "realizations": 3}}
    a = run_experiment(cfg, out=tmp_path / "a", seed=1)
    b = run_experiment(cfg, out=tmp_path / "b", seed=2)
    assert a.files["gc.csv"] != b.files["gc.csv"]
    assert a.data["config_hash"] != b.data["config_hash"]
    assert "gc_concentration.csv" in a.files


def test_partial_failure_exit_code(tmp_path):
    # a region too small for the largest tile makes that task fail without aborting the run
    cfg = {"experiment": "tile", "group": {"kind": "zd", "d": 2}, "params": {"eps": [0.09], "region": [10, 10]}}
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 3
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["status"] == "partial" and man["failures"][0]["index"] == 0


def test_report_experiment(tmp_path):
    cfg = json.loads((CONFIGS / "report_anderson_2d.json").read_text())
    cfg["params"]["realizations"] = 1
    man = run_experiment(cfg, out=tmp_path)
    report = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(report, load_schema("report"))
    bounds = [s for s in report["sections"] if s["name"] == "bounds"][0]
    assert bounds["summary"]["violations"] == 0 and man.exit_code == 0


def test_csv_headers_name_units(tmp_path):
    cfg = json.loads((CONFIGS / "freq_visible.json").read_text())
    cfg["params"]["sizes"] = [40]
    man = run_experiment(cfg, out=tmp_path)
    header = man.files["freq.csv"].splitlines()[0].split(",")
    assert all("[" in h for h in header[2:])


def test_plot_step_3x3_anderson_box(tmp_path):
    box = SiteSet.cube(Group.zd(2), 3)
    pot = np.random.default_rng(0).uniform(0, 1, 9)
    n = counting_function(eigenvalues(anderson_matrix(box, pot)))
    src = tmp_path / "n.csv"
    src.write_text(n.to_csv())
    out = tmp_path / "n.svg"
    assert main(["plot", str(src), "--kind", "step", "--out", str(out)]) == 0
    svg = out.read_text()
    assert svg.count('class="riser"') == 9 and svg.startswith("<svg")
    risers = re.findall(r'class="riser" x1="([\d.]+)" y1="([\d.]+)" x2="([\d.]+)" y2="([\d.]+)"', svg)
    # risers go up: a jump of a nondecreasing function moves the SVG y coordinate upward (smaller)
    assert all(float(y2) < float(y1) for _, y1, _, y2 in risers)


def test_plot_loglog_line_is_straight_for_power_law():
    xs = np.array([16, 32, 64, 128, 256], dtype=float)
    svg = emit_plot([Series(xs, 3 / xs, "err")], "line", log_x=True, log_y=True)
    pts = re.search(r'<polyline points="([^"]+)"', svg).group(1).split()
    xy = np.array([[float(v) for v in p.split(",")] for p in pts])
    slopes = np.diff(xy[:, 1]) / np.diff(xy[:, 0])
    assert np.allclose(slopes, slopes[0], atol=1e-3)


def test_plot_empty_input_errors(tmp_path, capsys):
    with pytest.raises(UsageError):
        emit_plot([])
    src = tmp_path / "empty.csv"
    src.write_text("a,b\n")
    assert main(["plot", str(src), "--out", str(tmp_path / "x.svg")]) == 2
    assert "error" in capsys.readouterr().err


def test_plot_grouped_line_series(tmp_path):
    text = "n,err,group\n1,0.5,a\n2,0.25,a\n1,0.4,b\n2,0.2,b\n"
    series = series_from_csv(text, "line", "n", "err", "group")
    assert [s.label for s in series] == ["group=a", "group=b"]
    svg = emit_plot(series, "line")
    assert svg.count("<polyline") == 2 and svg.count('class="legend"') == 2


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "thermolim.cli", "validate", str(CONFIGS / "gc_uniform.json")],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "ok"
