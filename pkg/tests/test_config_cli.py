import json
import os
import subprocess
import sys
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from steersim.cli import main
from steersim.config import RunConfig
from steersim.errors import ConfigError
from steersim.metrics import roc_curve
from steersim.report import line_chart_svg, roc_svg

SMALL = {
    "seed": 7,
    "flows": {"n_flows": 1500},
    "radio": {"n_samples": 1500},
    "trajectories": {"routes": 3, "devices_per_route": 6, "held_out_per_route": 2},
    "forest": {"n_trees": 10, "max_depth": 8},
    "steering": {"n_devices": 50, "replications": 3},
}


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(SMALL))
    return path


def run(*argv):
    return main([str(a) for a in argv])


# -- config --------------------------------------------------------------------

def test_defaults_round_trip():
    cfg = RunConfig.from_dict({"seed": 5})
    assert RunConfig.from_dict(cfg.to_dict()) == cfg
    assert RunConfig.from_dict({}) == RunConfig().with_seed(0)


def test_hash_ignores_output_dir_but_not_seed():
    a = RunConfig.from_dict({"seed": 1, "output_dir": "x"})
    b = RunConfig.from_dict({"seed": 1, "output_dir": "y"})
    c = RunConfig.from_dict({"seed": 2})
    assert a.hash == b.hash != c.hash
    assert len(a.hash) == 16


def test_global_seed_drives_stage_seeds():
    a, b = RunConfig().with_seed(1), RunConfig().with_seed(2)
    assert a.env.seed != b.env.seed and a.flows.seed != b.flows.seed
    assert a.stage_seed("steer") != a.stage_seed("mobility")
    assert a.with_seed(1) == a


@pytest.mark.parametrize(
    "data, path",
    [
        ({"env": {"shadow_correlation": 1.5}}, "env.shadow_correlation"),
        ({"flows": {"seed": 3}}, "flows.seed"),
        ({"forest": {"depth": 3}}, "forest.depth"),
        ({"steering": {"fractions": [0.0, 0.5]}}, "steering.fractions"),
        ({"steering": {"combine": "max"}}, "steering.combine"),
        ({"mobility": {"prefix_fraction": 1.0}}, "mobility.prefix_fraction"),
        ({"colour": "blue"}, "colour"),
        ({"seed": -1}, "seed"),
        ({"env": [1, 2]}, "env"),
    ],
)
def test_invalid_configs_name_the_field(data, path):
    with pytest.raises(ConfigError) as err:
        RunConfig.from_dict(data)
    assert path in str(err.value)


def test_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{ nope")
    with pytest.raises(ConfigError, match="invalid JSON"):
        RunConfig.load(p)


# -- cli -------------------------------------------------------------------------

def test_empty_corpus(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"flows": {"n_flows": 0}, "radio": {"n_samples": 0}}))
    assert run("gen-flows", "--config", cfg, "--out", tmp_path) == 0
    assert run("gen-radio", "--config", cfg, "--out", tmp_path) == 0
    assert (tmp_path / "flows.jsonl").read_text() == ""
    assert (tmp_path / "radio.jsonl").read_text() == ""
    assert json.loads((tmp_path / "flows.manifest.json").read_text())["records"] == 0


def test_missing_input_is_reported(tmp_path, capsys):
    assert run("train-traffic", "--out", tmp_path, "--data", tmp_path / "none.jsonl") == 1
    err = capsys.readouterr().err
    assert err.startswith("steersim: error:") and "none.jsonl" in err


def test_invalid_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"env": {"shadow_correlation": 1.5}}))
    assert run("gen-radio", "--config", cfg, "--out", tmp_path) == 1
    assert "env.shadow_correlation" in capsys.readouterr().err


def test_negative_seed_flag(tmp_path):
    assert run("gen-flows", "--out", tmp_path, "--seed", -3) == 1


def test_too_few_trajectories_for_k(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"trajectories": {"routes": 1, "devices_per_route": 2},
                               "mobility": {"k_routes": 5}}))
    assert run("gen-trajectories", "--config", cfg, "--out", tmp_path) == 0
    assert run("mobility", "--config", cfg, "--out", tmp_path) == 1
    assert "cannot form 5 routes" in capsys.readouterr().err


@pytest.fixture(scope="module")
def report_dirs(tmp_path_factory):
    base = tmp_path_factory.mktemp("report")
    cfg = base / "run.json"
    cfg.write_text(json.dumps(SMALL))
    outs = []
    for name in ("a", "b"):
        out = base / name
        assert main(["report", "--config", str(cfg), "--out", str(out)]) == 0
        outs.append(out)
    return outs


def test_report_is_byte_identical(report_dirs):
    a, b = report_dirs
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_report_artifacts(report_dirs):
    out = report_dirs[0]
    for tag in ("1kB", "10kB", "100kB"):
        lines = (out / f"roc_traffic_{tag}.csv").read_text().splitlines()
        assert lines[0] == "fpr,tpr,threshold"
    header, *rows = (out / "steering_curves.csv").read_text().splitlines()
    assert {r.split(",")[0] for r in rows} == {"Random", "Traffic", "Coverage", "CoverageTraffic"}
    for svg in out.glob("*.svg"):
        assert ET.parse(svg).getroot().tag.endswith("svg")
    cfg = RunConfig.from_dict(SMALL)
    for manifest in out.glob("*.manifest.json"):
        body = json.loads(manifest.read_text())
        assert body["config_hash"] == cfg.hash and body["seed"] == 7
    mob = json.loads((out / "mobility_report.json").read_text())
    assert 0.0 <= mob["route_top1_accuracy"] <= 1.0


def test_auc_print_format(report_dirs, capsys):
    out = report_dirs[0]
    assert main(["train-coverage", "--config", str(out.parent / "run.json"), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    line = next(ln for ln in text.splitlines() if ln.startswith("coverage AUC: "))
    value = line.split(": ")[1]
    assert len(value.split(".")[1]) == 3 and 0.5 < float(value) <= 1.0


def test_seed_flag_changes_outputs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"flows": {"n_flows": 50}}))
    run("gen-flows", "--config", cfg, "--out", a, "--seed", 1)
    run("gen-flows", "--config", cfg, "--out", b, "--seed", 2)
    assert (a / "flows.jsonl").read_text() != (b / "flows.jsonl").read_text()


def test_log_level_env(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"flows": {"n_flows": 20}}))
    env = {**os.environ, "STEERSIM_LOG": "info"}
    proc = subprocess.run([sys.executable, "-m", "steersim.cli", "gen-flows", "--config", str(cfg),
                           "--out", str(tmp_path)], env=env, capture_output=True, text=True)
    assert proc.returncode == 0 and "wrote 20 flows" in proc.stderr
    env["STEERSIM_LOG"] = "error"
    proc = subprocess.run([sys.executable, "-m", "steersim.cli", "gen-flows", "--config", str(cfg),
                           "--out", str(tmp_path)], env=env, capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stderr == ""


# -- svg -----------------------------------------------------------------------

def test_line_chart_is_valid_xml():
    svg = line_chart_svg({"a & b": ([0.01, 0.1, 1.0], [1.0, 10.0, 100.0])}, title="t<1>", xlabel="x", ylabel="y",
                         log_x=True, log_y=True)
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert "a &amp; b" in svg


def test_roc_chart_contains_each_curve():
    c = roc_curve([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
    svg = roc_svg({"first": c, "second": c})
    ET.fromstring(svg)
    assert "first" in svg and "second" in svg
