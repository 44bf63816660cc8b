import csv
import io
import json
import xml.etree.ElementTree as ET

import pytest

from phtess import cli
from phtess.cli import ConfigError, load_config, main

SMALL = {"dimension": 2, "window_radius": 12.0, "radii": [1.5, 2.25, 3.0], "replicates": 2,
         "event": {"trials": 0, "conditional": 0, "density_check": False}}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def _run(tmp_path, cmd, cfg, *extra, out="out"):
    code = main([cmd, "--config", _write(tmp_path, cfg), "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def test_defaults_filled_in():
    cfg = load_config({})
    assert cfg["dimension"] == 2 and cfg["seeds"] == [0]
    assert cfg["sample_radius"] == pytest.approx(20.0 * 2 ** 0.5)
    assert len(cfg["radii"]) == 10 and cfg["radii"][-1] == pytest.approx(10.0)
    assert load_config({}, seed=5, replicates=3)["seeds"] == [5, 6, 7]


@pytest.mark.parametrize("bad", [
    {"dimension": 1},
    {"replicates": 0},
    {"unknown_key": 1},
    {"radii": [5.0, 25.0]},
    {"distribution": {"kind": "density", "name": "nope"}},
    {"window_radius": 10.0, "sample_radius": 5.0},
])
def test_invalid_config_rejected(bad, tmp_path):
    with pytest.raises(ConfigError):
        load_config(bad)
    code, _ = _run(tmp_path, "census", bad)
    assert code == cli.EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert main(["census", "--config", str(tmp_path / "none.json")]) == cli.EXIT_CONFIG


def test_census_outputs(tmp_path):
    code, out = _run(tmp_path, "census", SMALL)
    assert code == 0
    rows = list(csv.reader(io.StringIO((out / "census.csv").read_bytes().decode())))
    assert rows[0][:3] == ["seed", "n", "fingerprint"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_ok"] == 2 and summary["n_fingerprints"] >= 1
    observed = {r[2] for r in rows[1:]}
    assert observed == {t["fingerprint"] for t in summary["types"]}
    assert summary["config"]["window_radius"] == 12.0          # defaults echoed
    assert summary["config"]["tolerances"]["sigmas"] == 3.0
    assert not summary["hypotheses"]["hypotheses_violated"]
    assert {v["verdict"] for v in summary["catalog"]} <= {"positive", "sporadic", "not_observed"}
    assert (out / "census.csv").read_bytes().count(b"\r\n") == len(rows)


def test_negative_control(tmp_path):
    cfg = dict(SMALL, distribution={"kind": "atomic", "atoms": [[[1, 0], 0.5], [[0, 1], 0.5]]})
    code, out = _run(tmp_path, "census", cfg)
    s = json.loads((out / "summary.json").read_text())
    assert code == 0
    assert s["hypotheses"]["hypotheses_violated"]
    assert [t["name"] for t in s["types"]] == ["4-gon"]


def test_repeat_and_thread_determinism(tmp_path):
    cfg = dict(SMALL, replicates=3, render=True)
    outs = []
    for i, threads in enumerate(["1", "1", "3"]):
        code, out = _run(tmp_path, "census", cfg, "--threads", threads, out=f"o{i}")
        assert code == 0
        outs.append({p.name: p.read_bytes() for p in out.iterdir()})
    assert outs[0] == outs[1] == outs[2]
    assert set(outs[0]) == {"census.csv", "census_aggregate.csv", "summary.json", "render.svg"}


def test_failed_seed_does_not_abort(tmp_path, monkeypatch):
    real = cli.sample_process

    def flaky(dist, intensity, radius, seed, stream=0):
        if seed == 1:
            raise RuntimeError("synthetic failure")
        return real(dist, intensity, radius, seed, stream)

    monkeypatch.setattr(cli, "sample_process", flaky)
    code, out = _run(tmp_path, "census", dict(SMALL, replicates=3))
    s = json.loads((out / "summary.json").read_text())
    assert code == 0 and s["n_ok"] == 2 and s["n_failed"] == 1
    bad = [x for x in s["seeds"] if x["seed"] == 1][0]
    assert bad["status"] == "error" and "synthetic" in bad["message"]


def test_radius_failure_recorded(tmp_path):
    cfg = dict(SMALL, radii=[11.5], sample_radius=12.0)
    code, out = _run(tmp_path, "census", cfg)
    s = json.loads((out / "summary.json").read_text())
    assert code == 0 and s["n_ok"] == 0
    assert {x["status"] for x in s["seeds"]} == {"radius"}


SQUARE = {"name": "square", "eps": 0.1, "D": 3.0, "draws": 50}


def test_event_zero_trials(tmp_path):
    cfg = dict(SMALL, targets=[SQUARE])
    code, out = _run(tmp_path, "event", cfg)
    doc = json.loads((out / "event.json").read_text())
    (block,) = doc["targets"]
    assert code == 0 and block["analytic_p"] > 0
    assert block["mc_freq"] is None and block["ci"] is None and block["agrees"] is None


def test_event_two_targets_in_order(tmp_path):
    cfg = dict(SMALL, targets=[dict(SQUARE, name="5-gon", eps=0.02), SQUARE],
               event={"trials": 40, "conditional": 5, "density_check": False})
    code, out = _run(tmp_path, "event", cfg)
    doc = json.loads((out / "event.json").read_text())
    assert code == 0
    assert [b["target"]["name"] for b in doc["targets"]] == ["5-gon", "square"]
    for b in doc["targets"]:
        assert b["trials"] == 40 and b["bullets_pass_rate"] == 1.0
        assert b["ci"][0] <= b["mc_freq"] <= b["ci"][1]


def test_event_refusal_names_pair(tmp_path, capsys):
    cfg = dict(SMALL, targets=[dict(SQUARE, eps=0.5)])
    code, out = _run(tmp_path, "event", cfg)
    assert code == cli.EXIT_REFUSED
    assert "A_" in capsys.readouterr().err
    doc = json.loads((out / "event.json").read_text())
    assert doc["refused"][0]["certificate"]["failing_pair"] is not None


def test_certify_subcommand(tmp_path):
    code, out = _run(tmp_path, "certify", dict(SMALL, targets=[SQUARE]))
    doc = json.loads((out / "certificates.json").read_text())
    assert code == 0 and doc["targets"][0]["certificate"]["granted"]
    code, _ = _run(tmp_path, "certify", dict(SMALL, targets=[dict(SQUARE, D=1.0)]), out="o2")
    assert code == cli.EXIT_REFUSED


def test_target_dimension_mismatch(tmp_path):
    code, _ = _run(tmp_path, "certify", dict(SMALL, targets=[dict(SQUARE, name="cube")]))
    assert code == cli.EXIT_CONFIG


def test_render_is_valid_svg(tmp_path):
    code, out = _run(tmp_path, "render", SMALL)
    root = ET.fromstring((out / "render.svg").read_text())
    assert code == 0 and root.tag.endswith("svg")
    assert len(root.findall(".//{http://www.w3.org/2000/svg}polygon")) > 10
    code, _ = _run(tmp_path, "render", dict(SMALL, dimension=3), out="o3")
    assert code == cli.EXIT_CONFIG


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "phtess", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
