import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from folverify import cli, verifier
from folverify.config import ConfigError, load_config, parse_number
from folverify.localmodel import SQRT2_M1
from folverify.report import CheckRecord, VerificationReport, load_report, report_json

HERE = Path(__file__).parent
SMALL = ["flows.horizon=600", "flows.seeds=20", "grids.kernel_instances=500", "grids.loci_points=200"]


def test_defaults_and_named_constants():
    cfg = load_config()
    assert cfg.model.c == SQRT2_M1 and cfg.flows.horizon == 1e4 and cfg.run.gamma_order == "alpha_beta"
    assert parse_number("1/2", float) == 0.5
    assert parse_number("sqrt2-1", float) == SQRT2_M1
    assert parse_number("1e4", int) == 10000


def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[model]\nc = 1/2   # rational control\n[flows]\nseeds = 7\n")
    cfg = load_config(p, ["flows.horizon=100", "eta=1e-4"])
    assert cfg.model.c == 0.5 and cfg.flows.seeds == 7 and cfg.flows.horizon == 100.0 and cfg.model.eta == 1e-4


@pytest.mark.parametrize("text,override,match", [
    ("[nonsense]\nx=1\n", [], "unknown section"),
    ("[model]\nbogus=1\n", [], "unknown key"),
    ("[model]\nK=ten\n", [], "expected a number"),
    ("", ["delta=0.2"], "invalid model parameters"),
    ("", ["gamma_order=sideways"], "must be one of"),
    ("", ["noequals"], "key=value"),
])
def test_config_errors(tmp_path, text, override, match):
    p = tmp_path / "c.ini"
    p.write_text(text)
    with pytest.raises(ConfigError, match=match):
        load_config(p, override)


def test_check_selection():
    cfg = load_config(overrides=["run.checks=kernel"])
    assert all(c.startswith("kernel.") for c in cfg.selected(verifier.REGISTRY))
    with pytest.raises(ConfigError, match="unknown check"):
        load_config(overrides=["run.checks=nope"]).selected(verifier.REGISTRY)


def test_registry_matches_manifest():
    want = (HERE / "check_manifest.txt").read_text().split()
    assert verifier.check_ids() == want


def test_checks_list(capsys):
    assert cli.main(["checks", "--list"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == len(verifier.REGISTRY) and out[0].startswith("exterior.liouville")


def test_report_json_round_trip():
    rec = [CheckRecord("a.b", "claim", "pass", math.inf, None, {"x": 0.1, "y": [1, 2]}),
           CheckRecord("a.c", "claim", "fail", 3e-7, [0.25, -1.0], {"nan": math.nan})]
    rep = VerificationReport("0", "numpy", {"model": {"c": 0.1}}, rec)
    text = report_json(rep)
    back = load_report(text)
    assert back.checks[0].margin == math.inf and back.checks[1].witness == [0.25, -1.0]
    assert report_json(back) == text
    assert "wall_time" not in text


def _run(args, tmp_path):
    return cli.main(["run", "-q", "--out", str(tmp_path), *args])


def test_cli_exit_codes(tmp_path):
    assert _run(["--set", "delta=0.2"], tmp_path / "a") == 2
    assert _run(["--config", str(tmp_path / "missing.ini")], tmp_path / "b") == 2
    sel = ["--set", "run.checks=kernel.closed_form,kernel.loci,flows.exit_event"]
    assert _run(sel + [f"--set={s}" for s in SMALL], tmp_path / "c") == 0
    data = json.loads((tmp_path / "c" / "report.json").read_text())
    assert [c["id"] for c in data["checks"]] == ["kernel.closed_form", "kernel.loci", "flows.exit_event"]


def test_rational_control_config_fails_closed_orbit_check(tmp_path):
    args = ["--set", "c=1/2", "--set", "run.checks=flows.closed_orbits", *[f"--set={s}" for s in SMALL]]
    assert _run(args, tmp_path) == 1
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["checks"][0]["status"] == "fail" and data["checks"][0]["witness"] is not None


def test_build_failure_skips_dependents_and_exits_two(tmp_path, monkeypatch):
    from folverify import pipeline as pl
    from folverify.exterior import KForm

    def bad(params):
        d = params.q + 2 * params.n
        x, y = pl.x_index, pl.y_index
        return KForm(d, 2, {(x(params, 0), y(params, 1)): 1.0, (x(params, 1), y(params, 0)): 1.0})

    monkeypatch.setattr(verifier, "example_form", bad)
    args = ["--set", "run.checks=normalize,kernel.loci", *[f"--set={s}" for s in SMALL]]
    rc = _run(args, tmp_path)
    data = json.loads((tmp_path / "report.json").read_text())
    statuses = {c["id"]: c["status"] for c in data["checks"]}
    assert rc == 2
    assert statuses["normalize.eps_box"] == "skipped" and statuses["kernel.loci"] == "pass"
    assert "DominanceError" in data["checks"][0]["witness"]


def test_csv_and_text_formats(tmp_path):
    args = ["--set", "run.checks=transversality.sign_region,flows.rotation", *[f"--set={s}" for s in SMALL]]
    assert _run(args + ["--format", "csv"], tmp_path / "csv") == 0
    rows = (tmp_path / "csv" / "checks.csv").read_text().splitlines()
    assert rows[0].startswith("id,") and len(rows) == 3
    header = (tmp_path / "csv" / "sign_region.csv").read_text().splitlines()[0]
    assert header == "z1,z2,z3,z4,d_rho_tilde_Y,sign"
    assert _run(args + ["--format", "text"], tmp_path / "txt") == 0
    assert "summary:" in (tmp_path / "txt" / "report.txt").read_text()


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "folverify.cli", "checks", "--list"], capture_output=True, text=True)
    assert r.returncode == 0 and "kernel.closed_form" in r.stdout
