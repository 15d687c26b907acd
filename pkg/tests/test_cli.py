import json

import pytest

from dealbench.cli import main


def test_run_and_metrics(make_config, tmp_path, capsys):
    cfg = make_config(baseline_pair=["alpha", "beta"])
    assert main(["run", "--config", str(cfg)]) == 0
    reports = tmp_path / "run" / "reports"
    assert {p.name for p in reports.iterdir()} >= {"cells.csv", "models.csv", "report.md", "heatmap_long.csv"}
    assert main(["metrics", str(tmp_path / "run"), "--out", str(tmp_path / "m"), "--rp-mode", "category"]) == 0
    assert (tmp_path / "m" / "models.csv").exists()


def test_run_dry(make_config, capsys):
    assert main(["run", "--config", str(make_config()), "--dry-run"]) == 0
    assert json.loads(capsys.readouterr().out)["jobs"] == 32


def test_config_error_exit(tmp_path, make_config):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2
    assert main(["run", "--config", str(make_config(trials_per_cell=0))]) == 2
    assert main(["metrics", str(tmp_path), "--baseline", "onlyone"]) == 2


def test_abort_breach_exit(tmp_path, monkeypatch):
    from conftest import scripted_config_dict

    monkeypatch.setenv("DEALBENCH_TEST_KEY", "x")
    d = scripted_config_dict(buyers=["remote"], sellers=["alpha"], budget_levels=["mid"],
                             products_sample={"count": 2, "seed": 0})
    d["endpoints"]["remote"] = {"kind": "remote", "base_url": "http://127.0.0.1:9/v1", "model": "m",
                                "key_env": "DEALBENCH_TEST_KEY", "timeout": 0.5, "max_retries": 0}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(d))
    assert main(["run", "--config", str(path)]) == 3


def test_no_data_exit(tmp_path):
    assert main(["metrics", str(tmp_path)]) == 4


def test_catalog_validate(tmp_path, capsys):
    good = tmp_path / "c.json"
    good.write_text(json.dumps([{"Product Name": "Lamp", "Retail Price": "$1,200", "Wholesale Price": "800", "Reference": "",
                                 "Features": "brass"}]))
    assert main(["catalog", "validate", str(good)]) == 0
    assert "1200.00" in capsys.readouterr().out
    bad = tmp_path / "b.json"
    bad.write_text(json.dumps([{"Product Name": "Lamp", "Retail Price": "cheap", "Wholesale Price": "800", "Features": "", "Reference": ""}]))
    assert main(["catalog", "validate", str(bad)]) == 2
    assert main(["catalog", "validate", str(tmp_path / "none.json")]) == 2


def test_prompts_show(capsys):
    assert main(["prompts", "show", "--role", "buyer_system", "--action", "5"]) == 0
    out = capsys.readouterr().out
    assert "budget" in out.lower()
    assert main(["prompts", "show", "--role", "judge", "--action", "96"]) == 2


def test_optimize(tmp_path, capsys):
    out = tmp_path / "opt"
    assert main(["optimize", "--steps", "40", "--seed", "3", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert 0 <= summary["best_action"] < 96 and len(summary["theta"]) == 96
    assert len((out / "history.jsonl").read_text().splitlines()) == 192 + 40
    assert main(["optimize", "--steps", "40", "--out", str(tmp_path / "x"), "--env", "live"]) == 2


def test_optimize_reproducible(tmp_path):
    for name in ("a", "b"):
        assert main(["optimize", "--steps", "30", "--seed", "1", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a" / "history.jsonl").read_bytes() == (tmp_path / "b" / "history.jsonl").read_bytes()
