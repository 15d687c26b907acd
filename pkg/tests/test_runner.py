import json
from decimal import Decimal
from pathlib import Path

import pytest

from conftest import scripted_config_dict
from dealbench.catalog import Product
from dealbench.metrics import NoData
from dealbench.runner import (
    EXIT_ABORTS,
    EXIT_OK,
    MANIFEST,
    TIMINGS,
    TRANSCRIPTS,
    ConfigError,
    EmptyMatrix,
    ExperimentConfig,
    UnsupportedFormat,
    aggregate,
    emit_report,
    execute,
    job_seed,
    load_config,
    plan_matrix,
    read_transcripts,
    write_reports,
)


def _config(tmp_path, **kw) -> ExperimentConfig:
    return ExperimentConfig.from_dict(scripted_config_dict(**kw), base_dir=tmp_path)


def _products(n):
    return [Product(f"item-{i}", Decimal(100 + i), Decimal(60 + i), "thing") for i in range(n)]


def test_full_matrix_size():
    names = [f"m{i}" for i in range(9)]
    cfg = ExperimentConfig.from_dict(scripted_config_dict(
        buyers=names, sellers=names, budget_levels=["high", "retail", "mid", "wholesale", "low"],
        products_sample={"count": 50, "seed": 0}))
    plan = plan_matrix(cfg, _products(50), list(range(50)))
    assert len(plan) == 20250
    assert len({j.job_id for j in plan}) == 20250
    assert sum(j.buyer == j.seller for j in plan) == 9 * 250


def test_single_job_plan(tmp_path):
    cfg = _config(tmp_path, buyers=["a"], sellers=["a"], budget_levels=["mid"],
                  products_sample={"count": 1, "seed": 0})
    plan = plan_matrix(cfg)
    assert len(plan) == 1 and plan[0].buyer == plan[0].seller == "a"
    res = execute(plan, cfg)
    assert res.completed == 1 and res.exit_code == EXIT_OK


def test_plan_is_deterministic_and_seeded(tmp_path):
    cfg = _config(tmp_path, trials_per_cell=2)
    a, b = plan_matrix(cfg), plan_matrix(cfg)
    assert [(j.job_id, j.seed) for j in a] == [(j.job_id, j.seed) for j in b]
    assert len({j.seed for j in a}) == len(a)
    j = a[3]
    assert j.seed == job_seed(cfg.seed, j.buyer, j.seller, j.product.name, j.budget_level, j.trial)
    assert j.job_id == f"{j.buyer}:{j.seller}:{j.product_index}:{j.budget_level}:{j.trial}"


def test_empty_matrix(tmp_path):
    cfg = _config(tmp_path, budget_levels=[])
    with pytest.raises(EmptyMatrix):
        plan_matrix(cfg)


@pytest.mark.parametrize("override", [
    {"trials_per_cell": 0},
    {"parallelism": 0},
    {"abort_threshold": 1.5},
    {"budget_levels": ["huge"]},
    {"buyer_models": ["ghost"]},
    {"judge_backend": "remote"},
    {"surprise": 1},
    {"endpoints": {"alpha": {"kind": "scripted", "step_ratio": -1}, "beta": {}}},
    {"endpoints": {"alpha": {"kind": "carrier-pigeon"}, "beta": {}}},
])
def test_config_errors(tmp_path, override):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(scripted_config_dict(**override), base_dir=tmp_path)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_parallel_execution_matches_serial(tmp_path):
    serial = _config(tmp_path, output_dir="serial", products_sample={"count": 5, "seed": 3},
                     buyers=["alpha"], sellers=["alpha", "beta"], budget_levels=["mid"])
    par = _config(tmp_path, output_dir="par", products_sample={"count": 5, "seed": 3},
                  buyers=["alpha"], sellers=["alpha", "beta"], budget_levels=["mid"], parallelism=4)
    plan = plan_matrix(serial)
    assert len(plan) == 10
    r1, r2 = execute(plan, serial), execute(plan_matrix(par), par)
    assert r1.completed == r2.completed == 10
    assert (r1.run_dir / TRANSCRIPTS).read_bytes() == (r2.run_dir / TRANSCRIPTS).read_bytes()
    lines = (r2.run_dir / TRANSCRIPTS).read_text().splitlines()
    assert [json.loads(x)["plan_index"] for x in lines] == list(range(10))
    assert len((r2.run_dir / TIMINGS).read_text().splitlines()) == 10


def test_manifest_contents(tmp_path):
    cfg = _config(tmp_path)
    res = execute(plan_matrix(cfg), cfg)
    m = json.loads((res.run_dir / MANIFEST).read_text())
    assert m["config_hash"] == cfg.digest() and m["plan_size"] == 32
    assert set(m) >= {"catalog_hash", "template_hashes", "seeds", "sampled_products", "versions"}
    assert len(m["sampled_products"]) == 4


def test_resume_refuses_other_config(tmp_path):
    cfg = _config(tmp_path)
    execute(plan_matrix(cfg), cfg)
    other = _config(tmp_path, t_max=12)
    with pytest.raises(ConfigError):
        execute(plan_matrix(other), other)


def test_kill_and_resume_is_byte_identical(tmp_path):
    ref_cfg = _config(tmp_path, output_dir="ref")
    cut_cfg = _config(tmp_path, output_dir="cut")
    plan = plan_matrix(ref_cfg)
    ref = execute(plan, ref_cfg)

    part = execute(plan, cut_cfg, max_jobs=7)
    assert part.completed == 7
    tpath = part.run_dir / TRANSCRIPTS
    with open(tpath, "ab") as fh:  # a record cut off mid-write
        fh.write(b'{"job_id": "alpha:alpha:0:hi')
    assert len(read_transcripts(tpath)) == 7

    done = execute(plan, cut_cfg)
    assert done.skipped == 7 and done.completed == 32
    assert tpath.read_bytes() == (ref.run_dir / TRANSCRIPTS).read_bytes()
    write_reports(ref.run_dir)
    write_reports(done.run_dir)
    for name in ("cells.csv", "models.csv", "report.md", "heatmap_long.csv"):
        assert (ref.run_dir / "reports" / name).read_bytes() == (done.run_dir / "reports" / name).read_bytes()

    again = execute(plan, cut_cfg)
    assert again.skipped == 32 and tpath.read_bytes() == (ref.run_dir / TRANSCRIPTS).read_bytes()


def test_unreachable_endpoint_aborts_everything(tmp_path, monkeypatch):
    monkeypatch.setenv("DEALBENCH_TEST_KEY", "x")
    d = scripted_config_dict(buyers=["remote"], sellers=["alpha"], budget_levels=["mid"],
                             products_sample={"count": 3, "seed": 0})
    d["endpoints"]["remote"] = {"kind": "remote", "base_url": "http://127.0.0.1:9/v1", "model": "m",
                                "key_env": "DEALBENCH_TEST_KEY", "timeout": 0.5, "max_retries": 0}
    cfg = ExperimentConfig.from_dict(d, base_dir=tmp_path)
    res = execute(plan_matrix(cfg), cfg)
    assert res.aborted == 3 and res.completed == 0
    assert res.abort_fraction == 1.0 and res.exit_code == EXIT_ABORTS
    recs = read_transcripts(res.run_dir / TRANSCRIPTS)
    assert all(r["status"] == "aborted" and r["error"] for r in recs)
    with pytest.raises(NoData):
        aggregate(res.run_dir)


def test_aggregate_empty_dir(tmp_path):
    with pytest.raises(NoData):
        aggregate(tmp_path)


@pytest.fixture
def finished_run(tmp_path):
    cfg = _config(tmp_path, budget_levels=["high", "mid", "low"])
    return execute(plan_matrix(cfg), cfg).run_dir


def test_emit_formats(finished_run, tmp_path):
    report = aggregate(finished_run)
    out = tmp_path / "out"
    (cells, models) = emit_report(report, "csv", out)
    assert cells.read_text().splitlines()[0].startswith("buyer,seller,budget_level,n,n_deal,deal_rate,prr_mean")
    assert models.read_text().splitlines()[0].split(",")[-2:] == ["ncs", "risk_index"]
    assert len(cells.read_text().splitlines()) == 1 + 4 * 3
    (md,) = emit_report(report, "markdown", out)
    assert "| Model | Out-of-Budget | Out-of-Wholesale |" in md.read_text()
    (lng,) = emit_report(report, "long_csv", out)
    assert len(lng.read_text().splitlines()) == 1 + 4 * 3 * 8
    with pytest.raises(UnsupportedFormat):
        emit_report(report, "xlsx", out)


def test_double_aggregation_is_byte_identical(finished_run, tmp_path):
    a = write_reports(finished_run, baseline_pair=["alpha", "alpha"], out_dir=tmp_path / "a")
    b = write_reports(finished_run, baseline_pair=["alpha", "alpha"], out_dir=tmp_path / "b")
    assert [p.name for p in a] == [p.name for p in b]
    assert "imbalance.csv" in [p.name for p in a]
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()


def test_paths_resolve_relative_to_config(tmp_path, make_config, monkeypatch):
    cfg = load_config(make_config())
    assert cfg.run_dir() == tmp_path / "run"
    monkeypatch.chdir(tmp_path.parent)
    assert Path(cfg.run_dir()).is_absolute()
