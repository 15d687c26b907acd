"""Experiment matrix planning, execution with resume, aggregation and report emission."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import platform
import random
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from decimal import Decimal
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from . import __version__, prompts
from .agents import (
    AgentEndpoint,
    ChatClient,
    LLMAnalyst,
    LLMJudge,
    LLMNegotiator,
    RateLimiter,
    RuleAnalyst,
    RuleJudge,
    ScriptedNegotiator,
    ScriptedPolicy,
    Speaker,
)
from .catalog import (
    SAMPLE_CATALOG,
    BudgetLevel,
    Product,
    catalog_hash,
    derive_budget,
    format_money,
    load_catalog_file,
    sample_products,
)
from .engine import AgentFailure, NegotiationConfig, Transcript, run_negotiation
from .errors import DealbenchError
from .metrics import (
    EmptyIntersection,
    ImbalanceRow,
    MetricsReport,
    NoData,
    build_report,
    deals_from_records,
    imbalance_report,
)

log = logging.getLogger(__name__)

TRANSCRIPTS = "transcripts.jsonl"
TIMINGS = "timings.jsonl"
MANIFEST = "manifest.json"
WIRE_LOG = "wire.jsonl"

EXIT_OK, EXIT_CONFIG, EXIT_ABORTS, EXIT_NO_DATA = 0, 2, 3, 4

_NAME = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


class ConfigError(DealbenchError, ValueError):
    pass


class EmptyMatrix(ConfigError):
    pass


class UnsupportedFormat(DealbenchError, ValueError):
    pass


# -- configuration ----------------------------------------------------------

@dataclass(frozen=True)
class EndpointSpec:
    """A named agent: either a scripted concession ladder or a remote chat model."""

    name: str
    kind: str = "scripted"
    open_ratio: float = 0.7
    step_ratio: float = 0.05
    remote: AgentEndpoint | None = None

    @classmethod
    def from_dict(cls, name: str, d: Mapping) -> "EndpointSpec":
        kind = d.get("kind", "remote" if "base_url" in d else "scripted")
        try:
            if kind == "scripted":
                spec = cls(name, "scripted", float(d.get("open_ratio", 0.7)), float(d.get("step_ratio", 0.05)))
                ScriptedPolicy(Speaker.BUYER, spec.open_ratio, spec.step_ratio)  # validates the ratios
                return spec
            if kind == "remote":
                return cls(name, "remote", remote=AgentEndpoint.from_dict(dict(d)))
        except KeyError as exc:
            raise ConfigError(f"endpoint {name!r}: missing field {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"endpoint {name!r}: {exc}") from None
        raise ConfigError(f"endpoint {name!r}: unknown kind {kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "scripted":
            return {"kind": "scripted", "open_ratio": self.open_ratio, "step_ratio": self.step_ratio}
        r = self.remote
        return {"kind": "remote", "base_url": r.base_url, "model": r.model_name, "key_env": r.api_key_env,
                "timeout": r.timeout, "max_retries": r.max_retries, "temperature": r.temperature,
                "backoff_base": r.backoff_base, "backoff_factor": r.backoff_factor}


@dataclass
class ExperimentConfig:
    endpoints: dict[str, EndpointSpec]
    buyer_models: list[str]
    seller_models: list[str]
    catalog: str = "sample"
    products_sample: dict = field(default_factory=lambda: {"count": 50, "seed": 0})
    budget_levels: list[str] = field(default_factory=lambda: [lv.value for lv in BudgetLevel])
    trials_per_cell: int = 1
    t_max: int = 30
    judge_backend: str = "rule_based"
    analyst_backend: str = "rule_based"
    judge_endpoint: str | None = None
    analyst_endpoint: str | None = None
    parallelism: int = 1
    rate_limit: float | None = None
    abort_threshold: float = 0.05
    output_dir: str = "runs/latest"
    seed: int = 0
    record_wire: bool = False
    baseline_pair: list[str] | None = None
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    def __post_init__(self):
        if self.trials_per_cell < 1:
            raise ConfigError("trials_per_cell must be >= 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.t_max < 1:
            raise ConfigError("t_max must be >= 1")
        if not 0 <= self.abort_threshold <= 1:
            raise ConfigError("abort_threshold must be in [0, 1]")
        if self.rate_limit is not None and self.rate_limit <= 0:
            raise ConfigError("rate_limit must be positive")
        for name in self.endpoints:
            if not _NAME.match(name):
                raise ConfigError(f"endpoint name {name!r} must match {_NAME.pattern}")
        for name in [*self.buyer_models, *self.seller_models]:
            if name not in self.endpoints:
                raise ConfigError(f"model {name!r} has no endpoint entry")
        for lv in self.budget_levels:
            try:
                BudgetLevel(lv)
            except ValueError:
                raise ConfigError(f"unknown budget level {lv!r}") from None
        for role in ("judge", "analyst"):
            backend = getattr(self, f"{role}_backend")
            if backend not in ("rule_based", "remote"):
                raise ConfigError(f"{role}_backend must be rule_based or remote")
            ep = getattr(self, f"{role}_endpoint")
            if backend == "remote" and (ep not in self.endpoints or self.endpoints[ep].kind != "remote"):
                raise ConfigError(f"{role}_backend=remote needs {role}_endpoint naming a remote endpoint")
        if "count" not in self.products_sample or int(self.products_sample["count"]) < 1:
            raise ConfigError("products_sample.count must be >= 1")
        if self.baseline_pair is not None and len(self.baseline_pair) != 2:
            raise ConfigError("baseline_pair must be [buyer, seller]")

    @classmethod
    def from_dict(cls, d: Mapping, base_dir: Path | str = ".") -> "ExperimentConfig":
        d = dict(d)
        known = {f for f in cls.__dataclass_fields__ if f != "base_dir"}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {unknown}")
        for key in ("endpoints", "buyer_models", "seller_models"):
            if key not in d:
                raise ConfigError(f"missing config field {key!r}")
        if not isinstance(d["endpoints"], Mapping):
            raise ConfigError("endpoints must be an object")
        d["endpoints"] = {n: EndpointSpec.from_dict(n, e) for n, e in d["endpoints"].items()}
        sample = {"count": 50, "seed": 0}
        sample.update(d.get("products_sample") or {})
        d["products_sample"] = sample
        try:
            return cls(**d, base_dir=Path(base_dir))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("endpoints", "base_dir")}
        out["endpoints"] = {n: e.to_dict() for n, e in sorted(self.endpoints.items())}
        return out

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def catalog_path(self) -> Path:
        if self.catalog in ("sample", "builtin:sample"):
            return SAMPLE_CATALOG
        p = Path(self.catalog)
        return p if p.is_absolute() else self.base_dir / p

    def run_dir(self) -> Path:
        p = Path(self.output_dir)
        return p if p.is_absolute() else self.base_dir / p


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return ExperimentConfig.from_dict(data, base_dir=path.parent)


# -- planning ---------------------------------------------------------------

@dataclass(frozen=True)
class Job:
    index: int
    job_id: str
    buyer: str
    seller: str
    product_index: int
    product: Product
    budget_level: str
    trial: int
    seed: int

    @property
    def case_id(self) -> str:
        return f"{self.product_index}|{self.budget_level}|{self.trial}"


def job_seed(run_seed: int, buyer: str, seller: str, product: str, level: str, trial: int) -> int:
    key = "|".join(map(str, (run_seed, buyer, seller, product, level, trial)))
    return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "big")


def load_products(config: ExperimentConfig) -> tuple[list[Product], list[int]]:
    """Full catalog plus the sampled catalog indices."""
    path = config.catalog_path()
    try:
        products = load_catalog_file(path)
    except FileNotFoundError:
        raise ConfigError(f"catalog not found: {path}") from None
    except (DealbenchError, ValueError) as exc:
        raise ConfigError(f"catalog {path}: {exc}") from None
    picked = sample_products(products, int(config.products_sample["count"]), int(config.products_sample.get("seed", 0)))
    return products, picked


def plan_matrix(config: ExperimentConfig, products: Sequence[Product] | None = None,
                picked: Sequence[int] | None = None) -> list[Job]:
    """buyers x sellers x products x budget levels x trials, self-pairings included."""
    if products is None:
        products, picked = load_products(config)
    if picked is None:
        picked = list(range(len(products)))
    jobs = []
    for b in config.buyer_models:
        for s in config.seller_models:
            for pi in picked:
                for lv in config.budget_levels:
                    for trial in range(config.trials_per_cell):
                        jobs.append(Job(
                            index=len(jobs),
                            job_id=f"{b}:{s}:{pi}:{lv}:{trial}",
                            buyer=b, seller=s, product_index=pi, product=products[pi],
                            budget_level=lv, trial=trial,
                            seed=job_seed(config.seed, b, s, products[pi].name, lv, trial),
                        ))
    if not jobs:
        raise EmptyMatrix("experiment matrix is empty")
    return jobs


# -- manifest ---------------------------------------------------------------

def _versions() -> dict:
    import httpx
    import numpy

    from . import _kernels

    return {"dealbench": __version__, "python": platform.python_version(), "numpy": numpy.__version__,
            "httpx": httpx.__version__, "kernel": _kernels.BACKEND}


def build_manifest(config: ExperimentConfig, products: Sequence[Product], picked: Sequence[int],
                   plan: Sequence[Job]) -> dict:
    return {
        "config": config.to_dict(),
        "config_hash": config.digest(),
        "catalog_hash": catalog_hash(products),
        "template_hashes": prompts.template_hashes(),
        "seeds": {"run": config.seed, "products_sample": config.products_sample.get("seed", 0)},
        "sampled_products": list(picked),
        "plan_size": len(plan),
        "versions": _versions(),
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def _write_json(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)


# -- transcript store -------------------------------------------------------

def read_transcripts(path) -> list[dict]:
    """Parse a transcript file, dropping a torn trailing line left by a killed run."""
    path = Path(path)
    if not path.exists():
        return []
    raw = path.read_bytes()
    records = []
    lines = raw.split(b"\n")
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError:
            if i == len(lines) - 1:
                log.warning("ignoring torn final line in %s", path)
            else:
                raise DealbenchError(f"{path}: corrupt line {i + 1}") from None
    return records


def _truncate_torn_tail(path: Path) -> None:
    if not path.exists():
        return
    raw = path.read_bytes()
    if raw and not raw.endswith(b"\n"):
        keep = raw.rfind(b"\n") + 1
        with open(path, "r+b") as fh:
            fh.truncate(keep)


class TranscriptSink:
    """Serialized appends; each record is flushed and fsynced as one line."""

    def __init__(self, path: Path):
        self.path = path
        self._lock = threading.Lock()

    def append(self, record: dict) -> None:
        line = json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n"
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())


def _dumps_line(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n"


def compact(run_dir: Path, plan: Sequence[Job]) -> None:
    """Rewrite transcripts (and timings) in plan order, one record per job id."""
    order = {j.job_id: j.index for j in plan}
    for name in (TRANSCRIPTS, TIMINGS):
        path = run_dir / name
        recs = {r["job_id"]: r for r in read_transcripts(path) if r.get("job_id") in order}
        body = "".join(_dumps_line(recs[k]) for k in sorted(recs, key=order.__getitem__))
        tmp = path.with_suffix(".tmp")
        tmp.write_text(body, encoding="utf-8")
        os.replace(tmp, path)


# -- agents -----------------------------------------------------------------

class AgentFactory:
    """Builds per-job agents; remote clients share one rate limiter."""

    def __init__(self, config: ExperimentConfig, wire_log: list | None = None,
                 transport=None, sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.limiter = RateLimiter(config.rate_limit) if config.rate_limit else None
        self.wire_log = wire_log
        self.transport = transport
        self.sleep = sleep

    def client(self, name: str, seed: int) -> ChatClient:
        spec = self.config.endpoints[name]
        return ChatClient(spec.remote, rate_limiter=self.limiter, wire_log=self.wire_log,
                          transport=self.transport, sleep=self.sleep, rng=random.Random(seed))

    def negotiator(self, name: str, role: Speaker, product: Product, budget: Decimal, seed: int):
        spec = self.config.endpoints[name]
        if spec.kind == "scripted":
            open_ratio = spec.open_ratio if role is Speaker.BUYER else 1.0
            return ScriptedNegotiator(ScriptedPolicy(role, open_ratio, spec.step_ratio), identifier=name)
        return LLMNegotiator(self.client(name, seed), role, product,
                             budget if role is Speaker.BUYER else None, identifier=name)

    def judge(self, seed: int):
        if self.config.judge_backend == "rule_based":
            return RuleJudge()
        return LLMJudge(self.client(self.config.judge_endpoint, seed))

    def analyst(self, seed: int):
        if self.config.analyst_backend == "rule_based":
            return RuleAnalyst()
        return LLMAnalyst(self.client(self.config.analyst_endpoint, seed))


def run_job(job: Job, config: ExperimentConfig, factory: AgentFactory) -> tuple[dict, dict]:
    """Runs one episode; failures become an aborted record instead of propagating."""
    level = BudgetLevel(job.budget_level)
    budget = derive_budget(job.product, level)
    ncfg = NegotiationConfig(job.product, budget, config.t_max, budget_level=level)
    meta = {"job_id": job.job_id, "plan_index": job.index, "trial": job.trial, "seed": job.seed,
            "product_index": job.product_index, "case_id": job.case_id}
    started = time.time()
    try:
        buyer = factory.negotiator(job.buyer, Speaker.BUYER, job.product, budget, job.seed)
        seller = factory.negotiator(job.seller, Speaker.SELLER, job.product, budget, job.seed + 1)
        tr = run_negotiation(buyer, seller, factory.judge(job.seed + 2), factory.analyst(job.seed + 3), ncfg)
    except AgentFailure as exc:
        tr = exc.transcript
    except Exception as exc:  # agent construction or anything unexpected
        tr = Transcript(ncfg, [], None, buyer_id=job.buyer, seller_id=job.seller, status="aborted",
                        error=f"{type(exc).__name__}: {exc}")
    tr.buyer_id, tr.seller_id = job.buyer, job.seller
    tr.meta = meta
    timing = {"job_id": job.job_id, "started": started, "elapsed_s": round(time.time() - started, 6),
              "status": tr.status}
    return tr.to_record(), timing


@dataclass
class RunResult:
    run_dir: Path
    planned: int
    completed: int
    aborted: int
    skipped: int
    abort_threshold: float

    @property
    def abort_fraction(self) -> float:
        return self.aborted / self.planned if self.planned else 0.0

    @property
    def exit_code(self) -> int:
        return EXIT_ABORTS if self.abort_fraction > self.abort_threshold else EXIT_OK


def execute(plan: Sequence[Job], config: ExperimentConfig, run_dir: Path | None = None, *,
            products: Sequence[Product] | None = None, picked: Sequence[int] | None = None,
            factory: AgentFactory | None = None, max_jobs: int | None = None) -> RunResult:
    """Run every job not already persisted in ``run_dir``.

    ``max_jobs`` stops after that many new jobs (used to simulate an interrupted run).
    """
    run_dir = Path(run_dir or config.run_dir())
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = run_dir / MANIFEST
    if manifest_path.exists():
        prior = json.loads(manifest_path.read_text(encoding="utf-8"))
        if prior.get("config_hash") != config.digest():
            raise ConfigError(f"{run_dir} holds a run with a different configuration")
    else:
        if products is None:
            products, picked = load_products(config)
        _write_json(manifest_path, build_manifest(config, products, picked or range(len(products)), plan))

    tpath = run_dir / TRANSCRIPTS
    _truncate_torn_tail(tpath)
    _truncate_torn_tail(run_dir / TIMINGS)
    done = {r.get("job_id") for r in read_transcripts(tpath)}
    pending = [j for j in plan if j.job_id not in done]
    todo = pending if max_jobs is None else pending[:max_jobs]
    log.info("%d planned, %d already done, %d to run", len(plan), len(plan) - len(pending), len(todo))

    wire: list | None = [] if config.record_wire else None
    factory = factory or AgentFactory(config, wire_log=wire)
    sink = TranscriptSink(tpath)
    tsink = TranscriptSink(run_dir / TIMINGS)

    def work(job: Job) -> None:
        rec, timing = run_job(job, config, factory)
        sink.append(rec)
        tsink.append(timing)
        if rec["status"] != "completed":
            log.warning("job %s aborted: %s", job.job_id, rec.get("error"))

    if config.parallelism == 1:
        for job in todo:
            work(job)
    else:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            list(pool.map(work, todo))

    if factory.wire_log:
        with open(run_dir / WIRE_LOG, "a", encoding="utf-8") as fh:
            for entry in factory.wire_log:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")

    records = {r["job_id"]: r for r in read_transcripts(tpath)}
    planned_ids = {j.job_id for j in plan}
    if planned_ids <= set(records):
        compact(run_dir, plan)
    aborted = sum(1 for k, r in records.items() if k in planned_ids and r.get("status") != "completed")
    completed = sum(1 for k, r in records.items() if k in planned_ids and r.get("status") == "completed")
    return RunResult(run_dir, len(plan), completed, aborted, len(plan) - len(pending), config.abort_threshold)


# -- aggregation & reports --------------------------------------------------

def aggregate(run_dir, reference_seller: str | None = None, rp_mode: str = "global") -> MetricsReport:
    recs = read_transcripts(Path(run_dir) / TRANSCRIPTS)
    deals = deals_from_records(recs)
    if not deals:
        raise NoData(f"{run_dir}: no completed transcripts")
    return build_report(deals, reference_seller, rp_mode)


def _rate(x: float | None) -> str:
    return "" if x is None else f"{x:.4f}"


def _money(x: Decimal | None) -> str:
    return "" if x is None else format_money(x)


CELL_COLUMNS = ["buyer", "seller", "budget_level", "n", "n_deal", "deal_rate", "prr_mean", "total_profit",
                "relative_profit", "profit_rate", "obr", "owr", "opr", "opr_budget", "dlr"]
MODEL_COLUMNS = ["model", "prr_buyer", "prr_seller", "total_profit", "relative_profit", "deal_rate",
                 "profit_rate", "obr", "owr", "opr", "dlr", "ncs", "risk_index"]
LONG_METRICS = ["prr_mean", "deal_rate", "profit_rate", "relative_profit", "obr", "owr", "opr", "dlr"]


def _cell_row(c) -> list[str]:
    return [c.buyer_id, c.seller_id, c.budget_level, str(c.n), str(c.n_deal), _rate(c.deal_rate),
            _rate(c.prr_mean), _money(c.total_profit), _rate(c.relative_profit), _rate(c.profit_rate),
            _rate(c.obr), _rate(c.owr), _rate(c.opr), _rate(c.opr_budget), _rate(c.dlr)]


def _model_row(m) -> list[str]:
    return [m.model, _rate(m.prr_buyer), _rate(m.prr_seller), _money(m.total_profit), _rate(m.relative_profit),
            _rate(m.deal_rate), _rate(m.profit_rate), _rate(m.obr), _rate(m.owr), _rate(m.opr), _rate(m.dlr),
            _rate(m.ncs), _rate(m.risk_index)]


def _csv(header: list[str], rows: Iterable[list[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _md_table(header: list[str], rows: Iterable[list[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def anomaly_table(report: MetricsReport) -> str:
    return _md_table(["Model", "Out-of-Budget", "Out-of-Wholesale"],
                     [[m.model, _rate(m.obr), _rate(m.owr)] for m in report.models])


def imbalance_table(rows: Sequence[ImbalanceRow]) -> str:
    def delta(r):
        return "-" if r.delta_pct is None else f"{r.delta_pct:+.2f}"
    return _md_table(["Buyer", "Seller", "Avg Payment($)", "Δ from Baseline (%)", "Impact"],
                     [[r.buyer_id, r.seller_id, _money(r.avg_payment), delta(r), r.impact] for r in rows])


def render_markdown(report: MetricsReport, imbalance: Sequence[ImbalanceRow] | None = None) -> str:
    parts = ["# Negotiation metrics", "", "## Anomalies", "", anomaly_table(report), "## Model scores", "",
             _md_table(["Model", "NCS", "Risk Index", "Deal Rate", "Relative Profit"],
                       [[m.model, _rate(m.ncs), _rate(m.risk_index), _rate(m.deal_rate), _rate(m.relative_profit)]
                        for m in report.models])]
    if imbalance:
        parts += ["## Payment imbalance", "", imbalance_table(imbalance)]
    return "\n".join(parts)


def long_rows(report: MetricsReport) -> list[list[str]]:
    rows = []
    for c in report.cells:
        for metric in LONG_METRICS:
            rows.append([c.buyer_id, c.seller_id, c.budget_level, metric, _rate(getattr(c, metric))])
    return rows


def emit_report(report: MetricsReport, fmt: str, out_dir, imbalance: Sequence[ImbalanceRow] | None = None) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {}
    if fmt == "csv":
        files["cells.csv"] = _csv(CELL_COLUMNS, (_cell_row(c) for c in report.cells))
        files["models.csv"] = _csv(MODEL_COLUMNS, (_model_row(m) for m in report.models))
        if imbalance:
            files["imbalance.csv"] = _csv(
                ["buyer", "seller", "avg_payment", "delta_pct", "impact", "n_cases"],
                ([r.buyer_id, r.seller_id, _money(r.avg_payment), _rate(r.delta_pct), r.impact, str(r.n_cases)]
                 for r in imbalance))
    elif fmt == "markdown":
        files["report.md"] = render_markdown(report, imbalance)
    elif fmt == "long_csv":
        files["heatmap_long.csv"] = _csv(["buyer", "seller", "budget_level", "metric", "value"], long_rows(report))
    else:
        raise UnsupportedFormat(f"unknown report format {fmt!r}")
    paths = []
    for name, body in files.items():
        p = out_dir / name
        p.write_text(body, encoding="utf-8")
        paths.append(p)
    return paths


def write_reports(run_dir, reference_seller: str | None = None, baseline_pair: Sequence[str] | None = None,
                  rp_mode: str = "global", out_dir=None) -> list[Path]:
    """aggregate + every report format into ``<run_dir>/reports``."""
    report = aggregate(run_dir, reference_seller, rp_mode)
    rows = None
    if baseline_pair:
        try:
            rows = imbalance_report(report.deals, tuple(baseline_pair))
        except (EmptyIntersection, KeyError) as exc:
            log.warning("imbalance table skipped: %s", exc)
    out = Path(out_dir) if out_dir else Path(run_dir) / "reports"
    paths = []
    for fmt in ("csv", "markdown", "long_csv"):
        paths += emit_report(report, fmt, out, rows)
    return paths
