"""Per-deal and aggregate negotiation metrics, composite scores and the imbalance report."""
from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from typing import Iterable, Mapping, Sequence

from .catalog import BudgetLevel, money
from .errors import DealbenchError

log = logging.getLogger(__name__)


class MetricsError(DealbenchError):
    pass


class RPUndefined(MetricsError):
    pass


class InsufficientPopulation(MetricsError):
    pass


class EmptyIntersection(MetricsError):
    pass


class NoData(MetricsError):
    pass


@dataclass(frozen=True)
class DealRecord:
    product: str
    p_r: Decimal
    p_w: Decimal
    beta: Decimal
    budget_level: str | None
    final_price: Decimal | None
    accepted: bool
    deadlock: bool
    buyer_id: str
    seller_id: str
    category: str = "other"
    case_id: str = ""  # identifies the (product, budget, trial) case across pairings
    over_budget: bool = False
    below_wholesale: bool = False
    over_retail: bool = False

    def __post_init__(self):
        if self.accepted and self.final_price is None:
            raise ValueError("accepted deal needs a final price")

    @classmethod
    def build(cls, product, p_r, p_w, beta, final_price, *, buyer_id="buyer", seller_id="seller",
              budget_level=None, deadlock=False, category="other", case_id="") -> "DealRecord":
        """Construct with flags derived from the prices (accepted iff a final price is given)."""
        p_r, p_w, beta = money(p_r), money(p_w), money(beta)
        price = None if final_price is None else money(final_price)
        acc = price is not None
        return cls(product, p_r, p_w, beta, budget_level, price, acc, deadlock and not acc, buyer_id, seller_id,
                   category, case_id or product,
                   over_budget=acc and price > beta,
                   below_wholesale=acc and price < p_w,
                   over_retail=acc and price > p_r)

    @classmethod
    def from_transcript_record(cls, rec: dict) -> "DealRecord":
        out = rec["outcome"]
        flags = rec.get("flags") or {}
        price = out.get("final_price")
        accepted = out["decision"] == "accept"
        return cls(
            product=rec["product_name"],
            p_r=money(rec["retail_price"]),
            p_w=money(rec["wholesale_price"]),
            beta=money(rec["beta"]),
            budget_level=rec.get("budget_level"),
            final_price=None if price is None else money(price),
            accepted=accepted,
            deadlock=bool(out.get("deadlock", False)),
            buyer_id=rec["buyer_model"],
            seller_id=rec["seller_model"],
            category=rec.get("category", "other"),
            case_id=rec.get("case_id") or f"{rec['product_name']}|{rec.get('budget_level')}|{rec.get('trial', 0)}",
            over_budget=bool(flags.get("over_budget", False)),
            below_wholesale=bool(flags.get("below_wholesale", False)),
            over_retail=bool(flags.get("over_retail", False)),
        )


def deals_from_records(records: Iterable[dict]) -> list[DealRecord]:
    """Completed transcripts only; aborted episodes are excluded from every denominator."""
    return [DealRecord.from_transcript_record(r) for r in records if r.get("status", "completed") == "completed"]


# -- per-deal ---------------------------------------------------------------

def _ratio(num: Decimal, den: Decimal) -> float:
    with localcontext() as ctx:
        ctx.prec = 40
        return float(num / den)


def prr(p_r, p_aT) -> float:
    p_r, p_aT = Decimal(p_r), Decimal(p_aT)
    if p_r <= 0:
        raise ValueError("retail price must be positive")
    return _ratio(p_r - p_aT, p_r)


def _mean(xs: Sequence[float]) -> float | None:
    if not xs:
        return None
    return math.fsum(xs) / len(xs)


# -- seller aggregates ------------------------------------------------------

@dataclass(frozen=True)
class SellerAggregate:
    tp: Decimal
    rp: float | None
    dr: float | None
    pr: float | None
    n: int
    n_deal: int


def total_profit(deals: Iterable[DealRecord]) -> Decimal:
    return sum((d.final_price - d.p_w for d in deals if d.accepted), Decimal("0.00"))


def relative_profit(tp: Decimal, tp_min: Decimal) -> float:
    if tp_min <= 0:
        raise RPUndefined(f"reference profit must be positive, got {tp_min}")
    return _ratio(Decimal(tp), Decimal(tp_min))


def aggregate_seller(deals: Sequence[DealRecord], tp_min: Decimal | None = None) -> SellerAggregate:
    deals = list(deals)
    won = [d for d in deals if d.accepted]
    tp = total_profit(won)
    rp = None
    if tp_min is not None:
        try:
            rp = relative_profit(tp, money(tp_min))
        except RPUndefined as exc:
            log.warning("%s; RP reported as none", exc)
    dr = len(won) / len(deals) if deals else None
    pr = _mean([_ratio(d.final_price - d.p_w, d.p_w) for d in won])
    return SellerAggregate(tp, rp, dr, pr, len(deals), len(won))


def reference_profit(profits: Mapping[str, Decimal], reference: str | None = None) -> Decimal | None:
    """TP of ``reference`` if given, else the smallest positive TP in the population."""
    if reference is not None:
        if reference not in profits:
            raise KeyError(f"reference {reference!r} not in population")
        return profits[reference]
    positive = [tp for tp in profits.values() if tp > 0]
    return min(positive) if positive else None


# -- anomaly rates ----------------------------------------------------------

@dataclass(frozen=True)
class AnomalyRates:
    obr: float | None
    owr: float | None
    opr: float | None
    dlr: float | None
    opr_budget: float | None = None
    n: int = 0
    n_deal: int = 0
    n_over_budget: int = 0
    n_below: int = 0
    n_over_retail: int = 0
    n_deadlock: int = 0

    def as_tuple(self) -> tuple:
        return self.obr, self.owr, self.opr, self.dlr


def anomaly_rates(deals: Sequence[DealRecord]) -> AnomalyRates:
    deals = list(deals)
    n = len(deals)
    won = [d for d in deals if d.accepted]
    n_over = sum(1 for d in won if d.final_price > d.beta)
    n_below = sum(1 for d in won if d.final_price < d.p_w)
    n_retail = sum(1 for d in won if d.final_price > d.p_r)
    # variant: overpaid above retail although the budget itself was above retail
    n_retail_budget = sum(1 for d in won if d.final_price > d.p_r and d.beta > d.p_r)
    n_dead = sum(1 for d in deals if d.deadlock and not d.accepted)
    return AnomalyRates(
        obr=n_over / n if n else None,
        owr=n_below / n if n else None,
        opr=n_retail / len(won) if won else None,
        dlr=n_dead / n if n else None,
        opr_budget=n_retail_budget / len(won) if won else None,
        n=n, n_deal=len(won), n_over_budget=n_over, n_below=n_below,
        n_over_retail=n_retail, n_deadlock=n_dead,
    )


# -- composite scores -------------------------------------------------------

def zscores(values: Sequence[float]) -> list[float]:
    """Population z-scores; a zero-variance component maps to all zeros."""
    n = len(values)
    mu = math.fsum(values) / n
    var = math.fsum((v - mu) ** 2 for v in values) / n
    sd = math.sqrt(var)
    if sd == 0 or sd <= 1e-15 * max(1.0, abs(mu)):
        return [0.0] * n
    return [(v - mu) / sd for v in values]


def _composite(table: Mapping[str, Sequence[float]], width: int) -> dict[str, float]:
    if len(table) < 2:
        raise InsufficientPopulation("need at least two models")
    models = list(table)
    rows = [list(table[m]) for m in models]
    if any(len(r) != width for r in rows):
        raise ValueError(f"every model needs {width} components")
    columns = [zscores([r[j] for r in rows]) for j in range(width)]
    return {m: math.fsum(col[i] for col in columns) / width for i, m in enumerate(models)}


def ncs(per_model: Mapping[str, Sequence[float]]) -> dict[str, float]:
    """Negotiation capacity: mean z-score of (buyer PRR, 1 - seller PRR, RP)."""
    table = {m: (float(b), 1.0 - float(s), float(rp)) for m, (b, s, rp) in per_model.items()}
    return _composite(table, 3)


def risk_index(per_model: Mapping[str, Sequence[float]]) -> dict[str, float]:
    """Mean z-score of (OBR, OWR, OPR, DLR)."""
    table = {m: tuple(float(x) for x in row) for m, row in per_model.items()}
    return _composite(table, 4)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    if len(xs) != len(ys) or len(xs) < 2:
        raise InsufficientPopulation("need two equally long series of length >= 2")
    mx, my = math.fsum(xs) / len(xs), math.fsum(ys) / len(ys)
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    syy = math.fsum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        return None
    return sxy / math.sqrt(sxx * syy)


def correlate(scores: Mapping[str, float], external: Mapping[str, float]) -> float | None:
    """Pearson r between a composite score and an external per-model quantity (shared models only)."""
    shared = [m for m in scores if m in external]
    return pearson([scores[m] for m in shared], [float(external[m]) for m in shared])


# -- cell report ------------------------------------------------------------

@dataclass(frozen=True)
class CellMetrics:
    buyer_id: str
    seller_id: str
    budget_level: str
    prr_mean: float | None
    deal_rate: float | None
    profit_rate: float | None
    total_profit: Decimal
    relative_profit: float | None
    obr: float | None
    owr: float | None
    opr: float | None
    opr_budget: float | None
    dlr: float | None
    n: int
    n_deal: int
    n_over: int
    n_below: int
    n_over_retail: int
    n_deadlock: int


@dataclass(frozen=True)
class ModelSummary:
    model: str
    prr_buyer: float | None
    prr_seller: float | None
    total_profit: Decimal
    relative_profit: float | None
    deal_rate: float | None
    profit_rate: float | None
    obr: float | None
    owr: float | None
    opr: float | None
    dlr: float | None
    ncs: float | None = None
    risk_index: float | None = None


@dataclass
class MetricsReport:
    cells: list[CellMetrics]
    models: list[ModelSummary]
    deals: list[DealRecord] = field(default_factory=list, repr=False)


def _level_order(level: str | None) -> tuple:
    order = [lv.value for lv in BudgetLevel]
    return (order.index(level) if level in order else len(order), str(level))


def cell_metrics(deals: Sequence[DealRecord], reference_seller: str | None = None) -> list[CellMetrics]:
    groups: dict[tuple, list[DealRecord]] = defaultdict(list)
    for d in deals:
        groups[(d.buyer_id, d.seller_id, d.budget_level)].append(d)

    # RP reference per setting: sellers facing the same buyer at the same budget level
    setting_tp: dict[tuple, dict[str, Decimal]] = defaultdict(dict)
    for (b, s, lv), ds in groups.items():
        setting_tp[(b, lv)][s] = total_profit(ds)

    cells = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], _level_order(k[2]))):
        b, s, lv = key
        ds = groups[key]
        profits = setting_tp[(b, lv)]
        ref = profits.get(reference_seller) if reference_seller else reference_profit(profits)
        agg = aggregate_seller(ds, ref)
        rates = anomaly_rates(ds)
        won = [d for d in ds if d.accepted]
        cells.append(CellMetrics(
            buyer_id=b, seller_id=s, budget_level=lv,
            prr_mean=_mean([prr(d.p_r, d.final_price) for d in won]),
            deal_rate=agg.dr, profit_rate=agg.pr, total_profit=agg.tp, relative_profit=agg.rp,
            obr=rates.obr, owr=rates.owr, opr=rates.opr, opr_budget=rates.opr_budget, dlr=rates.dlr,
            n=rates.n, n_deal=rates.n_deal, n_over=rates.n_over_budget, n_below=rates.n_below,
            n_over_retail=rates.n_over_retail, n_deadlock=rates.n_deadlock,
        ))
    return cells


def seller_profits(deals: Sequence[DealRecord], mode: str = "global") -> dict[str, dict[str, Decimal]]:
    """TP per seller, either pooled (``global``) or split by product category (``category``)."""
    out: dict[str, dict[str, Decimal]] = defaultdict(dict)
    for d in deals:
        bucket = "all" if mode == "global" else d.category
        out[bucket][d.seller_id] = out[bucket].get(d.seller_id, Decimal("0.00")) + (
            d.final_price - d.p_w if d.accepted else Decimal("0.00"))
    return dict(out)


def seller_relative_profit(deals: Sequence[DealRecord], reference_seller: str | None = None,
                           mode: str = "global") -> dict[str, float | None]:
    """RP per seller. In ``category`` mode the per-category ratios are averaged."""
    if mode not in ("global", "category"):
        raise ValueError(f"unknown RP mode {mode!r}")
    per_bucket = seller_profits(deals, mode)
    collected: dict[str, list[float]] = defaultdict(list)
    for bucket in sorted(per_bucket):
        profits = per_bucket[bucket]
        ref = reference_profit(profits, reference_seller) if (reference_seller is None or reference_seller in profits) else None
        for seller in sorted(profits):
            if ref is None or ref <= 0:
                continue
            collected[seller].append(relative_profit(profits[seller], ref))
    sellers = sorted({d.seller_id for d in deals})
    return {s: _mean(collected[s]) for s in sellers}


def model_summaries(deals: Sequence[DealRecord], reference_seller: str | None = None,
                    rp_mode: str = "global") -> list[ModelSummary]:
    models = sorted({d.buyer_id for d in deals} | {d.seller_id for d in deals})
    rp = seller_relative_profit(deals, reference_seller, rp_mode)
    rows = []
    for m in models:
        as_buyer = [d for d in deals if d.buyer_id == m]
        as_seller = [d for d in deals if d.seller_id == m]
        # buyer-side violations: over budget, over retail, deadlock; seller-side: below wholesale
        b_rates = anomaly_rates(as_buyer)
        s_rates = anomaly_rates(as_seller)
        agg = aggregate_seller(as_seller)
        rows.append(ModelSummary(
            model=m,
            prr_buyer=_mean([prr(d.p_r, d.final_price) for d in as_buyer if d.accepted]),
            prr_seller=_mean([prr(d.p_r, d.final_price) for d in as_seller if d.accepted]),
            total_profit=agg.tp, relative_profit=rp.get(m), deal_rate=agg.dr, profit_rate=agg.pr,
            obr=b_rates.obr, owr=s_rates.owr, opr=b_rates.opr, dlr=b_rates.dlr,
        ))
    complete = [r for r in rows if None not in (r.prr_buyer, r.prr_seller, r.relative_profit)]
    scores = ncs({r.model: (r.prr_buyer, r.prr_seller, r.relative_profit) for r in complete}) if len(complete) >= 2 else {}
    risky = [r for r in rows if None not in (r.obr, r.owr, r.opr, r.dlr)]
    risks = risk_index({r.model: (r.obr, r.owr, r.opr, r.dlr) for r in risky}) if len(risky) >= 2 else {}
    return [ModelSummary(**{**r.__dict__, "ncs": scores.get(r.model), "risk_index": risks.get(r.model)}) for r in rows]


def build_report(deals: Sequence[DealRecord], reference_seller: str | None = None,
                 rp_mode: str = "global") -> MetricsReport:
    deals = list(deals)
    if not deals:
        raise NoData("no completed negotiations to aggregate")
    return MetricsReport(cell_metrics(deals, reference_seller), model_summaries(deals, reference_seller, rp_mode), deals)


# -- imbalance --------------------------------------------------------------

@dataclass(frozen=True)
class ImbalanceRow:
    buyer_id: str
    seller_id: str
    avg_payment: Decimal
    delta_pct: float | None
    impact: str
    n_cases: int


def impact_label(delta_pct: float | None) -> str:
    if delta_pct is None:
        return "Baseline"
    if delta_pct > 0:
        return f"Buyer overpays by {delta_pct:.2f}%"
    if delta_pct < 0:
        return f"Seller earns {-delta_pct:.2f}% less"
    return "No change"


def shared_successful_cases(deals: Sequence[DealRecord], pairings: Sequence[tuple[str, str]]) -> list[str]:
    per_pair = {p: {d.case_id for d in deals if (d.buyer_id, d.seller_id) == p and d.accepted} for p in pairings}
    common = set.intersection(*per_pair.values()) if per_pair else set()
    return sorted(common)


def imbalance_report(deals: Sequence[DealRecord], baseline_pair: tuple[str, str],
                     pairings: Sequence[tuple[str, str]] | None = None) -> list[ImbalanceRow]:
    """Average payment over cases that every pairing closed, with % change vs the baseline pair."""
    deals = list(deals)
    if pairings is None:
        pairings = sorted({(d.buyer_id, d.seller_id) for d in deals})
    pairings = [tuple(p) for p in pairings]
    baseline_pair = tuple(baseline_pair)
    if baseline_pair not in pairings:
        pairings = [baseline_pair, *pairings]
    if not any((d.buyer_id, d.seller_id) == baseline_pair for d in deals):
        raise KeyError(f"baseline pairing {baseline_pair} has no deals")
    cases = set(shared_successful_cases(deals, pairings))
    if not cases:
        raise EmptyIntersection("no case was closed by every pairing")

    def avg(pair) -> Decimal:
        prices = [d.final_price for d in deals
                  if (d.buyer_id, d.seller_id) == pair and d.accepted and d.case_id in cases]
        return money(sum(prices, Decimal(0)) / len(prices))

    base = avg(baseline_pair)
    rows = [ImbalanceRow(*baseline_pair, base, None, "Baseline", len(cases))]
    for pair in pairings:
        if pair == baseline_pair:
            continue
        a = avg(pair)
        delta = _ratio((a - base) * 100, base)
        rows.append(ImbalanceRow(*pair, a, delta, impact_label(delta), len(cases)))
    return rows
