"""``dealbench`` command line."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import prompts
from .agents import LLMNegotiator, Speaker
from .bandit import (
    LiveNegotiationEnv,
    Schedule,
    ScriptedNegotiationEnv,
    TrainingInterrupted,
    load_checkpoint,
    summarize,
    train,
)
from .catalog import SAMPLE_CATALOG, BudgetLevel, derive_budget, dump_catalog, format_money, load_catalog_file
from .errors import DealbenchError
from .metrics import NoData
from .runner import (
    EXIT_ABORTS,
    EXIT_CONFIG,
    EXIT_NO_DATA,
    EXIT_OK,
    AgentFactory,
    ConfigError,
    execute,
    load_config,
    load_products,
    plan_matrix,
    write_reports,
)

log = logging.getLogger("dealbench")


def _err(msg: str) -> None:
    print(f"dealbench: {msg}", file=sys.stderr)


def cmd_catalog_validate(args) -> int:
    try:
        products = load_catalog_file(args.file)
    except FileNotFoundError:
        _err(f"no such file: {args.file}")
        return EXIT_CONFIG
    except (DealbenchError, ValueError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    print(dump_catalog(products))
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
        if args.output_dir:
            config = replace(config, output_dir=str(Path(args.output_dir).resolve()))
        products, picked = load_products(config)
        plan = plan_matrix(config, products, picked)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    if args.dry_run:
        print(json.dumps({"jobs": len(plan), "output_dir": str(config.run_dir())}))
        return EXIT_OK
    try:
        result = execute(plan, config, products=products, picked=picked)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    print(f"{result.completed} completed, {result.aborted} aborted of {result.planned} "
          f"({result.skipped} resumed) -> {result.run_dir}")
    code = result.exit_code
    if code == EXIT_ABORTS:
        _err(f"abort fraction {result.abort_fraction:.4f} exceeds threshold {config.abort_threshold}")
    try:
        for p in write_reports(result.run_dir, baseline_pair=config.baseline_pair):
            print(p)
    except NoData as exc:
        _err(str(exc))
        return code or EXIT_NO_DATA
    return code


def cmd_metrics(args) -> int:
    baseline = args.baseline.split(",") if args.baseline else None
    if baseline is not None and len(baseline) != 2:
        _err("--baseline expects BUYER,SELLER")
        return EXIT_CONFIG
    try:
        paths = write_reports(args.run_dir, args.reference_seller, baseline, args.rp_mode, args.out)
    except NoData as exc:
        _err(str(exc))
        return EXIT_NO_DATA
    for p in paths:
        print(p)
    return EXIT_OK


def _live_env(config_path: str, products):
    config = load_config(config_path)
    buyer_name, seller_name = config.buyer_models[0], config.seller_models[0]
    if config.endpoints[buyer_name].kind != "remote":
        raise ConfigError("live optimization needs a remote buyer endpoint")
    factory = AgentFactory(config)

    def make_agents(product, budget, action):
        base = prompts.render(prompts.load_template("buyer_system"), prompts.buyer_context(product, budget))
        buyer = LLMNegotiator(factory.client(buyer_name, 0), Speaker.BUYER, product, budget,
                              system_prompt=prompts.render_strategy_prompt(base, action), identifier=buyer_name)
        seller = factory.negotiator(seller_name, Speaker.SELLER, product, budget, 1)
        return buyer, seller, factory.judge(2), factory.analyst(3)

    return LiveNegotiationEnv(products, make_agents, config.t_max)


def cmd_optimize(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        products = load_catalog_file(args.catalog or SAMPLE_CATALOG)
        if args.env == "live":
            if not args.config:
                raise ConfigError("--env live requires --config")
            env = _live_env(args.config, products)
        else:
            env = ScriptedNegotiationEnv(products, args.t_max)
        schedule = Schedule(total_steps=args.steps, learning_rate=args.eta,
                            forced_coverage_interval=args.coverage_interval)
    except (ConfigError, ValueError, DealbenchError) as exc:
        _err(str(exc))
        return EXIT_CONFIG

    ckpt = out / "checkpoint.json"
    resume = load_checkpoint(ckpt) if args.resume and ckpt.exists() else None
    try:
        result = train(env, schedule, rng_seed=args.seed, checkpoint_path=ckpt, resume=resume)
    except TrainingInterrupted as exc:
        _err(f"{exc}; checkpoint at {exc.path}, rerun with --resume")
        return 1
    result.write_history(out / "history.jsonl")
    best = prompts.decode_action(result.best_action)
    summary = {
        "best_action": result.best_action,
        "best_action_axes": best.to_dict(),
        "schedule": asdict(schedule),
        "seed": args.seed,
        "env": args.env,
        "first_10pct": summarize(result.history[2 * len(result.state.theta):][: max(1, args.steps // 10)]),
        "last_10pct": summarize(result.history, 0.1),
        "theta": [float(x) for x in result.state.theta],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"best action {result.best_action}: {json.dumps(best.to_dict(), sort_keys=True)}")
    return EXIT_OK


def cmd_prompts_show(args) -> int:
    products = load_catalog_file(args.catalog or SAMPLE_CATALOG)
    if not 0 <= args.product < len(products):
        _err(f"--product must be in [0, {len(products) - 1}]")
        return EXIT_CONFIG
    product = products[args.product]
    budget = derive_budget(product, BudgetLevel(args.budget_level))
    role = prompts.Role(args.role)
    contexts = {
        prompts.Role.BUYER_SYSTEM: lambda: prompts.buyer_context(product, budget),
        prompts.Role.SELLER_SYSTEM: lambda: prompts.seller_context(product),
        prompts.Role.BUYER_GREETING: lambda: prompts.greeting_context(product, budget),
        prompts.Role.JUDGE: lambda: prompts.judge_context(args.buyer_message, args.seller_message),
        prompts.Role.ANALYST: lambda: prompts.analyst_context(args.seller_message or ""),
    }
    text = prompts.render(prompts.load_template(role), contexts[role]())
    if args.action is not None:
        if not 0 <= args.action < prompts.N_ACTIONS:
            _err(f"--action must be in [0, {prompts.N_ACTIONS - 1}]")
            return EXIT_CONFIG
        text = prompts.render_strategy_prompt(text, prompts.decode_action(args.action))
    print(text)
    if args.verbose:
        _err(f"product={product.name} budget={format_money(budget)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dealbench", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    cat = sub.add_parser("catalog", help="catalog utilities")
    cat_sub = cat.add_subparsers(dest="catalog_command", required=True)
    val = cat_sub.add_parser("validate", help="parse a catalog and echo it normalized")
    val.add_argument("file")
    val.set_defaults(func=cmd_catalog_validate)

    run = sub.add_parser("run", help="execute (or resume) an experiment matrix")
    run.add_argument("--config", required=True)
    run.add_argument("--output-dir", help="override output_dir from the config")
    run.add_argument("--dry-run", action="store_true", help="plan only and print the job count")
    run.set_defaults(func=cmd_run)

    met = sub.add_parser("metrics", help="aggregate a run directory into reports")
    met.add_argument("run_dir")
    met.add_argument("--reference-seller", metavar="ID")
    met.add_argument("--baseline", metavar="BUYER,SELLER", help="pairing for the payment imbalance table")
    met.add_argument("--rp-mode", choices=["global", "category"], default="global")
    met.add_argument("--out", help="report directory (default <run_dir>/reports)")
    met.set_defaults(func=cmd_metrics)

    opt = sub.add_parser("optimize", help="train the strategy bandit")
    opt.add_argument("--steps", type=int, default=500)
    opt.add_argument("--eta", type=float, default=0.1)
    opt.add_argument("--seed", type=int, default=0)
    opt.add_argument("--coverage-interval", type=int, default=10)
    opt.add_argument("--env", choices=["scripted", "live"], default="scripted")
    opt.add_argument("--out", required=True)
    opt.add_argument("--catalog", help="catalog file (default: bundled sample)")
    opt.add_argument("--config", help="experiment config naming the buyer/seller endpoints (live env)")
    opt.add_argument("--t-max", type=int, default=30)
    opt.add_argument("--resume", action="store_true", help="continue from <out>/checkpoint.json")
    opt.set_defaults(func=cmd_optimize)

    pr = sub.add_parser("prompts", help="prompt templates")
    pr_sub = pr.add_subparsers(dest="prompts_command", required=True)
    show = pr_sub.add_parser("show", help="print a rendered role prompt")
    show.add_argument("--role", required=True, choices=[r.value for r in prompts.Role])
    show.add_argument("--action", type=int, help="append the strategy directives of this arm")
    show.add_argument("--catalog")
    show.add_argument("--product", type=int, default=0, help="catalog index")
    show.add_argument("--budget-level", default="mid", choices=[lv.value for lv in BudgetLevel])
    show.add_argument("--buyer-message", default="<buyer message>")
    show.add_argument("--seller-message", default=None)
    show.set_defaults(func=cmd_prompts_show)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
