"""Command-line interface.

Subcommands: parse, check, run, backtest, gen-chain, gen-path, eval, repl.
Machine-readable JSON goes to stdout; diagnostics go to stderr. Exit codes:
0 success, 1 any error, 2 a valid query that returned zero strategies.
Configuration precedence is flags > --config file (JSON, same keys as the
config dataclass) > defaults; $OQL_CONFIG names a default config file.
"""

import argparse
import datetime as dt
import json
import os
import sys

from . import backtest as bt
from . import chain as chain_mod
from . import evalkit
from .catalog import catalog_table, catalog_to_json, lookup, schema_table, validate
from .config import RunConfig, load_config
from .engine import execute, result_to_json, result_to_table
from .errors import OqlError
from .serialize import dumps, format_date, format_number, parse_date
from .syntax import QueryAst, parse_text, pretty_print

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_EMPTY = 2


def _diag(message: str) -> None:
    print(message, file=sys.stderr)


def _emit(doc: dict) -> None:
    sys.stdout.write(dumps(doc))


# ============================================================
# Config plumbing
# ============================================================

_CONFIG_FLAGS = (
    ("--epsilon", "epsilon", float, "relative half-width of the ~ band"),
    ("--epsilon-abs", "epsilon_abs", float, "absolute ~ band at target 0"),
    ("--atm-band", "atm_band", float, "|K-S|/S threshold for ATM"),
    ("--multiplier", "multiplier", float, "contract multiplier"),
    ("--rate", "rate", float, "annualized risk-free rate"),
    ("--cap", "combinatorial_cap", int, "max raw candidate product"),
)


def _add_config_options(p: argparse.ArgumentParser) -> None:
    group = p.add_argument_group("configuration")
    group.add_argument("--config", metavar="FILE",
                       help="JSON config file (default: $OQL_CONFIG)")
    for flag, dest, typ, help_text in _CONFIG_FLAGS:
        group.add_argument(flag, dest=dest, type=typ, default=None,
                           help=help_text)
    group.add_argument("--output-mode", dest="output_mode",
                       choices=("standard", "blueprint"), default=None,
                       help="results serialization shape")
    group.add_argument("--format", dest="output_format",
                       choices=("json", "table"), default=None,
                       help="stdout rendering")
    group.add_argument("--symmetric-wings", dest="symmetric_wings",
                       action="store_true", default=None,
                       help="require equidistant butterfly wings")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {}
    for _, dest, _, _ in _CONFIG_FLAGS:
        overrides[dest] = getattr(args, dest, None)
    overrides["output_mode"] = getattr(args, "output_mode", None)
    overrides["output_format"] = getattr(args, "output_format", None)
    overrides["symmetric_wings"] = getattr(args, "symmetric_wings", None)
    return load_config(getattr(args, "config", None), overrides)


def _query_text(args: argparse.Namespace) -> str:
    if getattr(args, "query_file", None):
        with open(args.query_file, "r", encoding="utf-8") as fh:
            return fh.read()
    if getattr(args, "query", None):
        return args.query
    raise OqlError("no query given; pass QUERY or --query-file")


def _ast_to_json(ast: QueryAst) -> dict:
    where = [
        {"role": c.role, "field": c.field, "op": c.op, "value": c.value}
        for c in ast.where
    ]
    having = []
    for c in ast.having:
        if c.op == "BETWEEN":
            having.append({"field": c.field, "op": c.op, "lo": c.lo, "hi": c.hi})
        else:
            having.append({"field": c.field, "op": c.op, "value": c.value})
    return {
        "strategy": ast.strategy,
        "underlying": ast.underlying,
        "where": where,
        "having": having,
        "order_by": [
            {"field": item.field, "direction": item.direction}
            for item in ast.order_by
        ],
        "limit": ast.limit,
    }


# ============================================================
# Subcommands
# ============================================================


def cmd_parse(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    ast = parse_text(_query_text(args))
    if config.output_format == "table":
        print(pretty_print(ast))
        return EXIT_OK
    _emit({
        "query": pretty_print(ast),
        "ast": _ast_to_json(ast),
        "config": config.to_json_dict(),
    })
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    if args.schemas:
        if config.output_format == "table":
            print(catalog_table(config.symmetric_wings))
        else:
            _emit({"schemas": catalog_to_json(config.symmetric_wings),
                   "config": config.to_json_dict()})
        return EXIT_OK
    ast = parse_text(_query_text(args))
    vq = validate(ast, symmetric_wings=config.symmetric_wings)
    doc = {
        "query": pretty_print(ast),
        "strategy": vq.schema.name,
        "underlying": ast.underlying,
        "valid": True,
        "per_role_conditions": {
            rid: len(conds) for rid, conds in vq.per_role_conditions.items()
        },
        "config": config.to_json_dict(),
    }
    if config.output_format == "table":
        print(f"valid: {doc['query']}")
        print(schema_table(vq.schema))
    else:
        _emit(doc)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    snapshot = chain_mod.load_snapshot(args.chain)
    if snapshot.excluded:
        _diag(snapshot.exclusion_summary())
    result = execute(_query_text(args), snapshot, config)
    doc = result_to_json(result, config)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(dumps(doc))
    if config.output_format == "table":
        print(result_to_table(result))
    else:
        _emit(doc)
    return EXIT_OK if result.strategies else EXIT_EMPTY


def cmd_backtest(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    with open(args.results, "r", encoding="utf-8") as fh:
        results_doc = json.load(fh)
    positions = bt.positions_from_results(results_doc)
    spots = bt.load_spots(args.spots)
    entry = parse_date(args.entry)
    exit_date = parse_date(args.exit)
    reports = bt.run_cohorts(positions, spots, entry, exit_date, config,
                             iv_policy=args.iv_policy)
    doc = {
        "entry": format_date(entry),
        "exit": format_date(exit_date),
        "iv_policy": args.iv_policy,
        "config": config.to_json_dict(),
        "cohorts": {name: rep.to_json_dict() for name, rep in reports.items()},
    }
    if config.output_format == "table":
        print("cohort: all")
        print(reports["all"].to_table())
        print()
        print("cohort: top")
        print(reports["top"].to_table())
    else:
        _emit(doc)
    return EXIT_OK


def _parse_strikes(args: argparse.Namespace) -> list[float]:
    if args.strikes:
        return [float(s) for s in args.strikes.split(",") if s.strip()]
    if args.strike_range:
        try:
            lo_s, hi_s, step_s = args.strike_range.split(":")
            lo, hi, step = float(lo_s), float(hi_s), float(step_s)
        except ValueError:
            raise OqlError(
                f"--strike-range wants LO:HI:STEP, got {args.strike_range!r}"
            ) from None
        if step <= 0 or hi < lo:
            raise OqlError(f"bad strike range {args.strike_range!r}")
        strikes = []
        k = lo
        while k <= hi + 1e-9:
            strikes.append(round(k, 6))
            k += step
        return strikes
    raise OqlError("pass --strikes or --strike-range")


def _parse_expiries(args: argparse.Namespace, as_of) -> list:
    if args.expiries:
        return [parse_date(s) for s in args.expiries.split(",") if s.strip()]
    if args.dtes:
        return [as_of + dt.timedelta(days=int(s))
                for s in args.dtes.split(",") if s.strip()]
    raise OqlError("pass --expiries or --dtes")


def _refuse_overwrite(path: str, force: bool) -> None:
    if os.path.exists(path) and not force:
        raise OqlError(f"{path} exists; pass --force to overwrite")


def cmd_gen_chain(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    _refuse_overwrite(args.out, args.force)
    as_of = parse_date(args.as_of)
    rate = config.rate if args.rate is None else args.rate
    snapshot = chain_mod.generate_synthetic(
        underlying=args.underlying.upper(),
        as_of=as_of,
        spot=args.spot,
        rate=rate,
        expiries=_parse_expiries(args, as_of),
        strikes=_parse_strikes(args),
        base_vol=args.base_vol,
        skew=args.skew,
        term=args.term,
        seed=args.seed,
    )
    chain_mod.save_snapshot(snapshot, args.out)
    _emit({
        "out": args.out,
        "underlying": snapshot.underlying,
        "as_of": format_date(snapshot.as_of),
        "spot": snapshot.spot,
        "rate": snapshot.rate,
        "records": len(snapshot.records),
        "seed": args.seed,
        "config": config.to_json_dict(),
    })
    return EXIT_OK


def cmd_gen_path(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    _refuse_overwrite(args.out, args.force)
    start = parse_date(args.start)
    levels = chain_mod.generate_path(args.spot, args.mu, args.sigma,
                                     args.days, args.seed)
    lines = ["date,close"]
    for offset, close in enumerate(levels):
        day = start + dt.timedelta(days=offset)
        lines.append(f"{format_date(day)},{format_number(close)}")
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    _emit({
        "out": args.out,
        "start": format_date(start),
        "days": args.days,
        "points": len(levels),
        "seed": args.seed,
        "config": config.to_json_dict(),
    })
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    cases = evalkit.load_cases(args.cases)
    base_dir = os.path.dirname(os.path.abspath(args.cases))
    outcomes, report = evalkit.evaluate(cases, base_dir=base_dir,
                                        config=config, k=args.k)
    doc = {
        **report,
        "outcomes": [
            {
                "case_id": o.case_id,
                "gold_strategy": o.gold_strategy,
                "k_first_success": o.k_first_success,
                "rows_at_success": o.rows_at_success,
                "selected_strategy": o.selected_strategy,
            }
            for o in outcomes
        ],
        "config": config.to_json_dict(),
    }
    if config.output_format == "table":
        for o in outcomes:
            k_text = "-" if o.k_first_success is None else str(o.k_first_success)
            print(f"{o.case_id:<16} k={k_text:<3} "
                  f"rows={o.rows_at_success if o.rows_at_success is not None else '-'}")

        def fmt(x):
            return "-" if x is None else f"{x:.4f}"

        print(f"VR {fmt(report['vr'])}  SM {fmt(report['sm_conditional'])} "
              f"(uncond {fmt(report['sm_unconditional'])})  "
              f"Eff {fmt(report['eff'])}  AvgRows {fmt(report['avg_rows'])}  "
              f"n={report['n']} K={report['k']}")
    else:
        _emit(doc)
    return EXIT_OK


_REPL_HELP = """\
commands:
  :help            show this message
  :schema NAME     show one strategy schema (no NAME: list all)
  :config          show the effective configuration
  :quit            leave the repl
anything else is executed as a query against the loaded chain"""


def cmd_repl(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    snapshot = chain_mod.load_snapshot(args.chain)
    if snapshot.excluded:
        _diag(snapshot.exclusion_summary())
    print(f"loaded {len(snapshot.records)} contracts for "
          f"{snapshot.underlying} as of {format_date(snapshot.as_of)}")
    while True:
        print("oql> ", end="", flush=True)
        line = sys.stdin.readline()
        if line == "":  # EOF
            print()
            return EXIT_OK
        line = line.strip()
        if not line:
            continue
        if line.startswith(":"):
            parts = line.split()
            command = parts[0]
            if command == ":quit":
                return EXIT_OK
            if command == ":help":
                print(_REPL_HELP)
            elif command == ":config":
                sys.stdout.write(dumps(config.to_json_dict()))
            elif command == ":schema":
                try:
                    if len(parts) > 1:
                        print(schema_table(lookup(parts[1], config.symmetric_wings)))
                    else:
                        print(catalog_table(config.symmetric_wings))
                except OqlError as exc:
                    _diag(f"error [{exc.stage}]: {exc}")
            else:
                _diag(f"unknown command {command}; try :help")
            continue
        try:
            result = execute(line, snapshot, config)
        except OqlError as exc:
            _diag(f"error [{exc.stage}]: {exc}")
            continue
        print(result_to_table(result))


# ============================================================
# Argument wiring
# ============================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oql",
        description="Compile and execute option strategy queries.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="tokenize + parse a query; print the AST")
    p.add_argument("query", nargs="?", help="query text")
    p.add_argument("--query-file", help="read the query from a file")
    _add_config_options(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("check", help="parse + validate against the catalog")
    p.add_argument("query", nargs="?", help="query text")
    p.add_argument("--query-file", help="read the query from a file")
    p.add_argument("--schemas", action="store_true",
                   help="print the strategy catalog instead")
    _add_config_options(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("run", help="execute a query against a chain snapshot")
    p.add_argument("query", nargs="?", help="query text")
    p.add_argument("--query-file", help="read the query from a file")
    p.add_argument("--chain", required=True, help="snapshot file (.csv/.jsonl)")
    p.add_argument("--out", help="also write the JSON results to this file")
    _add_config_options(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("backtest", help="mark results over a spot series")
    p.add_argument("--results", required=True, help="results JSON from `oql run`")
    p.add_argument("--spots", required=True, help="CSV spot series (date,close)")
    p.add_argument("--entry", required=True, help="entry date YYYY-MM-DD")
    p.add_argument("--exit", required=True, help="exit date YYYY-MM-DD")
    p.add_argument("--iv-policy", choices=bt.IV_POLICIES,
                   default="sticky_entry")
    _add_config_options(p)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("gen-chain", help="write a synthetic chain snapshot")
    p.add_argument("--out", required=True, help="target file (.csv/.jsonl)")
    p.add_argument("--underlying", required=True)
    p.add_argument("--as-of", required=True, help="snapshot date YYYY-MM-DD")
    p.add_argument("--spot", required=True, type=float)
    p.add_argument("--expiries", help="comma-separated expiry dates")
    p.add_argument("--dtes", help="comma-separated days-to-expiry")
    p.add_argument("--strikes", help="comma-separated strikes")
    p.add_argument("--strike-range", help="LO:HI:STEP strike grid")
    p.add_argument("--base-vol", type=float, default=0.2)
    p.add_argument("--skew", type=float, default=0.0)
    p.add_argument("--term", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true",
                   help="overwrite an existing output file")
    _add_config_options(p)
    p.set_defaults(func=cmd_gen_chain)

    p = sub.add_parser("gen-path", help="write a synthetic daily spot series")
    p.add_argument("--out", required=True, help="target CSV")
    p.add_argument("--spot", required=True, type=float)
    p.add_argument("--mu", type=float, default=0.05, help="annualized drift")
    p.add_argument("--sigma", type=float, default=0.2, help="annualized vol")
    p.add_argument("--days", required=True, type=int)
    p.add_argument("--start", required=True, help="first date YYYY-MM-DD")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true",
                   help="overwrite an existing output file")
    _add_config_options(p)
    p.set_defaults(func=cmd_gen_path)

    p = sub.add_parser("eval", help="score attempt transcripts (JSONL cases)")
    p.add_argument("--cases", required=True, help="cases file (JSONL)")
    p.add_argument("--k", type=int, default=evalkit.DEFAULT_K,
                   help="attempt budget per case")
    _add_config_options(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("repl", help="interactive query loop")
    p.add_argument("--chain", required=True, help="snapshot file (.csv/.jsonl)")
    _add_config_options(p)
    p.set_defaults(func=cmd_repl)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 is reserved for empty results
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    try:
        return args.func(args)
    except OqlError as exc:
        _diag(f"error [{exc.stage}]: {exc}")
        return EXIT_ERROR
    except BrokenPipeError:
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
