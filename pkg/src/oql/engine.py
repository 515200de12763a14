"""Query execution: filter legs, assemble strategies, aggregate, rank.

The pipeline is tokenize -> parse -> validate -> filter -> assemble ->
aggregate -> having -> order/limit. Execution is fully deterministic:
candidates are sorted by (expiry, strike, ticker) before assembly, results
are canonically ordered with a final tie-break on concatenated leg tickers,
and serialized output is byte-stable under permutation of input records.
"""

import math
from dataclasses import dataclass

from . import chain as chain_mod
from . import pricing
from .catalog import StrategySchema, ValidatedQuery, validate
from .chain import ChainSnapshot, ContractRecord
from .config import RunConfig
from .errors import CombinatorialBudgetExceeded, MultiExpiryUnsupported, UnderlyingMismatch
from .serialize import format_date
from .syntax import LegCondition, QueryAst, StratCondition, parse_text, pretty_print

AGGREGATE_KEYS = (
    "net_debit", "net_credit", "net_delta", "net_gamma", "net_vega",
    "net_theta", "max_loss", "max_profit", "rr_ratio", "width",
    "breakeven_low", "breakeven_high",
)


@dataclass(frozen=True)
class StrategyLeg:
    role: str
    record: ContractRecord
    direction: int
    quantity: int


@dataclass(frozen=True)
class StrategyInstance:
    strategy_type: str
    legs: tuple[StrategyLeg, ...]
    aggregates: dict[str, float | None]

    def ticker_key(self) -> str:
        return "".join(leg.record.ticker for leg in self.legs)


@dataclass
class ExecutionStats:
    candidates: dict[str, int]
    filtered: int
    raw_product: int
    assembled: int
    having_passed: int
    returned: int


@dataclass
class ResultSet:
    query: ValidatedQuery
    text: str
    underlying: str
    as_of: str
    strategies: list[StrategyInstance]
    stats: ExecutionStats


# ============================================================
# Leg predicates
# ============================================================


def soft_match(value: float, target: float, epsilon: float,
               epsilon_abs: float) -> bool:
    """|value - target| <= epsilon * |target|; absolute band when target is 0."""
    if target == 0.0:
        return abs(value) <= epsilon_abs
    return abs(value - target) <= epsilon * abs(target)


def leg_field_value(record: ContractRecord, field: str, spot: float,
                    config: RunConfig) -> float | str | None:
    """Resolve a leg field to a comparable value (None when unavailable)."""
    if field == "Dte":
        return float(record.dte())
    if field == "Moneyness":
        return chain_mod.moneyness(record.option_type, record.strike, spot,
                                   config.atm_band)
    value = getattr(record, field.lower())
    return None if value is None else float(value)


def eval_leg_condition(cond: LegCondition, record: ContractRecord,
                       spot: float, config: RunConfig) -> bool:
    """One leg predicate against one contract; missing values never match."""
    value = leg_field_value(record, cond.field, spot, config)
    if value is None:
        return False
    if isinstance(value, str):
        if cond.op == "=":
            return value == cond.value
        return value != cond.value
    target = float(cond.value)
    if cond.op == "~":
        return soft_match(value, target, config.epsilon_for(cond.field),
                          config.epsilon_abs)
    if cond.op == "=":
        return value == target
    if cond.op == "!=":
        return value != target
    if cond.op == "<":
        return value < target
    if cond.op == ">":
        return value > target
    if cond.op == "<=":
        return value <= target
    return value >= target


def filter_legs(vq: ValidatedQuery, snapshot: ChainSnapshot,
                config: RunConfig) -> dict[str, list[ContractRecord]]:
    """Per-role candidate lists: option type first, then every condition.

    Candidates are sorted by (expiry, strike, ticker) so everything
    downstream is independent of input record order.
    """
    out: dict[str, list[ContractRecord]] = {}
    for role in vq.schema.roles:
        conds = vq.per_role_conditions[role.id]
        cands = [
            rec for rec in snapshot.records
            if (role.option_type == "either" or rec.option_type == role.option_type)
            and all(eval_leg_condition(c, rec, snapshot.spot, config) for c in conds)
        ]
        cands.sort(key=lambda r: (r.expiry, r.strike, r.ticker))
        out[role.id] = cands
    return out


# ============================================================
# Assembly under structural rules
# ============================================================


def _rule_checks_for_depth(schema: StrategySchema):
    """Per-depth incremental checks equivalent to full rule evaluation.

    Rules decompose into adjacent-pair comparisons (orderings and equalities
    are transitive over the rule's role list); each check fires at the depth
    where its last participating role is bound, which prunes the product
    without changing the surviving set or its order.
    """
    index = {rid: i for i, rid in enumerate(schema.role_ids)}
    checks: dict[int, list] = {i: [] for i in range(len(schema.role_ids))}

    def strike(assign, rid):
        return assign[index[rid]].strike

    def expiry(assign, rid):
        return assign[index[rid]].expiry

    for rule in schema.rules:
        if rule.kind == "symmetric_wings":
            lo, body, hi = rule.roles
            depth = max(index[r] for r in rule.roles)

            def check(assign, lo=lo, body=body, hi=hi):
                return (strike(assign, body) - strike(assign, lo)
                        == strike(assign, hi) - strike(assign, body))

            checks[depth].append(check)
            continue
        for a, b in zip(rule.roles, rule.roles[1:]):
            depth = max(index[a], index[b])
            if rule.kind == "strike_order":
                def check(assign, a=a, b=b):
                    return strike(assign, a) < strike(assign, b)
            elif rule.kind == "strike_equal":
                def check(assign, a=a, b=b):
                    return strike(assign, a) == strike(assign, b)
            elif rule.kind == "expiry_equal":
                def check(assign, a=a, b=b):
                    return expiry(assign, a) == expiry(assign, b)
            else:  # expiry_order
                def check(assign, a=a, b=b):
                    return expiry(assign, a) < expiry(assign, b)
            checks[depth].append(check)
    return checks


def assemble(vq: ValidatedQuery, candidates: dict[str, list[ContractRecord]],
             config: RunConfig) -> tuple[list[tuple[ContractRecord, ...]], int]:
    """All role assignments satisfying the schema's structural rules.

    Returns (assignments in product order over the sorted candidate lists,
    raw product size). A contract never fills two roles at once. Raises
    CombinatorialBudgetExceeded when the raw product tops the config cap.
    """
    role_ids = vq.schema.role_ids
    raw = 1
    for rid in role_ids:
        raw *= len(candidates[rid])
    if raw > config.combinatorial_cap:
        raise CombinatorialBudgetExceeded(
            f"raw candidate product {raw} exceeds cap {config.combinatorial_cap}")
    checks = _rule_checks_for_depth(vq.schema)
    results: list[tuple[ContractRecord, ...]] = []
    n = len(role_ids)
    assign: list[ContractRecord | None] = [None] * n

    def extend(depth: int, used: set[str]) -> None:
        if depth == n:
            results.append(tuple(assign))  # type: ignore[arg-type]
            return
        for rec in candidates[role_ids[depth]]:
            if rec.ticker in used:
                continue
            assign[depth] = rec
            if all(check(assign) for check in checks[depth]):
                used.add(rec.ticker)
                extend(depth + 1, used)
                used.remove(rec.ticker)
        assign[depth] = None

    extend(0, set())
    return results, raw


# ============================================================
# Aggregates
# ============================================================


def _payoff_legs(schema: StrategySchema,
                 assignment: tuple[ContractRecord, ...]) -> list[pricing.Leg]:
    legs = []
    for role, rec in zip(schema.roles, assignment):
        legs.append(pricing.Leg(
            direction=role.direction, option_type=rec.option_type,
            strike=rec.strike, expiry_tau=rec.tau(), quantity=role.quantity,
            premium=rec.price))
    return legs


def compute_aggregates(schema: StrategySchema,
                       assignment: tuple[ContractRecord, ...],
                       config: RunConfig) -> dict[str, float | None]:
    """Strategy-level aggregates for one assignment.

    Cash aggregates and net Greeks are scaled by the contract multiplier.
    None marks an unavailable aggregate (it fails HAVING and sorts last);
    +inf marks an unbounded payoff side and stays comparable.
    """
    mult = config.multiplier
    entry_per_share = 0.0
    for role, rec in zip(schema.roles, assignment):
        entry_per_share += role.quantity * role.direction * rec.price
    entry_cash = entry_per_share * mult

    agg: dict[str, float | None] = dict.fromkeys(AGGREGATE_KEYS)
    if entry_cash > 0.0:
        agg["net_debit"] = entry_cash
    elif entry_cash < 0.0:
        agg["net_credit"] = -entry_cash
    else:
        agg["net_debit"] = 0.0  # zero-cost structures count as debit

    for greek in ("delta", "gamma", "vega", "theta"):
        total = 0.0
        for role, rec in zip(schema.roles, assignment):
            value = getattr(rec, greek)
            if value is None:
                total = None
                break
            total += role.quantity * role.direction * value
        agg[f"net_{greek}"] = None if total is None else total * mult

    legs = _payoff_legs(schema, assignment)
    try:
        ext = pricing.payoff_extremes(legs)
        agg["max_profit"] = ext.max_profit * mult
        agg["max_loss"] = ext.max_loss * mult
        lo, hi = pricing.breakevens(legs)
        agg["breakeven_low"] = lo
        agg["breakeven_high"] = hi
    except MultiExpiryUnsupported:
        # different expiries: no terminal payoff; worst case for a debit
        # structure is losing the debit, nothing is claimed for credits
        if entry_cash > 0.0:
            agg["max_loss"] = entry_cash

    max_profit, max_loss = agg["max_profit"], agg["max_loss"]
    if (max_profit is not None and max_loss is not None
            and math.isfinite(max_profit) and math.isfinite(max_loss)
            and max_loss > 0.0):
        agg["rr_ratio"] = max_profit / max_loss

    strikes = [rec.strike for rec in assignment]
    agg["width"] = max(strikes) - min(strikes)
    return agg


def eval_strat_condition(cond: StratCondition, aggregates: dict,
                         config: RunConfig) -> bool:
    """One HAVING predicate; an unavailable aggregate rejects the instance."""
    value = aggregates.get(cond.field)
    if value is None:
        return False
    if cond.op == "BETWEEN":
        return cond.lo <= value <= cond.hi
    target = float(cond.value)
    if cond.op == "~":
        return soft_match(value, target, config.epsilon_for(cond.field),
                          config.epsilon_abs)
    if cond.op == "=":
        return value == target
    if cond.op == "!=":
        return value != target
    if cond.op == "<":
        return value < target
    if cond.op == ">":
        return value > target
    if cond.op == "<=":
        return value <= target
    return value >= target


# ============================================================
# Ordering and the pipeline
# ============================================================


def order_and_limit(instances: list[StrategyInstance], order_by,
                    limit: int | None) -> list[StrategyInstance]:
    """Stable multi-key sort (default ASC), then LIMIT.

    Unavailable sort values go last regardless of direction; ties always
    break on concatenated leg tickers, so the order is total and
    independent of assembly order.
    """
    def key(inst: StrategyInstance):
        parts: list = []
        for item in order_by:
            value = inst.aggregates.get(item.field)
            if value is None:
                parts.extend((1, 0.0))
            else:
                parts.extend((0, value if item.direction == "ASC" else -value))
        parts.append(inst.ticker_key())
        return tuple(parts)

    ranked = sorted(instances, key=key)
    return ranked[:limit] if limit is not None else ranked


def survivors(vq: ValidatedQuery, snapshot: ChainSnapshot,
              config: RunConfig) -> tuple[list[StrategyInstance], ExecutionStats]:
    """Pipeline through HAVING (everything before ORDER BY / LIMIT)."""
    candidates = filter_legs(vq, snapshot, config)
    assignments, raw = assemble(vq, candidates, config)
    instances: list[StrategyInstance] = []
    passed = 0
    for assignment in assignments:
        agg = compute_aggregates(vq.schema, assignment, config)
        if all(eval_strat_condition(c, agg, config)
               for c in vq.strategy_conditions):
            passed += 1
            legs = tuple(
                StrategyLeg(role=role.id, record=rec, direction=role.direction,
                            quantity=role.quantity)
                for role, rec in zip(vq.schema.roles, assignment))
            instances.append(StrategyInstance(
                strategy_type=vq.schema.name, legs=legs, aggregates=agg))
    stats = ExecutionStats(
        candidates={rid: len(candidates[rid]) for rid in vq.schema.role_ids},
        filtered=sum(len(candidates[rid]) for rid in vq.schema.role_ids),
        raw_product=raw,
        assembled=len(assignments),
        having_passed=passed,
        returned=0,
    )
    return instances, stats


def execute(query: str | QueryAst, snapshot: ChainSnapshot,
            config: RunConfig | None = None) -> ResultSet:
    """Run a query against a snapshot end to end."""
    config = config or RunConfig()
    ast = parse_text(query) if isinstance(query, str) else query
    vq = validate(ast, symmetric_wings=config.symmetric_wings)
    if ast.underlying != snapshot.underlying:
        raise UnderlyingMismatch(
            f"query is FROM {ast.underlying} but the snapshot holds "
            f"{snapshot.underlying}")
    snapshot = chain_mod.enrich(snapshot)
    instances, stats = survivors(vq, snapshot, config)
    ranked = order_and_limit(instances, ast.order_by, ast.limit)
    stats.returned = len(ranked)
    return ResultSet(query=vq, text=pretty_print(ast),
                     underlying=snapshot.underlying,
                     as_of=format_date(snapshot.as_of),
                     strategies=ranked, stats=stats)


# ============================================================
# Serialization
# ============================================================


def _aggregates_to_json(agg: dict[str, float | None]) -> dict:
    out: dict = {}
    for key in AGGREGATE_KEYS:
        value = agg[key]
        if key in ("max_loss", "max_profit"):
            unbounded = value is not None and math.isinf(value)
            out[key] = None if (value is None or unbounded) else value
            out[f"{key}_unbounded"] = unbounded
        else:
            out[key] = value
    return out


def _instance_to_json(inst: StrategyInstance, mode: str) -> dict:
    if mode == "blueprint":
        details: dict = {}
        for leg in inst.legs:
            details[f"contract_ticker_{leg.role}"] = leg.record.ticker
            details[f"price_{leg.role}"] = leg.record.price
        return {"strategy_type": inst.strategy_type, "strategy_details": details}
    return {
        "strategy_type": inst.strategy_type,
        "legs": [
            {
                "role": leg.role,
                "ticker": leg.record.ticker,
                "direction": leg.direction,
                "quantity": leg.quantity,
                "strike": leg.record.strike,
                "expiry": format_date(leg.record.expiry),
                "price": leg.record.price,
                "iv": leg.record.iv,
            }
            for leg in inst.legs
        ],
        "aggregates": _aggregates_to_json(inst.aggregates),
    }


def result_to_json(result: ResultSet, config: RunConfig) -> dict:
    """JSON document for a result set (mode comes from the config)."""
    return {
        "query": result.text,
        "strategy_type": result.query.schema.name,
        "underlying": result.underlying,
        "as_of": result.as_of,
        "config": config.to_json_dict(),
        "stats": {
            "candidates": dict(result.stats.candidates),
            "filtered": result.stats.filtered,
            "raw_product": result.stats.raw_product,
            "assembled": result.stats.assembled,
            "having_passed": result.stats.having_passed,
            "returned": result.stats.returned,
        },
        "strategies": [
            _instance_to_json(inst, config.output_mode)
            for inst in result.strategies
        ],
    }


def result_to_table(result: ResultSet) -> str:
    """Fixed-width human-readable listing of a result set."""
    header = (f"{result.query.schema.name} on {result.underlying} "
              f"as of {result.as_of}: {len(result.strategies)} result(s)")
    lines = [header]
    for rank, inst in enumerate(result.strategies, start=1):
        legs = " ".join(
            f"{leg.role}={leg.record.ticker}@{leg.record.price:g}"
            for leg in inst.legs)
        agg = inst.aggregates

        def cell(key: str) -> str:
            value = agg[key]
            if value is None:
                return "-"
            if math.isinf(value):
                return "unbounded"
            return f"{value:.4g}"

        lines.append(f"#{rank} {legs}")
        lines.append(
            f"    net_debit={cell('net_debit')} net_credit={cell('net_credit')} "
            f"max_loss={cell('max_loss')} max_profit={cell('max_profit')} "
            f"rr_ratio={cell('rr_ratio')} net_delta={cell('net_delta')} "
            f"net_theta={cell('net_theta')}")
    return "\n".join(lines)
