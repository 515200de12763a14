"""Canonical pretty-printer: QueryAst -> query text.

Single line, single spaces, uppercase keywords, clauses in grammar order.
parse_text(pretty_print(ast)) == ast for every canonical AST.
"""

from ..serialize import format_number
from .ast import LegCondition, OrderItem, QueryAst, StratCondition


def _value_text(value: float | str) -> str:
    if isinstance(value, str):
        return value
    return format_number(value)


def _leg_condition_text(cond: LegCondition) -> str:
    lhs = f"{cond.role}.{cond.field}" if cond.role else cond.field
    return f"{lhs} {cond.op} {_value_text(cond.value)}"


def _strat_condition_text(cond: StratCondition) -> str:
    if cond.op == "BETWEEN":
        return (f"{cond.field} BETWEEN {format_number(cond.lo)} "
                f"AND {format_number(cond.hi)}")
    return f"{cond.field} {cond.op} {_value_text(cond.value)}"


def _order_item_text(item: OrderItem) -> str:
    return f"{item.field} {item.direction}"


def pretty_print(ast: QueryAst) -> str:
    parts = [f"SELECT {ast.strategy} FROM {ast.underlying}"]
    if ast.where:
        parts.append("WHERE " + " AND ".join(map(_leg_condition_text, ast.where)))
    if ast.having:
        parts.append("HAVING " + " AND ".join(map(_strat_condition_text, ast.having)))
    if ast.order_by:
        parts.append("ORDER BY " + ", ".join(map(_order_item_text, ast.order_by)))
    if ast.limit is not None:
        parts.append(f"LIMIT {ast.limit}")
    return " ".join(parts)
