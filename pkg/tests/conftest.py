"""Shared fixtures: deterministic synthetic chains used across modules."""

from __future__ import annotations

import datetime as dt

import pytest

from oql.chain import ChainSnapshot, generate_synthetic

TSLA_AS_OF = dt.date(2025, 6, 2)
QQQ_AS_OF = dt.date(2025, 6, 2)

# Two reference queries exercised end to end (parse, validate, execute).
CONDOR_QUERY_QQQ = (
    "SELECT IRON_CONDOR FROM QQQ WHERE SC.Dte ~ 30 AND LC.Dte ~ 30 "
    "AND SP.Dte ~ 30 AND LP.Dte ~ 30 HAVING net_credit >= 100 "
    "ORDER BY rr_ratio DESC"
)
CONDOR_QUERY_TSLA = (
    "SELECT IRON_CONDOR FROM TSLA WHERE Dte ~ 30 AND SC.Delta < 0.20 "
    "AND LC.Delta < 0.05 AND SP.Delta > -0.20 AND LP.Delta > -0.05 "
    "HAVING net_theta > 0 AND max_loss < 500 LIMIT 10"
)


def make_tsla_snapshot() -> ChainSnapshot:
    """300-spot chain with 5-wide strikes out to 40% OTM, two expiries.

    Wide enough that delta-targeted condors with 5-point wings exist; the
    TSLA reference query returns rows on it.
    """
    return generate_synthetic(
        underlying="TSLA",
        as_of=TSLA_AS_OF,
        spot=300.0,
        rate=0.04,
        expiries=[TSLA_AS_OF + dt.timedelta(days=d) for d in (30, 60)],
        strikes=[180.0 + 5.0 * i for i in range(49)],
        base_vol=0.5,
        skew=-0.2,
        term=0.1,
        seed=7,
    )


def make_qqq_snapshot() -> ChainSnapshot:
    return generate_synthetic(
        underlying="QQQ",
        as_of=QQQ_AS_OF,
        spot=500.0,
        rate=0.04,
        expiries=[QQQ_AS_OF + dt.timedelta(days=d) for d in (30, 60)],
        strikes=[400.0 + 10.0 * i for i in range(21)],
        base_vol=0.25,
        skew=-0.1,
        term=0.05,
        seed=11,
    )


@pytest.fixture(scope="session")
def tsla_snapshot() -> ChainSnapshot:
    return make_tsla_snapshot()


@pytest.fixture(scope="session")
def qqq_snapshot() -> ChainSnapshot:
    return make_qqq_snapshot()
