import io
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmladder import DegenerateFit, DomainError, InsufficientData, MissingQuotes, ModelParams
from mmladder.backtest import BacktestConfig, calibrate, naive_baseline, round_ask, round_bid, run_backtest
from mmladder.simulator import constant_policy, generate_tape
from mmladder.tape import TradeRecord

P = ModelParams(sigma=0.3, A=0.9, k=0.3, gamma=0.01, T=600.0, Q=3)


def rec(t, px, size=1.0, mid=100.0):
    return TradeRecord(t, px, size, mid - 0.5, mid + 0.5)


def config(**kw):
    kw.setdefault("requote_dt", 100.0)
    return BacktestConfig(params=P, **kw)


def test_round_trip_example():
    tape = [rec(0, 100.0), rec(1, 103.0), rec(2, 97.5)]
    rep = run_backtest(tape, config(), constant_policy(2.0, 2.0, P.Q))
    assert [(f.side, f.price, f.position) for f in rep.fills] == [("ask", 102.0, -1.0), ("bid", 98.0, 0.0)]
    np.testing.assert_allclose(rep.pnl, [0.0, 2.0, 4.0])
    assert [r.reason for r in rep.requotes] == ["init", "fill", "fill"]


def test_no_fill_without_trade_through():
    tape = [rec(0, 100.0), rec(1, 101.9), rec(2, 98.1)]
    rep = run_backtest(tape, config(), constant_policy(2.0, 2.0, P.Q))
    assert rep.fills == []
    np.testing.assert_array_equal(rep.pnl, 0.0)


def test_partial_fill_keeps_resting_order():
    tape = [rec(0, 100.0), rec(1, 103.0, size=0.4), rec(2, 103.0, size=1.0)]
    rep = run_backtest(tape, config(), constant_policy(2.0, 2.0, P.Q))
    assert [f.quantity for f in rep.fills] == pytest.approx([0.4, 0.6])
    assert [r.reason for r in rep.requotes] == ["init", "fill"]
    assert rep.inventory[-1] == pytest.approx(-1.0)


def test_expiry_requotes_on_the_clock():
    tape = [rec(0, 100.0), rec(12.0, 100.0, mid=101.0), rec(13.0, 100.0)]
    rep = run_backtest(tape, config(requote_dt=5.0), constant_policy(2.0, 2.0, P.Q))
    assert [(r.time, r.reason) for r in rep.requotes] == [(0.0, "init"), (10.0, "expiry")]
    # the expiry requote uses the reference prevailing before the new trade
    assert rep.requotes[1].reference == 100.0


def test_position_limit_blocks_side():
    tape = [rec(0, 100.0)] + [rec(t, 90.0) for t in range(1, 6)]
    rep = run_backtest(tape, config(), constant_policy(2.0, 2.0, P.Q))
    assert rep.inventory.max() == P.Q
    assert rep.requotes[-1].bid is None


def test_tick_rounding_direction():
    tape = [rec(0, 100.0), rec(1, 97.0), rec(2, 103.0)]
    rep = run_backtest(tape, config(), constant_policy(2.5, 2.5, P.Q))
    assert rep.requotes[0].bid == 97.0 and rep.requotes[0].ask == 103.0
    assert round_bid(97.5) == 97.0 and round_ask(102.5) == 103.0


@given(st.floats(-1e6, 1e6))
def test_rounding_brackets_and_idempotent(x):
    b, a = round_bid(x), round_ask(x)
    assert b <= x + 0.5 + 1e-9 and a >= x - 0.5 - 1e-9
    assert round_bid(b) == b and round_ask(a) == a
    assert b == int(b) and a == int(a)


@pytest.fixture(scope="module")
def tape():
    return generate_tape(ModelParams(sigma=0.3, A=0.9, k=0.3, gamma=0.01, T=600.0, Q=30), 600.0, seed=4)


def test_pnl_recomputable_and_reports(tape):
    cfg = BacktestConfig(params=P.replace(Q=30), reference_price_rule="ewma")
    rep = run_backtest(tape, cfg, constant_policy(3.0, 3.0, 30))
    assert len(rep.fills) > 10
    assert np.abs(rep.recompute_pnl() - rep.pnl).max() <= 1e-9
    base = naive_baseline(tape, cfg)
    assert set(base.summary()) == set(rep.summary())
    assert np.abs(base.recompute_pnl() - base.pnl).max() <= 1e-9
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["summary"]["n_fills"] == len(rep.fills)
    buf = io.StringIO()
    rep.write_csv(buf)
    assert buf.getvalue().startswith("time,reference,pnl,inventory\n")


def test_naive_needs_quotes():
    tape = [TradeRecord(0.0, 100.0, 1.0), TradeRecord(1.0, 101.0, 1.0)]
    with pytest.raises(MissingQuotes):
        naive_baseline(tape, config())
    rep = run_backtest(tape, config(reference_price_rule="last"), constant_policy(2.0, 2.0, P.Q))
    assert rep.reference.tolist() == [100.0, 101.0]


def test_config_validation():
    with pytest.raises(DomainError):
        config(requote_dt=0.0)
    with pytest.raises(DomainError):
        config(reference_price_rule="vwap")
    with pytest.raises(DomainError):
        config(q0=5)


def test_calibration_recovers_parameters():
    p = ModelParams(sigma=0.3, A=0.9, k=0.3, gamma=0.01, T=600.0, Q=30)
    cal = calibrate(generate_tape(p, 20_000.0, seed=12))
    assert cal.sigma == pytest.approx(0.3, rel=0.05)
    assert cal.A == pytest.approx(0.9, rel=0.15)
    assert cal.k == pytest.approx(0.3, rel=0.15)


def test_calibration_errors(tape):
    with pytest.raises(InsufficientData):
        calibrate(tape[:100])
    with pytest.raises(InsufficientData):
        calibrate(tape, window=100)
    with pytest.raises(MissingQuotes):
        calibrate([TradeRecord(float(i), 100.0, 1.0) for i in range(600)])
    flat = [TradeRecord(float(i), 100.0, 1.0, 99.5, 100.5) for i in range(600)]
    with pytest.raises(DegenerateFit):
        calibrate(flat)
