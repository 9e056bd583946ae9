"""Event-driven replay of a quoting policy on a trade-by-trade tape.

Orders of one ATS rest on each side at prices rounded to the tick grid. A
resting ask fills when a trade prints at or above it, a bid when a trade
prints at or below it. Quotes are re-evaluated when a side is completely
filled or when the resting orders reach the requote period ``requote_dt``;
partial fills leave the remainder resting until then.

Internally prices are in Ticks (currency / ``tick_size``) and positions in
shares; P&L is reported in currency.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import IO, Sequence

import numpy as np

from .errors import DegenerateFit, DomainError, InsufficientData, MissingQuotes
from .model import ModelParams
from .simulator import DELTA_FLOOR, QuotingPolicy
from .tape import TradeRecord, ingest_trades  # noqa: F401  (re-exported)

EPS = 1e-9


@dataclass(frozen=True)
class BacktestConfig:
    """Replay settings.

    ``reference_price_rule`` is ``"mid"`` (falls back to the last trade when
    a row has no quotes), ``"last"`` or ``"ewma"``; the EWMA runs on the mid
    (or last trade) with half-life ``ewma_half_life`` seconds.
    """

    params: ModelParams
    tick_size: float = 1.0
    requote_dt: float = 5.0
    ats: float = 1.0
    reference_price_rule: str = "mid"
    ewma_half_life: float = 30.0
    tick_rounding: bool = True
    delta_floor: float = DELTA_FLOOR
    q0: float = 0.0  # initial position in ATS units

    def __post_init__(self):
        if not self.requote_dt > 0:
            raise DomainError("requote_dt", "must be > 0")
        if not self.ats > 0:
            raise DomainError("ats", "must be > 0")
        if not self.tick_size > 0:
            raise DomainError("tick_size", "must be > 0")
        if self.reference_price_rule not in ("mid", "last", "ewma"):
            raise DomainError("reference_price_rule", f"unknown rule {self.reference_price_rule!r}")
        if self.reference_price_rule == "ewma" and not self.ewma_half_life > 0:
            raise DomainError("ewma_half_life", "must be > 0")
        if abs(self.q0) > self.params.Q:
            raise DomainError("q0", f"|q0| must be <= {self.params.Q}")


def round_bid(price_ticks: float) -> float:
    """Nearest tick; ties go down, away from the reference price."""
    return float(math.ceil(price_ticks - 0.5 - EPS))


def round_ask(price_ticks: float) -> float:
    """Nearest tick; ties go up."""
    return float(math.floor(price_ticks + 0.5 + EPS))


@dataclass
class Fill:
    event: int  # index of the tape row that traded through
    time: float
    side: str  # "bid" (we bought) or "ask" (we sold)
    price: float  # currency
    quantity: float  # shares
    position: float  # shares after the fill


@dataclass
class Requote:
    time: float
    reason: str  # init | fill | expiry
    reference: float  # currency
    bid: float | None  # currency
    ask: float | None


@dataclass
class BacktestReport:
    label: str
    times: np.ndarray
    reference: np.ndarray  # currency
    pnl: np.ndarray  # currency, marked at the reference price
    inventory: np.ndarray  # ATS units
    fills: list[Fill]
    requotes: list[Requote]
    ats: float
    q0_shares: float

    @property
    def final_pnl(self) -> float:
        return float(self.pnl[-1]) if self.pnl.size else 0.0

    def summary(self) -> dict:
        return {
            "label": self.label,
            "n_events": int(self.times.size),
            "n_fills": len(self.fills),
            "n_requotes": len(self.requotes),
            "final_pnl": self.final_pnl,
            "final_inventory": float(self.inventory[-1]) if self.inventory.size else self.q0_shares / self.ats,
            "max_abs_inventory": float(np.abs(self.inventory).max()) if self.inventory.size else abs(self.q0_shares / self.ats),
            "shares_bought": float(sum(f.quantity for f in self.fills if f.side == "bid")),
            "shares_sold": float(sum(f.quantity for f in self.fills if f.side == "ask")),
        }

    def recompute_pnl(self) -> np.ndarray:
        """P&L series rebuilt from the fill log and the reference series alone."""
        cash = np.zeros(self.times.size)
        pos = np.full(self.times.size, self.q0_shares)
        j = 0
        c, q = 0.0, self.q0_shares
        fills = self.fills
        for i in range(self.times.size):
            while j < len(fills) and fills[j].event <= i:
                f = fills[j]
                sign = 1.0 if f.side == "ask" else -1.0
                c += sign * f.price * f.quantity
                q -= sign * f.quantity
                j += 1
            cash[i], pos[i] = c, q
        ref0 = self.reference[0] if self.reference.size else 0.0
        return cash + pos * self.reference - self.q0_shares * ref0

    def to_dict(self) -> dict:
        return {
            "summary": self.summary(),
            "series": {
                "time": self.times.tolist(),
                "reference": self.reference.tolist(),
                "pnl": self.pnl.tolist(),
                "inventory": self.inventory.tolist(),
            },
            "fills": [asdict(f) for f in self.fills],
            "requotes": [asdict(r) for r in self.requotes],
        }

    def write_json(self, out: IO[str]) -> None:
        json.dump(self.to_dict(), out, indent=1)

    def write_csv(self, out: IO[str]) -> None:
        """Series section followed by the event log, separated by a blank line."""
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["time", "reference", "pnl", "inventory"])
        for row in zip(self.times, self.reference, self.pnl, self.inventory):
            w.writerow([repr(float(x)) for x in row])
        w.writerow([])
        w.writerow(["event", "time", "side_or_reason", "price_or_reference", "quantity_or_bid", "position_or_ask"])
        for f in self.fills:
            w.writerow(["fill", repr(f.time), f.side, repr(f.price), repr(f.quantity), repr(f.position)])
        for r in self.requotes:
            w.writerow(["requote", repr(r.time), r.reason, repr(r.reference),
                        "" if r.bid is None else repr(r.bid), "" if r.ask is None else repr(r.ask)])


class _Reference:
    def __init__(self, rule: str, half_life: float, tick: float):
        self.rule = rule
        self.decay = math.log(2.0) / half_life
        self.tick = tick
        self.value: float | None = None  # Ticks
        self.time: float | None = None

    def update(self, rec: TradeRecord) -> float:
        raw = rec.price if (self.rule == "last" or not rec.has_quotes) else rec.mid
        raw /= self.tick
        if self.rule == "ewma" and self.value is not None:
            w = math.exp(-self.decay * (rec.timestamp - self.time))
            self.value = w * self.value + (1.0 - w) * raw
        else:
            self.value = raw
        self.time = rec.timestamp
        return self.value


class _Book:
    """Our resting orders: price in Ticks and remaining shares, per side."""

    def __init__(self):
        self.bid = self.ask = None
        self.bid_left = self.ask_left = 0.0
        self.posted_at = 0.0


def _replay(records, config: BacktestConfig, quoter, label: str) -> BacktestReport:
    ats = config.ats
    Q = config.params.Q
    tick = config.tick_size
    ref = _Reference(config.reference_price_rule, config.ewma_half_life, tick)
    book = _Book()
    position = config.q0 * ats
    cash = 0.0
    fills: list[Fill] = []
    requotes: list[Requote] = []
    times, refs, pnl, inv = [], [], [], []
    if not records:
        return BacktestReport(label, np.array([]), np.array([]), np.array([]), np.array([]), [], [], ats, position)
    t0 = records[0].timestamp
    ref0 = None

    def post(t: float, reason: str, rec: TradeRecord | None):
        q_units = position / ats
        bid, ask = quoter(t - t0, int(round(q_units)), ref.value, rec)
        book.bid = book.ask = None
        book.bid_left = book.ask_left = 0.0
        if bid is not None and position + ats <= Q * ats + EPS:
            book.bid, book.bid_left = bid, ats
        if ask is not None and position - ats >= -Q * ats - EPS:
            book.ask, book.ask_left = ask, ats
        book.posted_at = t
        requotes.append(Requote(t, reason, ref.value * tick,
                                None if book.bid is None else book.bid * tick,
                                None if book.ask is None else book.ask * tick))

    last_rec = None
    for n, rec in enumerate(records):
        t = rec.timestamp
        if n > 0:
            elapsed = t - book.posted_at
            if elapsed >= config.requote_dt:
                expiry = book.posted_at + math.floor(elapsed / config.requote_dt + EPS) * config.requote_dt
                post(min(expiry, t), "expiry", last_rec)
            px = rec.price / tick
            full = False
            if book.ask is not None and book.ask_left > 0 and px >= book.ask - EPS:
                qty = min(book.ask_left, rec.size)
                book.ask_left -= qty
                position -= qty
                cash += book.ask * tick * qty
                fills.append(Fill(n, t, "ask", book.ask * tick, qty, position))
                full = book.ask_left <= EPS
            elif book.bid is not None and book.bid_left > 0 and px <= book.bid + EPS:
                qty = min(book.bid_left, rec.size)
                book.bid_left -= qty
                position += qty
                cash -= book.bid * tick * qty
                fills.append(Fill(n, t, "bid", book.bid * tick, qty, position))
                full = book.bid_left <= EPS
        ref.update(rec)
        if ref0 is None:
            ref0 = ref.value
        if n == 0:
            post(t, "init", rec)
        elif full:
            post(t, "fill", rec)
        last_rec = rec
        times.append(t)
        refs.append(ref.value * tick)
        inv.append(position / ats)
        pnl.append(cash + position * ref.value * tick - config.q0 * ats * ref0 * tick)
    return BacktestReport(
        label, np.array(times), np.array(refs), np.array(pnl), np.array(inv), fills, requotes, ats, config.q0 * ats
    )


def run_backtest(records: Sequence[TradeRecord], config: BacktestConfig, policy: QuotingPolicy) -> BacktestReport:
    """Replay ``policy`` on the tape.

    The policy clock starts at the first record and is clamped to the
    horizon ``T``. Inventory passed to the policy is the position in ATS
    units rounded to the nearest integer.
    """
    T = config.params.T
    floor = config.delta_floor

    def quoter(t, q, reference, rec):
        pair = policy.quote(min(t, T), max(-config.params.Q, min(config.params.Q, q)))
        bid = ask = None
        if pair.delta_b is not None and math.isfinite(pair.delta_b):
            bid = reference - max(pair.delta_b, floor)
            bid = round_bid(bid) if config.tick_rounding else bid
        if pair.delta_a is not None and math.isfinite(pair.delta_a):
            ask = reference + max(pair.delta_a, floor)
            ask = round_ask(ask) if config.tick_rounding else ask
        return bid, ask

    return _replay(records, config, quoter, getattr(policy, "label", "policy"))


def naive_baseline(records: Sequence[TradeRecord], config: BacktestConfig) -> BacktestReport:
    """Same replay with orders pinned to the prevailing best bid and ask."""
    if records and not all(r.has_quotes for r in records):
        raise MissingQuotes("naive baseline needs best_bid and best_ask on every row")
    tick = config.tick_size

    def quoter(t, q, reference, rec):
        bid, ask = rec.best_bid / tick, rec.best_ask / tick
        if config.tick_rounding:
            bid, ask = round_bid(bid), round_ask(ask)
        return bid, ask

    return _replay(records, config, quoter, "naive")


# -- calibration ----------------------------------------------------------------


@dataclass(frozen=True)
class Calibration:
    sigma: float
    A: float
    k: float
    n_trades: int
    duration: float
    buckets: tuple[tuple[float, float], ...] = field(default=(), repr=False)  # (delta, rate)


def calibrate(
    records: Sequence[TradeRecord],
    window: int | None = None,
    *,
    tick_size: float = 1.0,
    min_trades: int = 500,
    bucket_width: float = 0.5,
    min_bucket_count: int = 20,
) -> Calibration:
    """Estimate ``sigma``, ``A`` and ``k`` from the last ``window`` trades.

    ``sigma`` comes from the realised variance of the mid. For the fill
    intensity, each trade's distance from the mid is measured on its own
    side; the rate of trades at or beyond ``delta`` (per side, per second)
    is fitted as ``log A - k delta`` by weighted least squares over a grid
    of ``delta`` values.
    """
    if window is not None:
        if window < min_trades:
            raise InsufficientData(f"window {window} is below the minimum of {min_trades} trades")
        records = records[-window:]
    if len(records) < min_trades:
        raise InsufficientData(f"{len(records)} trades, need at least {min_trades}")
    if not all(r.has_quotes for r in records):
        raise MissingQuotes("calibration needs best_bid and best_ask on every row")
    t = np.array([r.timestamp for r in records])
    mid = np.array([r.mid for r in records]) / tick_size
    px = np.array([r.price for r in records]) / tick_size
    duration = float(t[-1] - t[0])
    if duration <= 0:
        raise InsufficientData("window spans no time")

    sigma = math.sqrt(float(np.sum(np.diff(mid) ** 2)) / duration)

    dist = np.abs(px - mid)
    top = dist.max()
    grid = np.arange(0.0, top + bucket_width, bucket_width)
    counts = np.array([(dist >= d - EPS).sum() for d in grid], dtype=float)
    occupied = counts >= min_bucket_count
    if occupied.sum() < 3:
        raise DegenerateFit(f"only {int(occupied.sum())} occupied distance buckets")
    rates = counts[occupied] / (2.0 * duration)
    slope, intercept = np.polyfit(grid[occupied], np.log(rates), 1, w=np.sqrt(counts[occupied]))
    return Calibration(
        sigma=sigma,
        A=float(math.exp(intercept)),
        k=float(-slope),
        n_trades=len(records),
        duration=duration,
        buckets=tuple(zip(grid[occupied].tolist(), rates.tolist())),
    )
