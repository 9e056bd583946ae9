"""Trade-by-trade tape records and their CSV format.

Header: ``timestamp,price,size[,best_bid,best_ask]``. Timestamps are decimal
seconds; prices are in quote currency.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

from .errors import OrderingError, ParseError

log = logging.getLogger(__name__)

REQUIRED = ("timestamp", "price", "size")
OPTIONAL = ("best_bid", "best_ask")


@dataclass(frozen=True, slots=True)
class TradeRecord:
    timestamp: float
    price: float
    size: float
    best_bid: float | None = None
    best_ask: float | None = None

    @property
    def has_quotes(self) -> bool:
        return self.best_bid is not None and self.best_ask is not None

    @property
    def mid(self) -> float | None:
        if not self.has_quotes:
            return None
        return 0.5 * (self.best_bid + self.best_ask)


def _number(text: str, name: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(line, f"{name} is not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ParseError(line, f"{name} is not finite")
    return value


def ingest_trades(source: str | Path | IO[str], time_tolerance: float = 0.0) -> list[TradeRecord]:
    """Parse and validate a trade CSV.

    Rows are expected in time order; a timestamp may step back by at most
    ``time_tolerance`` seconds (such rows are re-sorted), beyond which
    :class:`OrderingError` is raised.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return ingest_trades(fh, time_tolerance)

    reader = csv.reader(source)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        log.warning("empty trade file")
        return []
    if tuple(header[:3]) != REQUIRED or header[3:] not in ([], list(OPTIONAL)):
        raise ParseError(1, f"bad header {header!r}; expected timestamp,price,size[,best_bid,best_ask]")
    has_quotes = len(header) == 5

    records = []
    latest = -math.inf
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(line, f"expected {len(header)} fields, got {len(row)}")
        ts = _number(row[0], "timestamp", line)
        price = _number(row[1], "price", line)
        size = _number(row[2], "size", line)
        if price <= 0:
            raise ParseError(line, "price must be > 0")
        if size <= 0:
            raise ParseError(line, "size must be > 0")
        bid = ask = None
        if has_quotes:
            bid = _number(row[3], "best_bid", line)
            ask = _number(row[4], "best_ask", line)
            if bid <= 0 or ask <= 0 or bid > ask:
                raise ParseError(line, "best quotes must be positive with best_bid <= best_ask")
        if ts < latest - time_tolerance:
            raise OrderingError(line, f"timestamp {ts} precedes {latest}")
        latest = max(latest, ts)
        records.append(TradeRecord(ts, price, size, bid, ask))
    if not records:
        log.warning("trade file has a header but no rows")
    records.sort(key=lambda r: r.timestamp)
    return records


def write_trades(records: Sequence[TradeRecord] | Iterable[TradeRecord], out: IO[str]) -> None:
    records = list(records)
    with_quotes = bool(records) and all(r.has_quotes for r in records)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(REQUIRED + OPTIONAL if with_quotes else REQUIRED)
    for r in records:
        row = [repr(r.timestamp), repr(r.price), repr(r.size)]
        if with_quotes:
            row += [repr(r.best_bid), repr(r.best_ask)]
        w.writerow(row)
