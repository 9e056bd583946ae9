"""Monte Carlo simulation of a market maker quoting around a diffusive price.

Fills are discretised on a fixed step: a side quoted at offset ``d`` fills
within a step with probability ``1 - exp(-A exp(-k d) dt)``. The
discretisation bias is O(dt).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import IO, Callable, Sequence

import numba
import numpy as np

from .errors import DomainError
from .model import ModelParams, Variant
from .ode import ValueLadder
from .quotes import (
    AsymptoticSolution,
    QuotePair,
    gaussian_approximation,
    quote_surface,
    taylor_quotes_near_T,
)
from .tape import TradeRecord

DELTA_FLOOR = -10.0


class QuotingPolicy:
    """Map ``(t, q) -> QuotePair`` plus a vectorised table for simulation.

    ``table(times, Q)`` returns bid and ask offsets of shape
    ``(len(times), 2Q+1)`` with NaN where no order is posted. Subclasses
    override it when a faster route exists; the default calls ``quote``.
    """

    def __init__(self, quote: Callable[[float, int], QuotePair], label: str = "custom"):
        self._quote = quote
        self.label = label

    def quote(self, t: float, q: int) -> QuotePair:
        return self._quote(t, q)

    def table(self, times: np.ndarray, Q: int) -> tuple[np.ndarray, np.ndarray]:
        times = np.asarray(times, dtype=float)
        bid = np.full((times.size, 2 * Q + 1), np.nan)
        ask = np.full_like(bid, np.nan)
        for j, t in enumerate(times):
            for q in range(-Q, Q + 1):
                pair = self.quote(float(t), q)
                if pair.delta_b is not None and q < Q:
                    bid[j, q + Q] = pair.delta_b
                if pair.delta_a is not None and q > -Q:
                    ask[j, q + Q] = pair.delta_a
        return bid, ask


class _TimeInvariantPolicy(QuotingPolicy):
    def __init__(self, bid: np.ndarray, ask: np.ndarray, label: str):
        self._bid = np.asarray(bid, dtype=float)
        self._ask = np.asarray(ask, dtype=float)
        self.label = label
        self.Q = (self._bid.size - 1) // 2

    def quote(self, t, q):
        i = int(q) + self.Q
        b, a = self._bid[i], self._ask[i]
        return QuotePair(None if math.isnan(b) else float(b), None if math.isnan(a) else float(a))

    def table(self, times, Q):
        if Q != self.Q:
            raise DomainError("Q", f"policy built for Q={self.Q}")
        n = np.asarray(times).size
        return np.broadcast_to(self._bid, (n, self._bid.size)), np.broadcast_to(self._ask, (n, self._ask.size))


class OptimalPolicy(QuotingPolicy):
    label = "optimal"

    def __init__(self, ladder: ValueLadder):
        self.ladder = ladder

    def quote(self, t, q):
        from .quotes import optimal_quotes

        return optimal_quotes(self.ladder, min(max(t, 0.0), self.ladder.T), q)

    def table(self, times, Q):
        if Q != self.ladder.Q:
            raise DomainError("Q", f"policy built for Q={self.ladder.Q}")
        times = np.clip(np.asarray(times, dtype=float), 0.0, self.ladder.T)
        return quote_surface(self.ladder, times)


class TaylorPolicy(QuotingPolicy):
    label = "taylor"

    def __init__(self, params: ModelParams):
        self.params = params

    def quote(self, t, q):
        return taylor_quotes_near_T(self.params, min(t, self.params.T), q)


def asymptotic_policy(solution: AsymptoticSolution) -> QuotingPolicy:
    return _TimeInvariantPolicy(solution.delta_b, solution.delta_a, "asymptotic")


def gaussian_policy(params: ModelParams, variant: Variant | str = Variant.BASE) -> QuotingPolicy:
    pairs = [gaussian_approximation(params, variant, q) for q in range(-params.Q, params.Q + 1)]
    bid = np.array([np.nan if p.delta_b is None else p.delta_b for p in pairs])
    ask = np.array([np.nan if p.delta_a is None else p.delta_a for p in pairs])
    return _TimeInvariantPolicy(bid, ask, "gaussian-approx")


def constant_policy(delta_b: float, delta_a: float, Q: int) -> QuotingPolicy:
    """Same offsets at every inventory; the bound still silences one side at ``|q| = Q``."""
    bid = np.full(2 * Q + 1, float(delta_b))
    ask = np.full(2 * Q + 1, float(delta_a))
    bid[-1] = np.nan
    ask[0] = np.nan
    return _TimeInvariantPolicy(bid, ask, "symmetric-constant" if delta_b == delta_a else "custom")


# -- simulation ----------------------------------------------------------------


@dataclass
class SimPath:
    times: np.ndarray  # step grid, length n_steps + 1
    prices: np.ndarray
    cash: np.ndarray
    inventory: np.ndarray
    fills: list[tuple[str, float, float]]  # (side, time, executed price)

    @property
    def terminal_wealth(self) -> float:
        return float(self.cash[-1] + self.inventory[-1] * self.prices[-1])


@dataclass
class SimSummary:
    n_paths: int
    dt: float
    seed: int
    policy: str
    mean_wealth: float
    var_wealth: float
    stderr_wealth: float
    certainty_equivalent: float
    stderr_certainty_equivalent: float
    mean_inventory: float
    max_abs_inventory: int
    inventory_histogram: dict[int, int]
    terminal_inventory_histogram: dict[int, int]
    bid_fills: int
    ask_fills: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["inventory_histogram"] = {str(k): v for k, v in self.inventory_histogram.items()}
        d["terminal_inventory_histogram"] = {str(k): v for k, v in self.terminal_inventory_histogram.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class SimResult:
    summary: SimSummary
    wealth: np.ndarray  # terminal wealth minus initial wealth, per path
    paths: list[SimPath] = field(default_factory=list)


@numba.njit(cache=True)
def _run_path(rng, table, n_steps, Q, q0, x0, s0, drift_dt, vol_dt, xi, occupancy, keep,
              s_out, x_out, q_out, ev_step, ev_side, ev_price):
    # table[q + Q, n] = (bid fill prob, ask fill prob, bid offset, ask offset)
    q = q0
    x = x0
    s = s0
    n_ev = 0
    nb = 0
    na = 0
    for n in range(n_steps):
        i = q + Q
        row = table[i, n]
        occupancy[i] += 1
        if keep:
            s_out[n] = s
            x_out[n] = x
            q_out[n] = q
        dq = 0
        jump = 0.0
        if rng.random() < row[0]:
            px = s - row[2]
            x -= px
            dq += 1
            jump -= xi
            nb += 1
            if keep:
                ev_step[n_ev] = n
                ev_side[n_ev] = 1
                ev_price[n_ev] = px
                n_ev += 1
        if rng.random() < row[1]:
            px = s + row[3]
            x += px
            dq -= 1
            jump += xi
            na += 1
            if keep:
                ev_step[n_ev] = n
                ev_side[n_ev] = -1
                ev_price[n_ev] = px
                n_ev += 1
        q += dq
        s += jump + drift_dt + vol_dt * rng.standard_normal()
    if keep:
        s_out[n_steps] = s
        x_out[n_steps] = x
        q_out[n_steps] = q
    return q, x, s, nb, na, n_ev


def _fill_tables(params, policy, times, dt, delta_floor):
    bid, ask = policy.table(times, params.Q)
    bid = np.maximum(np.asarray(bid, dtype=float), delta_floor)  # NaN stays NaN
    ask = np.maximum(np.asarray(ask, dtype=float), delta_floor)
    with np.errstate(over="ignore"):
        pb = -np.expm1(-params.A * np.exp(-params.k * bid) * dt)
        pa = -np.expm1(-params.A * np.exp(-params.k * ask) * dt)
    # no order, or an infinitely deep one, never fills
    pb = np.where(np.isnan(pb), -1.0, pb)
    pa = np.where(np.isnan(pa), -1.0, pa)
    pb[:, -1] = -1.0
    pa[:, 0] = -1.0
    return pb, pa, np.nan_to_num(bid, nan=0.0, posinf=0.0), np.nan_to_num(ask, nan=0.0, posinf=0.0)


def path_streams(seed: int, n_paths: int) -> list[np.random.Generator]:
    """Independent generators keyed by ``(seed, path index)``."""
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n_paths)]


def certainty_equivalent(wealth: np.ndarray, gamma: float) -> tuple[float, float]:
    """``-(1/gamma) log E[exp(-gamma W)]`` and its delta-method standard error."""
    wealth = np.asarray(wealth, dtype=float)
    shift = wealth.min()
    u = np.exp(-gamma * (wealth - shift))
    m = u.mean()
    ce = shift - math.log(m) / gamma
    se = u.std(ddof=1) / (math.sqrt(wealth.size) * m * gamma) if wealth.size > 1 else math.inf
    return ce, se


def simulate(
    params: ModelParams,
    policy: QuotingPolicy,
    n_paths: int,
    dt: float,
    seed: int,
    *,
    variant: Variant | str = Variant.BASE,
    q0: int = 0,
    x0: float = 0.0,
    s0: float = 100.0,
    delta_floor: float = DELTA_FLOOR,
    keep_paths: int = 0,
) -> SimResult:
    """Simulate ``n_paths`` independent trajectories over ``[0, T]``.

    The drift variant moves the price by ``mu dt`` per step and the impact
    variant shifts it by ``-xi`` on a bid fill and ``+xi`` on an ask fill;
    the base variant ignores both. The first ``keep_paths`` trajectories are
    returned in full.
    """
    if not dt > 0:
        raise DomainError("dt", "must be > 0")
    if int(n_paths) != n_paths or n_paths < 1:
        raise DomainError("n_paths", "must be a positive integer")
    if abs(q0) > params.Q:
        raise DomainError("q0", f"|q0| must be <= {params.Q}")
    variant = Variant(variant)
    n_steps = int(round(params.T / dt))
    if n_steps < 1 or not math.isclose(n_steps * dt, params.T, rel_tol=1e-9):
        raise DomainError("dt", "must divide the horizon T")
    times = np.arange(n_steps) * dt
    pb, pa, db, da = _fill_tables(params, policy, times, dt, delta_floor)
    # inventory-major so a path sitting at one q streams through memory
    table = np.ascontiguousarray(np.stack([pb, pa, db, da], axis=-1).transpose(1, 0, 2))
    del pb, pa, db, da

    drift_dt = params.mu * dt if variant is Variant.DRIFT else 0.0
    xi = params.xi if variant is Variant.IMPACT else 0.0
    vol_dt = params.sigma * math.sqrt(dt)
    Q = params.Q

    occupancy = np.zeros(2 * Q + 1, dtype=np.int64)
    terminal_q = np.zeros(2 * Q + 1, dtype=np.int64)
    wealth = np.empty(n_paths)
    nb_tot = na_tot = 0
    max_abs_q = abs(q0)
    paths = []
    empty_f = np.empty(0)
    empty_i = np.empty(0, dtype=np.int64)
    for p, rng in enumerate(path_streams(seed, n_paths)):
        keep = p < keep_paths
        if keep:
            s_out, x_out = np.empty(n_steps + 1), np.empty(n_steps + 1)
            q_out = np.empty(n_steps + 1, dtype=np.int64)
            ev_step = np.empty(2 * n_steps, dtype=np.int64)
            ev_side = np.empty(2 * n_steps, dtype=np.int64)
            ev_price = np.empty(2 * n_steps)
        else:
            s_out = x_out = ev_price = empty_f
            q_out = ev_step = ev_side = empty_i
        path_occ = np.zeros(2 * Q + 1, dtype=np.int64)
        q, x, s, nb, na, n_ev = _run_path(
            rng, table, n_steps, Q, q0, x0, s0, drift_dt, vol_dt, xi, path_occ, keep,
            s_out, x_out, q_out, ev_step, ev_side, ev_price,
        )
        occupancy += path_occ
        terminal_q[q + Q] += 1
        visited = np.nonzero(path_occ)[0] - Q
        max_abs_q = max(max_abs_q, abs(q), int(np.abs(visited).max()))
        wealth[p] = (x + q * s) - (x0 + q0 * s0)
        nb_tot += nb
        na_tot += na
        if keep:
            fills = [
                ("bid" if ev_side[j] > 0 else "ask", float(times[ev_step[j]]), float(ev_price[j]))
                for j in range(n_ev)
            ]
            paths.append(SimPath(np.append(times, params.T), s_out, x_out, q_out, fills))

    ce, ce_se = certainty_equivalent(wealth, params.gamma)
    qs = np.arange(-Q, Q + 1)
    summary = SimSummary(
        n_paths=int(n_paths),
        dt=float(dt),
        seed=int(seed),
        policy=policy.label,
        mean_wealth=float(wealth.mean()),
        var_wealth=float(wealth.var(ddof=1)) if n_paths > 1 else 0.0,
        stderr_wealth=float(wealth.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else math.inf,
        certainty_equivalent=float(ce),
        stderr_certainty_equivalent=float(ce_se),
        mean_inventory=float((occupancy * qs).sum() / occupancy.sum()),
        max_abs_inventory=int(max_abs_q),
        inventory_histogram={int(q): int(c) for q, c in zip(qs, occupancy) if c},
        terminal_inventory_histogram={int(q): int(c) for q, c in zip(qs, terminal_q) if c},
        bid_fills=int(nb_tot),
        ask_fills=int(na_tot),
    )
    return SimResult(summary=summary, wealth=wealth, paths=paths)


def write_paths_csv(paths: Sequence[SimPath], out: IO[str], max_paths: int = 10) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["path", "t", "price", "cash", "inventory"])
    for p, path in enumerate(paths[:max_paths]):
        for t, s, x, q in zip(path.times, path.prices, path.cash, path.inventory):
            w.writerow([p, repr(float(t)), repr(float(s)), repr(float(x)), int(q)])


# -- synthetic tapes -------------------------------------------------------------


def generate_tape(
    params: ModelParams,
    duration: float,
    seed: int,
    *,
    s0: float = 10_000.0,
    half_spread: float = 0.5,
    tick_size: float = 1.0,
    trade_size: float = 1.0,
    variant: Variant | str = Variant.BASE,
) -> list[TradeRecord]:
    """Market-order tape consistent with the fill model.

    Buy and sell market orders arrive as independent Poisson streams of
    rate ``A``; each reaches an exponentially distributed depth (rate ``k``)
    beyond the reference price and prints there. A resting order at offset
    ``d`` is therefore traded through at rate ``A exp(-k d)``. The reference
    price is sampled exactly at trade times and reported as the mid of
    ``best_bid = S - half_spread`` and ``best_ask = S + half_spread``.
    Prices are converted to currency with ``tick_size``.
    """
    if not duration > 0:
        raise DomainError("duration", "must be > 0")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    n = rng.poisson(2 * params.A * duration)
    times = np.sort(rng.uniform(0.0, duration, n))
    side = np.where(rng.random(n) < 0.5, 1.0, -1.0)  # +1 buy market order
    depth = rng.exponential(1.0 / params.k, n)
    gaps = np.diff(times, prepend=0.0)
    drift = params.mu if Variant(variant) is Variant.DRIFT else 0.0
    ref = s0 + np.cumsum(drift * gaps + params.sigma * np.sqrt(gaps) * rng.standard_normal(n))
    price = ref + side * depth
    return [
        TradeRecord(
            float(t), float(px * tick_size), float(trade_size),
            float((r - half_spread) * tick_size), float((r + half_spread) * tick_size),
        )
        for t, px, r in zip(times, price, ref)
    ]
