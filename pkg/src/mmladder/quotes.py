"""Optimal quotes, their long-horizon limits and closed-form approximations."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import DomainError
from .model import LadderMatrix, ModelParams, Variant, build_matrix
from .ode import SpectralDecomposition, ValueLadder, decompose


@dataclass(frozen=True)
class QuotePair:
    """Bid/ask offsets from the reference price, in Ticks.

    A side that must not be quoted (bid at ``q = Q``, ask at ``q = -Q``) is
    ``None``, and so is the spread whenever one side is missing.
    """

    delta_b: float | None
    delta_a: float | None

    @property
    def spread(self) -> float | None:
        if self.delta_b is None or self.delta_a is None:
            return None
        return self.delta_b + self.delta_a


def _pair(bid: float, ask: float, q: int, Q: int) -> QuotePair:
    return QuotePair(
        delta_b=None if q == Q else float(bid),
        delta_a=None if q == -Q else float(ask),
    )


def _check_q(q: int, Q: int) -> int:
    if isinstance(q, bool) or int(q) != q or abs(q) > Q:
        raise DomainError("q", f"inventory must be an integer with |q| <= {Q}, got {q!r}")
    return int(q)


def _impact_shift(matrix: LadderMatrix) -> float:
    return 0.5 * matrix.params.xi if matrix.variant is Variant.IMPACT else 0.0


def _side_offsets(logs: np.ndarray, k: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-inventory log-ratio terms; NaN where a side is undefined."""
    shape = logs.shape
    bid = np.full(shape, np.nan)
    ask = np.full(shape, np.nan)
    bid[..., :-1] = (logs[..., :-1] - logs[..., 1:]) / k
    ask[..., 1:] = (logs[..., 1:] - logs[..., :-1]) / k
    return bid, ask


def quote_transients(ladder: ValueLadder, t) -> tuple[np.ndarray, np.ndarray]:
    """Exact ``delta*(t, q) - delta_inf(q)`` for both sides, full relative precision.

    Columns follow the ladder index ``q + Q``; undefined sides are NaN.
    """
    return _side_offsets(ladder.transient(t), ladder.matrix.params.k)


def quote_surface(ladder: ValueLadder, t) -> tuple[np.ndarray, np.ndarray]:
    """Optimal bid and ask offsets for every inventory at time(s) ``t``.

    Returns arrays of shape ``(dim,)`` for scalar ``t`` and ``(len(t), dim)``
    otherwise, NaN where a side is undefined.
    """
    p = ladder.matrix.params
    const = p.base_offset + _impact_shift(ladder.matrix)
    bid, ask = _side_offsets(ladder.relative_logs(t), p.k)
    return const + bid, const + ask


def optimal_quotes(ladder: ValueLadder, t: float, q: int) -> QuotePair:
    Q = ladder.Q
    q = _check_q(q, Q)
    t = float(t)
    if not 0.0 <= t <= ladder.T:
        raise DomainError("t", f"must lie in [0, {ladder.T}]")
    p = ladder.matrix.params
    lo, hi = max(q + Q - 1, 0), min(q + Q + 2, ladder.matrix.dim)
    logs = ladder.relative_logs(t, slice(lo, hi))
    mid = q + Q - lo
    const = p.base_offset + _impact_shift(ladder.matrix)
    bid = float(const + (logs[mid] - logs[mid + 1]) / p.k) if q < Q else None
    ask = float(const + (logs[mid] - logs[mid - 1]) / p.k) if q > -Q else None
    return QuotePair(bid, ask)


def foc_residual(ladder: ValueLadder, t: float, q: int) -> float:
    """Relative residual of the bid first-order condition at the optimal quote.

    The condition reads ``(k + gamma) exp(-gamma d) (v_{q+1}/v_q)^(-gamma/k) = k``.
    Only meaningful for the base and drift variants.
    """
    p = ladder.matrix.params
    q = _check_q(q, ladder.Q)
    if q == ladder.Q:
        raise DomainError("q", "no bid quote at q = Q")
    d = optimal_quotes(ladder, t, q).delta_b
    logs = ladder.relative_logs(t)
    i = q + ladder.Q
    log_lhs = math.log(p.k + p.gamma) - p.gamma * d - (p.gamma / p.k) * (logs[i + 1] - logs[i])
    return abs(math.expm1(log_lhs - math.log(p.k)))


@dataclass(frozen=True, eq=False)
class AsymptoticSolution:
    """Long-horizon limits of the optimal quotes.

    ``delta_b``, ``delta_a`` and ``spread`` are indexed by ``q + Q`` and hold
    NaN where a side is undefined; :attr:`quotes_by_q` uses the explicit
    :class:`QuotePair` encoding instead.
    """

    lambda0: float
    f0: np.ndarray
    delta_b: np.ndarray
    delta_a: np.ndarray
    matrix: LadderMatrix
    quotes_by_q: dict[int, QuotePair] = field(repr=False)

    @property
    def spread(self) -> np.ndarray:
        return self.delta_b + self.delta_a

    @property
    def Q(self) -> int:
        return self.matrix.Q


def asymptotic_quotes(
    matrix: LadderMatrix, decomposition: SpectralDecomposition | None = None
) -> AsymptoticSolution:
    dec = decomposition if decomposition is not None else decompose(matrix)
    p = matrix.params
    f0 = dec.f0
    const = p.base_offset + _impact_shift(matrix)
    lead_b, lead_a = _side_offsets(np.log(f0), p.k)
    bid, ask = const + lead_b, const + lead_a
    Q = matrix.Q
    by_q = {q: _pair(bid[q + Q], ask[q + Q], q, Q) for q in range(-Q, Q + 1)}
    return AsymptoticSolution(
        lambda0=dec.lambda0, f0=f0, delta_b=bid, delta_a=ask, matrix=matrix, quotes_by_q=by_q
    )


def ladder_energy(f: np.ndarray, alpha: float, eta: float) -> float:
    """Quadratic criterion whose unit-norm minimiser is the ground state.

    ``sum alpha q^2 f_q^2 + eta sum (f_{q+1} - f_q)^2 + eta f_Q^2 + eta f_{-Q}^2``,
    which equals ``f' (M + 2 eta I) f`` for the base ladder.
    """
    f = np.asarray(f, dtype=float)
    Q = (f.shape[-1] - 1) // 2
    q = np.arange(-Q, Q + 1)
    return float(
        np.sum(alpha * q**2 * f**2)
        + eta * np.sum(np.diff(f) ** 2)
        + eta * f[-1] ** 2
        + eta * f[0] ** 2
    )


def _gauss_scale(params: ModelParams) -> float:
    # sqrt(sigma^2 gamma / (2 k A) * (1 + gamma/k)^(1 + k/gamma)), power in log form
    log_pow = (1.0 + params.k / params.gamma) * math.log1p(params.gamma / params.k)
    return math.sqrt(params.sigma**2 * params.gamma / (2.0 * params.k * params.A) * math.exp(log_pow))


def gaussian_approximation(params: ModelParams, variant: Variant | str, q: int) -> QuotePair:
    """Closed-form approximation of the asymptotic quotes.

    Comes from replacing the ground state by a Gaussian profile in ``q``.
    """
    variant = Variant(variant)
    q = _check_q(q, params.Q)
    base = params.base_offset
    s = _gauss_scale(params)
    if variant is Variant.BASE:
        bid = base + (2 * q + 1) / 2 * s
        ask = base - (2 * q - 1) / 2 * s
    elif variant is Variant.DRIFT:
        tilt = params.mu / (params.gamma * params.sigma**2)
        bid = base + (-tilt + (2 * q + 1) / 2) * s
        ask = base + (tilt - (2 * q - 1) / 2) * s
    else:
        s *= math.exp(0.25 * params.k * params.xi)
        bid = base + params.xi / 2 + (2 * q + 1) / 2 * s
        ask = base + params.xi / 2 - (2 * q - 1) / 2 * s
    return _pair(bid, ask, q, params.Q)


def gaussian_spread(params: ModelParams, variant: Variant | str = Variant.BASE) -> float:
    """Approximate asymptotic spread; the same for every inventory."""
    variant = Variant(variant)
    s = _gauss_scale(params)
    if variant is Variant.IMPACT:
        return 2 * params.base_offset + params.xi + math.exp(0.25 * params.k * params.xi) * s
    return 2 * params.base_offset + s


def gaussian_f0_density(params: ModelParams, x):
    ratio = params.alpha / params.eta
    return np.pi**-0.25 * ratio**0.125 * np.exp(-0.5 * math.sqrt(ratio) * np.asarray(x, dtype=float) ** 2)


def taylor_quotes_near_T(params: ModelParams, t: float, q: int) -> QuotePair:
    """Quotes linearised in the time to go; accurate only close to ``T``."""
    if t > params.T:
        raise DomainError("t", f"must be <= T = {params.T}")
    q = _check_q(q, params.Q)
    slope = params.gamma * params.sigma**2 * (params.T - t)
    base = params.base_offset
    return _pair(base + (1 + 2 * q) / 2 * slope, base + (1 - 2 * q) / 2 * slope, q, params.Q)


# -- comparative statics ------------------------------------------------------

STATICS_PARAMS = ("sigma2", "mu", "A", "k")

# expected derivative signs of (delta_b, delta_a) by sign of q
_CASE_CLAIMS = {
    "sigma2": {-1: (-1, +1), 0: (+1, +1), 1: (+1, -1)},
    "A": {-1: (+1, -1), 0: (-1, -1), 1: (-1, +1)},
}
_SPREAD_CLAIMS = {"sigma2": +1, "A": -1, "k": -1}
_MU_CLAIMS = (-1, +1)


@dataclass(frozen=True)
class StaticsGrid:
    """Perturbation set-up for the sign report.

    ``rel_step`` is relative to the parameter value; ``mu`` is perturbed by
    ``rel_step * gamma * sigma^2`` since its natural base value is zero.
    """

    rel_step: float | dict[str, float] = 1e-4
    parameters: Sequence[str] = STATICS_PARAMS
    q_values: Sequence[int] | None = None
    case_q: Sequence[int] = (-5, 0, 5)

    def step_for(self, name: str) -> float:
        if isinstance(self.rel_step, dict):
            return float(self.rel_step.get(name, 1e-4))
        return float(self.rel_step)


@dataclass(frozen=True)
class StaticsRow:
    parameter: str
    q: int
    quantity: str  # delta_b | delta_a | psi
    derivative: float
    sign: int
    claimed: int | None

    @property
    def agrees(self) -> bool | None:
        return None if self.claimed is None else self.sign == self.claimed


def _perturbed(params: ModelParams, name: str, h: float, sign: int) -> tuple[ModelParams, Variant]:
    try:
        if name == "sigma2":
            s2 = params.sigma**2 * (1 + sign * h)
            if s2 <= 0:
                raise DomainError("sigma", "perturbation leaves the domain")
            return params.replace(sigma=math.sqrt(s2)), Variant.BASE
        if name == "mu":
            return params.replace(mu=params.mu + sign * h * params.gamma * params.sigma**2), Variant.DRIFT
        if name in ("A", "k"):
            return params.replace(**{name: getattr(params, name) * (1 + sign * h)}), Variant.BASE
    except DomainError as exc:
        raise DomainError(exc.field, f"perturbation of {name} leaves the domain") from exc
    raise DomainError("parameter", f"unknown statics parameter {name!r}")


def _claims(name: str, q: int, quantity: str, case_q: Sequence[int]) -> int | None:
    if quantity == "psi":
        return _SPREAD_CLAIMS.get(name)
    side = 0 if quantity == "delta_b" else 1
    if name == "mu":
        return _MU_CLAIMS[side]
    if name in _CASE_CLAIMS and q in case_q:
        return _CASE_CLAIMS[name][int(np.sign(q))][side]
    return None


def comparative_statics_report(base: ModelParams, grid: StaticsGrid | None = None) -> list[StaticsRow]:
    """Centered finite-difference signs of the asymptotic quotes.

    Each row carries the sign claimed for it, if any: the spread is claimed
    to rise with ``sigma^2`` and fall with ``A`` and ``k``; bid falls and ask
    rises with ``mu``; the per-side ``sigma^2`` and ``A`` patterns depend on
    the sign of ``q`` and are claimed at ``grid.case_q``. Risk aversion is
    left out on purpose since its effect is not signed.
    """
    grid = grid or StaticsGrid()
    Q = base.Q
    qs = list(grid.q_values) if grid.q_values is not None else list(range(-Q, Q + 1))
    for q in qs:
        _check_q(q, Q)
    rows = []
    for name in grid.parameters:
        h = grid.step_for(name)
        if h < 0:
            raise DomainError("rel_step", "must be >= 0")
        up_p, variant = _perturbed(base, name, h, +1)
        dn_p, _ = _perturbed(base, name, h, -1)
        up = asymptotic_quotes(build_matrix(up_p, variant))
        dn = asymptotic_quotes(build_matrix(dn_p, variant))
        if name == "sigma2":
            width = 2 * h * base.sigma**2
        elif name == "mu":
            width = 2 * h * base.gamma * base.sigma**2
        else:
            width = 2 * h * getattr(base, name)
        for q in qs:
            i = q + Q
            for quantity, u, d in (
                ("delta_b", up.delta_b[i], dn.delta_b[i]),
                ("delta_a", up.delta_a[i], dn.delta_a[i]),
                ("psi", up.spread[i], dn.spread[i]),
            ):
                if math.isnan(u):
                    continue
                diff = float(u - d)
                rows.append(
                    StaticsRow(
                        parameter=name,
                        q=q,
                        quantity=quantity,
                        derivative=diff / width if width > 0 else 0.0,
                        sign=int(np.sign(diff)),
                        claimed=_claims(name, q, quantity, grid.case_q),
                    )
                )
    return rows


def statics_disagreements(rows: Iterable[StaticsRow]) -> list[StaticsRow]:
    return [r for r in rows if r.agrees is False]


# -- CSV emitters -------------------------------------------------------------


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_quote_surface(ladder: ValueLadder, times: Sequence[float], out: IO[str]) -> None:
    times = np.asarray(times, dtype=float)
    bid, ask = quote_surface(ladder, times)
    Q = ladder.Q
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t", "q", "delta_b", "delta_a", "psi"])
    for j, t in enumerate(times):
        for q in range(-Q, Q + 1):
            b, a = bid[j, q + Q], ask[j, q + Q]
            w.writerow([_fmt(float(t)), q, _fmt(b), _fmt(a), _fmt(b + a)])


def write_asymptotic_table(
    solution: AsymptoticSolution, out: IO[str], variant: Variant | str | None = None
) -> None:
    variant = Variant(variant) if variant is not None else solution.matrix.variant
    p = solution.matrix.params
    Q = solution.Q
    x = np.arange(-Q, Q + 1, dtype=float)
    gauss_f = gaussian_f0_density(p, x)
    gauss_f /= np.linalg.norm(gauss_f)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(
        ["q", "f0", "f0_gaussian", "delta_b_inf", "delta_a_inf", "psi_inf",
         "delta_b_gauss", "delta_a_gauss", "psi_gauss"]
    )
    psi_g = gaussian_spread(p, variant)
    for q in range(-Q, Q + 1):
        i = q + Q
        g = gaussian_approximation(p, variant, q)
        w.writerow(
            [q, _fmt(solution.f0[i]), _fmt(gauss_f[i]), _fmt(solution.delta_b[i]),
             _fmt(solution.delta_a[i]), _fmt(solution.spread[i]), _fmt(g.delta_b),
             _fmt(g.delta_a), _fmt(psi_g if g.spread is not None else None)]
        )


def write_statics_table(rows: Iterable[StaticsRow], out: IO[str]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["parameter", "q", "quantity", "derivative", "sign", "claimed", "agrees"])
    for r in rows:
        w.writerow(
            [r.parameter, r.q, r.quantity, _fmt(r.derivative), r.sign,
             "" if r.claimed is None else r.claimed, "" if r.agrees is None else int(r.agrees)]
        )
