"""Model parameters and the tridiagonal ladder matrix.

Units are Ticks for prices and seconds for time throughout. Inventory is
counted in unit trade sizes, and position ``i`` of every ladder vector holds
inventory ``q = i - Q``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import DomainError


class Variant(str, enum.Enum):
    BASE = "base"
    DRIFT = "drift"
    IMPACT = "impact"


@dataclass(frozen=True)
class ModelParams:
    """Market and preference constants of the market-making problem.

    Parameters
    ----------
    sigma : float
        Price volatility, Tick / sqrt(s).
    A, k : float
        Fill intensity ``A * exp(-k * delta)``; ``A`` in 1/s, ``k`` in 1/Tick.
    gamma : float
        Absolute risk aversion, 1/Tick.
    T : float
        Horizon in seconds.
    Q : int
        Inventory bound.
    mu : float
        Price drift, Tick/s. Only read by the drift variant.
    xi : float
        Price impact per fill, Ticks. Only read by the impact variant.
    """

    sigma: float
    A: float
    k: float
    gamma: float
    T: float
    Q: int
    mu: float = 0.0
    xi: float = 0.0

    def __post_init__(self):
        for name in ("sigma", "A", "k", "gamma", "T", "mu", "xi"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
                raise DomainError(name, f"expected a real number, got {value!r}")
            if not math.isfinite(value):
                raise DomainError(name, "must be finite")
            object.__setattr__(self, name, float(value))
        for name in ("sigma", "A", "k", "gamma", "T"):
            if getattr(self, name) <= 0:
                raise DomainError(name, "must be > 0")
        if self.xi < 0:
            raise DomainError("xi", "must be >= 0")
        Q = self.Q
        if isinstance(Q, bool) or isinstance(Q, float) and not Q.is_integer():
            raise DomainError("Q", f"must be an integer, got {Q!r}")
        try:
            Q = int(Q)
        except (TypeError, ValueError):
            raise DomainError("Q", f"must be an integer, got {Q!r}") from None
        if Q < 1:
            raise DomainError("Q", "must be >= 1")
        object.__setattr__(self, "Q", Q)

    @property
    def alpha(self) -> float:
        return 0.5 * self.k * self.gamma * self.sigma**2

    @property
    def eta(self) -> float:
        # log form: (1 + gamma/k)^(-(1 + k/gamma)) overflows for small gamma/k otherwise
        return self.A * math.exp(-(1.0 + self.k / self.gamma) * math.log1p(self.gamma / self.k))

    @property
    def beta(self) -> float:
        return self.k * self.mu

    @property
    def base_offset(self) -> float:
        """Risk-neutral quote offset ``ln(1 + gamma/k) / gamma``."""
        return math.log1p(self.gamma / self.k) / self.gamma

    @property
    def dim(self) -> int:
        return 2 * self.Q + 1

    def inventories(self) -> np.ndarray:
        return np.arange(-self.Q, self.Q + 1)

    def replace(self, **changes) -> "ModelParams":
        d = asdict(self)
        d.update(changes)
        return ModelParams(**d)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


PARAM_KEYS = tuple(f.name for f in fields(ModelParams))


def validate_params(raw: Mapping[str, Any] | ModelParams) -> ModelParams:
    """Build validated parameters from a flat mapping.

    Unknown keys are rejected. ``mu`` and ``xi`` default to zero.
    """
    if isinstance(raw, ModelParams):
        return ModelParams(**asdict(raw))
    unknown = sorted(set(raw) - set(PARAM_KEYS))
    if unknown:
        raise DomainError(unknown[0], "unknown parameter")
    missing = [key for key in PARAM_KEYS[:6] if key not in raw]
    if missing:
        raise DomainError(missing[0], "missing")
    return ModelParams(**raw)


def load_params(path: str | Path) -> ModelParams:
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise DomainError("<file>", "parameter file must hold a JSON object")
    return validate_params(raw)


@dataclass(frozen=True, eq=False)
class LadderMatrix:
    """Symmetric tridiagonal generator ``M`` and terminal vector ``w``.

    The ladder solves ``v(t) = expm(-M (T - t)) @ w``.
    """

    diag: np.ndarray
    offdiag: float
    terminal: np.ndarray
    variant: Variant
    params: ModelParams

    def __post_init__(self):
        for arr in (self.diag, self.terminal):
            arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.diag.shape[0]

    @property
    def Q(self) -> int:
        return (self.dim - 1) // 2

    def dense(self) -> np.ndarray:
        n = self.dim
        M = np.diag(self.diag.astype(float))
        idx = np.arange(n - 1)
        M[idx, idx + 1] = self.offdiag
        M[idx + 1, idx] = self.offdiag
        return M

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """``M @ v`` along the first axis without forming ``M``."""
        out = self.diag.reshape((-1,) + (1,) * (v.ndim - 1)) * v
        out[:-1] += self.offdiag * v[1:]
        out[1:] += self.offdiag * v[:-1]
        return out

    def norm_inf(self) -> float:
        row = np.abs(self.diag).copy()
        row[:-1] += abs(self.offdiag)
        row[1:] += abs(self.offdiag)
        return float(row.max())


def build_matrix(params: ModelParams, variant: Variant | str = Variant.BASE) -> LadderMatrix:
    variant = Variant(variant)
    q = params.inventories().astype(float)
    diag = params.alpha * q**2
    offdiag = -params.eta
    terminal = np.ones_like(q)
    if variant is Variant.DRIFT:
        diag = diag - params.beta * q
    elif variant is Variant.IMPACT:
        offdiag = -params.eta * math.exp(-0.5 * params.k * params.xi)
        terminal = np.exp(-0.5 * params.k * params.xi * q**2)
    return LadderMatrix(diag=diag, offdiag=offdiag, terminal=terminal, variant=variant, params=params)
