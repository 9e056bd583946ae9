"""Value ladder ``v(t) = expm(-M (T - t)) w`` via the eigensystem of ``M``.

An RK4 integrator of the same linear system lives here too. It shares no
code with the spectral path and exists to cross-check it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DomainError
from .model import LadderMatrix

TOL_EIG = 1e-10


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns, orthonormal

    @property
    def lambda0(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def f0(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    @property
    def gap(self) -> float:
        if self.eigenvalues.shape[0] < 2:
            return math.inf
        return float(self.eigenvalues[1] - self.eigenvalues[0])


def decompose(matrix: LadderMatrix) -> SpectralDecomposition:
    """Full eigensystem of the ladder matrix.

    The ground-state eigenvector is signed so that its middle (``q = 0``)
    component is positive; every component is then positive.
    """
    n = matrix.dim
    d = np.asarray(matrix.diag, dtype=float)
    e = np.full(n - 1, matrix.offdiag, dtype=float)
    try:
        # LAPACK stemr; convergence is checked internally and surfaced as LinAlgError
        lam, G = scipy.linalg.eigh_tridiagonal(d, e, lapack_driver="stemr")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"tridiagonal eigensolver failed: {exc}", n, 50 * n) from exc
    G = np.array(G, dtype=float)
    if G[n // 2, 0] < 0:
        G[:, 0] = -G[:, 0]

    scale = max(matrix.norm_inf(), np.finfo(float).tiny)
    resid = np.abs(matrix.matvec(G) - G * lam).max() if n else 0.0
    ortho = np.abs(G.T @ G - np.eye(n)).max()
    if not (resid <= TOL_EIG * scale and ortho <= TOL_EIG):
        raise ConvergenceError(
            f"eigensystem failed accuracy check (residual {resid:.3e}, orthogonality {ortho:.3e})",
            n,
            50 * n,
        )
    return SpectralDecomposition(eigenvalues=lam, eigenvectors=G)


class ValueLadder:
    """Evaluator of ``v_q(t)`` for ``q = -Q..Q`` and ``t`` in ``[0, T]``.

    With ``tau = T - t`` and ``c = G' w`` the ladder is written as

        log v_q = -lambda0 tau + log(c0 g0_q) + log1p(r_q(tau)),
        r_q(tau) = sum_{i>=1} exp(-(lambda_i - lambda0) tau) c_i g_iq / (c0 g0_q).

    Values themselves overflow for long horizons, and differences of the
    full logs lose absolute precision once ``lambda0 tau`` is large, so quote
    computations use :meth:`transient` and :meth:`lead` separately.
    """

    def __init__(self, matrix: LadderMatrix, decomposition: SpectralDecomposition | None = None):
        self.matrix = matrix
        self.decomposition = decomposition if decomposition is not None else decompose(matrix)
        self.T = matrix.params.T
        dec = self.decomposition
        G = dec.eigenvectors
        self.coefficients = G.T @ matrix.terminal
        c0 = self.coefficients[0]
        if not (c0 > 0 and np.all(dec.f0 > 0)):
            raise ConvergenceError("ground state is not positive", matrix.dim, 50 * matrix.dim)
        self._log_g0 = np.log(dec.f0)
        self._log_c0 = float(np.log(c0))
        self._ratios = (G[:, 1:] * (self.coefficients[1:] / c0)) / dec.f0[:, None]
        self._shifted = dec.eigenvalues[1:] - dec.lambda0

    @property
    def Q(self) -> int:
        return self.matrix.Q

    def _check_t(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(~np.isfinite(t)) or np.any(t < 0) or np.any(t > self.T):
            raise DomainError("t", f"must lie in [0, {self.T}]")
        return t

    @property
    def lead(self) -> np.ndarray:
        """``log g0_q``: the time-independent part of ``log v_q`` up to a constant."""
        return self._log_g0

    def transient(self, t, rows: slice | None = None) -> np.ndarray:
        """``log1p(r_q(T - t))``; decays to zero as ``T - t`` grows.

        ``rows`` restricts the evaluation to a slice of ladder positions.
        """
        t = self._check_t(t)
        tau = np.atleast_1d(self.T - t)
        ratios = self._ratios if rows is None else self._ratios[rows]
        r = np.exp(-np.outer(tau, self._shifted)) @ ratios.T
        out = np.log1p(r)
        return out[0] if t.ndim == 0 else out

    def relative_logs(self, t, rows: slice | None = None) -> np.ndarray:
        """``log v(t)`` up to an additive constant shared by all inventories.

        This is all quote computations need; exact at ``t = T``.
        """
        t = self._check_t(t)
        lead = self._log_g0 if rows is None else self._log_g0[rows]
        out = np.atleast_2d(self.transient(t, rows) + lead)
        at_T = np.atleast_1d(t) == self.T
        if at_T.any():
            w = self.matrix.terminal if rows is None else self.matrix.terminal[rows]
            out[at_T] = np.log(w)
        return out[0] if t.ndim == 0 else out

    def log_values(self, t) -> np.ndarray:
        """``log v(t)``; shape ``(dim,)`` for scalar ``t``, ``(len(t), dim)`` otherwise."""
        t = self._check_t(t)
        tau = np.atleast_1d(self.T - t)
        out = np.atleast_2d(self.transient(t)) + self._log_g0 + self._log_c0
        out -= self.decomposition.lambda0 * tau[:, None]
        # terminal condition holds exactly
        at_T = tau == 0.0
        if at_T.any():
            out[at_T] = np.log(self.matrix.terminal)
        return out[0] if t.ndim == 0 else out

    def values(self, t) -> np.ndarray:
        return np.exp(self.log_values(t))

    def value(self, t: float, q: int) -> float:
        if abs(q) > self.Q:
            raise DomainError("q", f"|q| must be <= {self.Q}")
        return float(self.values(t)[q + self.Q])


def value_ladder(matrix: LadderMatrix) -> ValueLadder:
    return ValueLadder(matrix)


@dataclass(frozen=True, eq=False)
class OdeGrid:
    times: np.ndarray  # ascending
    values: np.ndarray  # (len(times), dim)
    step: float


def _rk4_propagator(matrix: LadderMatrix, h: float) -> np.ndarray:
    # for a linear autonomous system one RK4 step is exactly this polynomial in hB
    B = -h * matrix.dense()
    n = matrix.dim
    B2 = B @ B
    return np.eye(n) + B + B2 / 2 + (B2 @ B) / 6 + (B2 @ B2) / 24


def _rk4_loop(matrix: LadderMatrix, v: np.ndarray, h: float, nsteps: int) -> np.ndarray:
    def rhs(x):  # d/dtau v = -M v
        return -matrix.matvec(x)

    for _ in range(nsteps):
        k1 = rhs(v)
        k2 = rhs(v + 0.5 * h * k1)
        k3 = rhs(v + 0.5 * h * k2)
        k4 = rhs(v + h * k3)
        v = v + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return v


def integrate_ode_oracle(
    matrix: LadderMatrix,
    step: float,
    n_points: int = 101,
    method: str = "propagator",
) -> OdeGrid:
    """Backward RK4 integration of the ladder ODE from ``t = T`` to ``t = 0``.

    The output grid has ``n_points`` uniform times. ``step`` is the target RK4
    step; between grid points the step is shrunk to divide the interval
    evenly. ``method="propagator"`` applies the exact one-step RK4 map as a
    matrix power, ``method="loop"`` steps explicitly; both compute the same
    recursion.
    """
    if not step > 0:
        raise DomainError("step", "must be > 0")
    if n_points < 2:
        raise DomainError("n_points", "must be >= 2")
    T = matrix.params.T
    times = np.linspace(0.0, T, n_points)
    spacing = T / (n_points - 1)
    nsteps = max(1, math.ceil(spacing / step - 1e-9))
    h = spacing / nsteps

    out = np.empty((n_points, matrix.dim))
    v = np.array(matrix.terminal, dtype=float)
    out[-1] = v
    if method == "propagator":
        P = np.linalg.matrix_power(_rk4_propagator(matrix, h), nsteps)
        for i in range(n_points - 2, -1, -1):
            v = P @ v
            out[i] = v
    elif method == "loop":
        for i in range(n_points - 2, -1, -1):
            v = _rk4_loop(matrix, v, h, nsteps)
            out[i] = v
    else:
        raise DomainError("method", f"unknown integration method {method!r}")
    return OdeGrid(times=times, values=out, step=h)
