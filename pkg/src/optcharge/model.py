"""Charging-station domain types and assembly of the scheduling QP.

The station schedules per-customer charging power over a discrete hourly
horizon.  The decision vector stacks customers contiguously:
``x = [x_0(0..T-1), x_1(0..T-1), ...]``, so customer ``i`` at hour ``t``
lives at flat index ``i*T + t``.  Power is average kW over a unit-hour
slot, so slot energy in kWh equals the entry numerically.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np


class ValidationError(ValueError):
    """Raised when inputs violate a documented invariant."""


@dataclass(frozen=True)
class StationConfig:
    """Station-side constants: horizon, fleet size, prices and penalties.

    ``purchase_price`` is the hourly grid tariff in $/kWh (length ``T``),
    ``station_cap`` the total-power ceiling in kW, ``beta`` the weight on
    the squared gap between delivered and demanded energy, and ``alpha``
    the weight discouraging spiky schedules.
    """

    T: int
    N: int
    purchase_price: np.ndarray
    station_cap: float
    beta: float
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "purchase_price",
                           np.asarray(self.purchase_price, dtype=float))
        if self.T < 1 or self.N < 1:
            raise ValidationError(f"need T >= 1 and N >= 1, got T={self.T}, N={self.N}")
        if self.purchase_price.shape != (self.T,):
            raise ValidationError(
                f"purchase_price must have exactly T={self.T} entries, "
                f"got shape {self.purchase_price.shape}")
        if np.any(self.purchase_price < 0):
            raise ValidationError("purchase_price entries must be >= 0")
        if self.station_cap <= 0:
            raise ValidationError("station_cap must be > 0")
        if self.beta <= 0:
            raise ValidationError("beta must be > 0")
        if self.alpha < 0:
            raise ValidationError("alpha must be >= 0")


@dataclass(frozen=True)
class Session:
    """One EV's presence window at the station.

    The window is half-open: charging is allowed for hours
    ``t_arrival <= t < t_depart`` and forced to zero outside it, so every
    valid session has at least one active slot.
    """

    ev_index: int
    t_arrival: int
    t_depart: int
    max_power: float
    selling_price: float

    def __post_init__(self):
        if self.t_arrival < 0 or self.t_depart <= self.t_arrival:
            raise ValidationError(
                f"session {self.ev_index}: need 0 <= t_arrival < t_depart, "
                f"got [{self.t_arrival}, {self.t_depart})")
        if self.max_power <= 0:
            raise ValidationError(f"session {self.ev_index}: max_power must be > 0")
        if self.selling_price < 0:
            raise ValidationError(f"session {self.ev_index}: selling_price must be >= 0")

    @property
    def active_hours(self) -> range:
        return range(self.t_arrival, self.t_depart)


def with_selling_prices(sessions: list[Session], c: np.ndarray) -> list[Session]:
    """Return a copy of ``sessions`` with per-customer selling prices ``c``."""
    c = np.asarray(c, dtype=float)
    if c.shape != (len(sessions),):
        raise ValidationError(f"expected {len(sessions)} prices, got shape {c.shape}")
    return [dataclasses.replace(s, selling_price=float(ci))
            for s, ci in zip(sessions, c)]


def selling_prices(sessions: list[Session]) -> np.ndarray:
    return np.array([s.selling_price for s in sessions], dtype=float)


@dataclass
class QPProblem:
    """Inequality/equality standard form of the scheduling problem.

    minimize  0.5 x'Qx + q'x + constant
    s.t.      G_ineq x <= h,   F_eq x = 0

    ``B`` and ``beta`` are carried along because the sensitivity system
    downstream needs the demand-coupling map ``2*beta*B'``.
    """

    Q: np.ndarray
    q: np.ndarray
    G_ineq: np.ndarray
    h: np.ndarray
    F_eq: np.ndarray
    constant: float
    B: np.ndarray
    beta: float

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def m_ineq(self) -> int:
        return self.G_ineq.shape[0]

    @property
    def n_eq(self) -> int:
        return self.F_eq.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.Q @ x + self.q @ x + self.constant)


@dataclass
class QPSolution:
    """Primal/dual optimum of a :class:`QPProblem`.

    ``status`` is one of ``converged``, ``max_iter``, ``infeasible``.
    ``diagnostics`` is filled by the solver (iteration count, residuals,
    indices of constraints with weak complementarity).
    """

    x_star: np.ndarray
    lambda_star: np.ndarray
    nu_star: np.ndarray
    status: str
    diagnostics: object | None = None


@dataclass
class TaskLoss:
    """Actual operation cost of a schedule against the true demands.

    The three sub-metrics decompose the cost as
    ``loss = -profit + completion_penalty + smooth_penalty``; profit is
    the selling revenue minus the grid purchase cost (positive = the
    station earned money).
    """

    loss: float
    grad_x: np.ndarray
    profit: float
    completion_penalty: float
    smooth_penalty: float


def _check_sessions(config: StationConfig, sessions: list[Session]) -> None:
    if len(sessions) != config.N:
        raise ValidationError(
            f"expected {config.N} sessions, got {len(sessions)}")
    for i, s in enumerate(sessions):
        if s.ev_index != i:
            raise ValidationError(
                f"sessions must be ordered by ev_index 0..N-1; "
                f"position {i} holds ev_index {s.ev_index}")
        if s.t_depart > config.T:
            raise ValidationError(
                f"session {i}: t_depart={s.t_depart} exceeds horizon T={config.T}")


def active_mask(config: StationConfig, sessions: list[Session]) -> np.ndarray:
    """Boolean NT-vector marking coordinates free to charge (inside the window)."""
    _check_sessions(config, sessions)
    T = config.T
    mask = np.zeros(config.N * T, dtype=bool)
    for s in sessions:
        mask[s.ev_index * T + s.t_arrival: s.ev_index * T + s.t_depart] = True
    return mask


# structural matrices depend only on the horizon and the session windows,
# which are fixed across the thousands of per-sample QP builds in a training
# run; keyed caching makes rebuilding them effectively free
_matrices_cache: dict = {}
_quadratic_cache: dict = {}


def _structure_key(config: StationConfig, sessions: list[Session]):
    return (config.T, config.N,
            tuple((s.t_arrival, s.t_depart) for s in sessions))


def build_matrices(config: StationConfig,
                   sessions: list[Session]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Build the structural matrices of the scheduling QP.

    Returns ``(A, B, F_eq)``:
      * ``A`` (T x NT): hourly totals, ``A @ x`` is total station power per hour.
      * ``B`` (N x NT): per-customer energy totals, ``B @ x`` is delivered kWh.
      * ``F_eq`` (H x NT): one row per out-of-window coordinate, a single 1
        at that coordinate, so ``F_eq @ x = 0`` forces idle slots to zero.

    The returned arrays are cached and shared between calls with the same
    structure; treat them as read-only.
    """
    _check_sessions(config, sessions)
    key = _structure_key(config, sessions)
    hit = _matrices_cache.get(key)
    if hit is not None:
        return hit
    T, N = config.T, config.N
    NT = N * T

    A = np.tile(np.eye(T), (1, N))

    B = np.zeros((N, NT))
    for i in range(N):
        B[i, i * T:(i + 1) * T] = 1.0

    forced = np.flatnonzero(~active_mask(config, sessions))
    F_eq = np.zeros((forced.size, NT))
    F_eq[np.arange(forced.size), forced] = 1.0
    for arr in (A, B, F_eq):
        arr.setflags(write=False)
    if len(_matrices_cache) > 64:
        _matrices_cache.clear()
    _matrices_cache[key] = (A, B, F_eq)
    return A, B, F_eq


def build_qp(config: StationConfig, sessions: list[Session],
             e_hat: np.ndarray) -> QPProblem:
    """Assemble the scheduling QP for estimated demands ``e_hat`` (kWh).

    The quadratic form reproduces the station cost exactly: for every x,
    ``0.5 x'Qx + q'x + constant`` equals
    ``beta*||Bx - e_hat||^2 + (p' - c'B)x + alpha*||x||^2``.
    """
    e_hat = np.asarray(e_hat, dtype=float)
    if e_hat.shape != (config.N,):
        raise ValidationError(f"e_hat must have shape ({config.N},), got {e_hat.shape}")
    if np.any(e_hat < 0):
        raise ValidationError("e_hat must be elementwise >= 0")

    A, B, F_eq = build_matrices(config, sessions)
    T, N = config.T, config.N
    NT = N * T
    beta, alpha = config.beta, config.alpha

    quad_key = (_structure_key(config, sessions), beta, alpha,
                config.station_cap, tuple(s.max_power for s in sessions),
                tuple(config.purchase_price))
    hit = _quadratic_cache.get(quad_key)
    if hit is None:
        p = np.tile(config.purchase_price, N)
        Q = 2.0 * beta * (B.T @ B) + 2.0 * alpha * np.eye(NT)
        G_ineq = np.vstack([-A, A, -np.eye(NT), np.eye(NT)])
        h = np.concatenate([np.zeros(T), np.full(T, config.station_cap),
                            np.zeros(NT),
                            np.repeat([s.max_power for s in sessions], T)])
        for arr in (p, Q, G_ineq, h):
            arr.setflags(write=False)
        if len(_quadratic_cache) > 64:
            _quadratic_cache.clear()
        _quadratic_cache[quad_key] = (p, Q, G_ineq, h)
    else:
        p, Q, G_ineq, h = hit

    c = selling_prices(sessions)
    # B' applied to a customer vector just repeats it across the horizon
    q = p - np.repeat(c, T) - 2.0 * beta * np.repeat(e_hat, T)
    constant = float(beta * e_hat @ e_hat)

    return QPProblem(Q=Q, q=q, G_ineq=G_ineq, h=h, F_eq=F_eq,
                     constant=constant, B=B, beta=beta)


def task_loss(x_star: np.ndarray, e_true: np.ndarray,
              config: StationConfig, sessions: list[Session]) -> TaskLoss:
    """Evaluate the realized operation cost of schedule ``x_star``.

    Uses the true demands ``e_true``, not the estimates the schedule was
    optimized for.  Also returns the cost gradient w.r.t. the schedule,
    needed to backpropagate through the optimizer.
    """
    x = np.asarray(x_star, dtype=float)
    e = np.asarray(e_true, dtype=float)
    _check_sessions(config, sessions)
    NT = config.N * config.T
    if x.shape != (NT,):
        raise ValidationError(f"x_star must have shape ({NT},), got {x.shape}")
    if e.shape != (config.N,):
        raise ValidationError(f"e_true must have shape ({config.N},), got {e.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("x_star must be finite")

    _, B, _ = build_matrices(config, sessions)
    p = np.tile(config.purchase_price, config.N)
    c = selling_prices(sessions)
    beta, alpha = config.beta, config.alpha

    gap = B @ x - e
    completion = float(beta * gap @ gap)
    smooth = float(alpha * x @ x)
    # revenue minus purchase cost; enters the loss with a minus sign
    profit = float(c @ (B @ x) - p @ x)
    loss = -profit + completion + smooth

    grad_x = 2.0 * beta * (B.T @ gap) + (p - B.T @ c) + 2.0 * alpha * x
    return TaskLoss(loss=loss, grad_x=grad_x, profit=profit,
                    completion_penalty=completion, smooth_penalty=smooth)
