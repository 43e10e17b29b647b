"""Dense convex QP solver tuned for the scheduling problem.

Primal-dual interior-point method (predictor-corrector) on the inequality
constraints.  Equality rows each pin a single coordinate to zero, so they
are eliminated up front: pinned coordinates are removed from the problem,
reinserted as zeros afterwards, and their multipliers recovered from the
stationarity residual.  Inequality rows left with no support on the
remaining coordinates are dropped (their multipliers are reported as 0).

The solver aims for tight absolute KKT residuals so the optimum can be
differentiated reliably downstream; rows where both the multiplier and the
slack end up tiny are reported in the diagnostics because the sensitivity
system is singular there.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .model import QPProblem, QPSolution, ValidationError

WEAK_COMPLEMENTARITY_TOL = 1e-7


@dataclass(frozen=True)
class SolverSettings:
    tol_kkt: float = 1e-8
    max_iter: int = 100
    regularization: float = 1e-10

    def __post_init__(self):
        if self.tol_kkt <= 0:
            raise ValidationError("tol_kkt must be > 0")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")


@dataclass
class SolveDiagnostics:
    iterations: int
    stationarity: float
    primal_feasibility: float
    complementarity: float
    mu: float
    weak_rows: np.ndarray
    structural_rows: np.ndarray
    merit_history: list[float] = field(default_factory=list)


def _eliminated_coordinates(problem: QPProblem) -> np.ndarray:
    """Coordinates pinned to zero by the equality rows."""
    F = problem.F_eq
    if F.shape[0] == 0:
        return np.zeros(0, dtype=int)
    if not (np.all((F == 0.0) | (F == 1.0)) and np.all(F.sum(axis=1) == 1.0)):
        raise ValidationError("equality rows must each be a single unit entry")
    return np.argmax(F, axis=1).astype(int)


def _initial_point(G: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Box-midpoint start scaled back until coupling rows have clear slack."""
    m, n = G.shape
    nonzero = G != 0.0
    nnz = nonzero.sum(axis=1)
    unit = nnz == 1
    cols = np.argmax(nonzero, axis=1)

    ub = np.full(n, np.inf)
    lb = np.full(n, -np.inf)
    for k in np.flatnonzero(unit):
        coef = G[k, cols[k]]
        if coef == 1.0:
            ub[cols[k]] = min(ub[cols[k]], h[k])
        elif coef == -1.0:
            lb[cols[k]] = max(lb[cols[k]], -h[k])
    ub = np.where(np.isfinite(ub), ub, 1.0)
    lb = np.where(np.isfinite(lb), lb, 0.0)
    x0 = 0.5 * (lb + ub)

    for k in np.flatnonzero(~unit):
        gx = G[k] @ x0
        if gx > 0.5 * h[k] and gx > 0:
            if h[k] > 0:
                x0 *= 0.5 * h[k] / gx
            # nonpositive rhs with positive activity cannot be fixed by
            # shrinking toward zero alone; the infeasible start handles it

    s0 = h - G @ x0
    if np.min(s0) <= 0:
        s0 = np.maximum(s0, 1.0)
    return x0, s0


def _solve_reduced(Q, q, G, h, settings):
    """Predictor-corrector loop; returns (x, lam, iters, merit_history, mu, converged)."""
    n = Q.shape[0]
    m = G.shape[0]
    if m == 0:
        x = np.linalg.solve(Q + settings.regularization * np.eye(n), -q)
        return x, np.zeros(0), 0, [0.0], 0.0, True

    x, s = _initial_point(G, h)
    lam = np.ones(m)
    merit_history: list[float] = []
    converged = False
    iters = 0
    mu = float(s @ lam / m)
    # late centering steps on near-degenerate problems can push the
    # stationarity noise floor back up; keep the best iterate seen
    best = (np.inf, x, lam)

    K = np.zeros((n + m, n + m))
    K[:n, :n] = Q
    K[:n, n:] = G.T
    K[n:, :n] = G
    aug = np.arange(n, n + m)

    for iters in range(1, settings.max_iter + 1):
        r_d = Q @ x + q + G.T @ lam
        r_p = G @ x + s - h
        comp = s * lam
        mu = float(comp.sum() / m)
        merit = max(float(np.abs(r_d).max()), float(np.abs(r_p).max()))
        score = max(merit, float(comp.max()))
        if score < best[0]:
            best = (score, x.copy(), lam.copy())
        if score <= settings.tol_kkt:
            merit_history.append(merit)
            converged = True
            break
        if (merit_history and merit > merit_history[-1]
                and float(comp.max()) <= settings.tol_kkt):
            # endgame noise floor: complementarity is done and the linear
            # residuals stopped improving, so more steps only damage
            break
        merit_history.append(merit)

        # augmented (indefinite) step system: condensing onto x would square
        # the conditioning and recovering dlam through lam/s amplifies solve
        # error enormously once slacks approach zero
        K[aug, aug] = -s / lam
        reg = settings.regularization
        K[np.arange(n), np.arange(n)] = np.diag(Q) + reg
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu = scipy.linalg.lu_factor(K, check_finite=False)

        def newton(r_c):
            rhs = np.concatenate([-r_d, -r_p + r_c / lam])
            step = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
            if mu < 1e-4:
                # refinement keeps the residual floor low in the endgame,
                # where the slack scaling makes the system ill-conditioned
                step += scipy.linalg.lu_solve(lu, rhs - K @ step,
                                              check_finite=False)
            dx, dlam = step[:n], step[n:]
            ds = -r_p - G @ dx
            return dx, dlam, ds

        def max_step(v, dv):
            neg = dv < 0
            if not np.any(neg):
                return np.inf
            return float(np.min(-v[neg] / dv[neg]))

        # affine predictor fixes the centering weight; the second-order
        # correction is damped by the square of the reachable affine step,
        # otherwise a partially accepted corrector can overshoot and cycle
        dx_a, dlam_a, ds_a = newton(comp)
        alpha_a = min(1.0, max_step(s, ds_a), max_step(lam, dlam_a))
        mu_aff = float((s + alpha_a * ds_a) @ (lam + alpha_a * dlam_a) / m)
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0

        dx, dlam, ds = newton(comp + alpha_a ** 2 * ds_a * dlam_a - sigma * mu)

        # equal primal-dual steps contract both linear residuals by (1-alpha)
        tau = 0.995 if mu > 1e-6 else 0.9999
        alpha = min(1.0, tau * min(max_step(s, ds), max_step(lam, dlam)))
        x = x + alpha * dx
        s = s + alpha * ds
        lam = lam + alpha * dlam
        if alpha < 1e-12:
            break

    _, x, lam = best
    return x, lam, iters, merit_history, mu, converged


def solve_qp(problem: QPProblem,
             settings: SolverSettings | None = None) -> QPSolution:
    """Solve the QP to tight KKT tolerances, returning primal and dual optima."""
    settings = settings or SolverSettings()
    n = problem.n
    G_full, h_full = problem.G_ineq, problem.h

    eliminated = _eliminated_coordinates(problem)
    active = np.setdiff1d(np.arange(n), eliminated)

    G_red_cols = G_full[:, active]
    row_support = np.any(G_red_cols != 0.0, axis=1)
    dropped = np.flatnonzero(~row_support)
    kept = np.flatnonzero(row_support)

    # a dropped row reads 0 <= h_k once the pinned coordinates are zeroed
    if np.any(h_full[dropped] < -settings.tol_kkt):
        return QPSolution(
            x_star=np.zeros(n), lambda_star=np.zeros(G_full.shape[0]),
            nu_star=np.zeros(problem.n_eq), status="infeasible",
            diagnostics=SolveDiagnostics(
                iterations=0, stationarity=np.inf, primal_feasibility=np.inf,
                complementarity=np.inf, mu=np.inf,
                weak_rows=np.zeros(0, dtype=int), structural_rows=dropped))

    Q_red = problem.Q[np.ix_(active, active)]
    q_red = problem.q[active]
    G_red = G_red_cols[kept]
    h_red = h_full[kept]

    if active.size == 0:
        x_red = np.zeros(0)
        lam_red = np.zeros(kept.size)
        iters, merit_history, mu, converged = 0, [0.0], 0.0, True
    else:
        x_red, lam_red, iters, merit_history, mu, converged = _solve_reduced(
            Q_red, q_red, G_red, h_red, settings)

    x = np.zeros(n)
    x[active] = x_red
    lam = np.zeros(G_full.shape[0])
    lam[kept] = lam_red

    # each equality row pins one coordinate; its multiplier absorbs whatever
    # stationarity residual is left there
    stat_partial = problem.Q @ x + problem.q + G_full.T @ lam
    nu = np.zeros(problem.n_eq)
    if problem.n_eq:
        pinned = np.argmax(problem.F_eq, axis=1)
        nu = -stat_partial[pinned]

    stationarity = stat_partial + problem.F_eq.T @ nu
    slack = h_full - G_full @ x
    res_stat = float(np.abs(stationarity).max()) if n else 0.0
    res_primal = max(
        float(np.maximum(-slack, 0.0).max()) if slack.size else 0.0,
        float(np.abs(problem.F_eq @ x).max()) if problem.n_eq else 0.0)
    res_comp = float(np.abs(lam * slack).max()) if slack.size else 0.0

    weak = np.flatnonzero((lam < WEAK_COMPLEMENTARITY_TOL)
                          & (np.abs(slack) < WEAK_COMPLEMENTARITY_TOL)
                          & row_support)

    # the loop drives residuals toward tol_kkt; certification happens on
    # the recomputed full-system residuals with a 10x allowance for the
    # static regularization and roundoff of the final steps
    del converged
    ok = (res_stat <= 10 * settings.tol_kkt
          and res_primal <= 10 * settings.tol_kkt
          and res_comp <= 10 * settings.tol_kkt)
    status = "converged" if ok else "max_iter"

    diagnostics = SolveDiagnostics(
        iterations=iters, stationarity=res_stat,
        primal_feasibility=res_primal, complementarity=res_comp,
        mu=mu,
        weak_rows=weak, structural_rows=dropped,
        merit_history=merit_history)
    return QPSolution(x_star=x, lambda_star=lam, nu_star=nu,
                      status=status, diagnostics=diagnostics)
