"""Sensitivities of the QP optimum with respect to the demand estimates.

Differentiating the optimality conditions of the scheduling QP yields a
square linear system whose unknowns are the differentials of the primal
and dual optimum; its right-hand side couples in the demand estimates
through ``2*beta*B'``.  Solving the transposed system once per sample
turns a cost gradient w.r.t. the schedule into a cost gradient w.r.t. the
demand estimates, at the price of one LU factorization.

The system is singular in three situations: a constraint active with a
zero multiplier (every equality-pinned coordinate has one: its lower bound
is tight and carries no multiplier), an active coupling row that is a sum
of active single-variable rows (an hour nobody charges pins each EV at its
lower bound *and* the hourly total at zero, so the multipliers are not
unique), and genuine active-set ties.  The first two are repaired exactly
by a small shift on the affected slack diagonals, because the coordinates
involved cannot move at all; ties fall back to a least-squares solve of
the (still consistent) system.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import QPProblem, QPSolution, ValidationError

DEGENERACY_TOL = 1e-7
REGULARIZATION_EPS = 1e-8


class DegenerateSystemWarning(UserWarning):
    """Sensitivity system was singular beyond the standard repairs."""


@dataclass
class KKTDiagnostics:
    degenerate_rows: np.ndarray
    redundant_rows: np.ndarray
    condition_estimate: float | None = None
    least_squares_fallback: bool = False
    singular: bool = False


@dataclass
class KKTSystem:
    """Square differential system of the QP optimality conditions."""

    G_mat: np.ndarray
    rhs_scale: np.ndarray  # maps demand differentials into the system rhs
    n: int
    m_ineq: int
    n_eq: int
    diagnostics: KKTDiagnostics

    @property
    def dim(self) -> int:
        return self.n + self.m_ineq + self.n_eq


def assemble_kkt_system(problem: QPProblem, sol: QPSolution) -> KKTSystem:
    """Assemble the block matrix of KKT differentials at the optimum.

    Layout (row blocks): stationarity, complementarity, equalities; the
    unknown ordering is (dx, dlambda, dnu).
    """
    if sol.status != "converged":
        raise ValidationError(
            f"cannot differentiate a non-converged solution (status={sol.status})")

    Q, G, F = problem.Q, problem.G_ineq, problem.F_eq
    n, m, n_eq = problem.n, problem.m_ineq, problem.n_eq
    lam = sol.lambda_star
    resid = G @ sol.x_star - problem.h  # nonpositive slack form

    dim = n + m + n_eq
    G_mat = np.zeros((dim, dim))
    G_mat[:n, :n] = Q
    G_mat[:n, n:n + m] = G.T
    G_mat[:n, n + m:] = F.T
    G_mat[n:n + m, :n] = lam[:, None] * G
    mid = np.arange(n, n + m)
    G_mat[mid, mid] = resid
    G_mat[n + m:, :n] = F

    degenerate = np.flatnonzero((lam < DEGENERACY_TOL)
                                & (np.abs(resid) < DEGENERACY_TOL))
    redundant = _redundant_active_rows(problem, np.abs(resid) < DEGENERACY_TOL)
    rhs_scale = 2.0 * problem.beta * problem.B.T
    return KKTSystem(G_mat=G_mat, rhs_scale=rhs_scale, n=n, m_ineq=m,
                     n_eq=n_eq,
                     diagnostics=KKTDiagnostics(degenerate_rows=degenerate,
                                                redundant_rows=redundant))


def _redundant_active_rows(problem: QPProblem, active: np.ndarray) -> np.ndarray:
    """Active coupling rows whose whole support is individually pinned.

    When every variable a tight coupling row touches is already fixed by a
    tight single-variable row (or an equality pin), the coupling row is a
    linear combination of them and contributes a dependent equation: its
    multiplier differential is free.  Typical case: an hour nobody charges
    pins each EV at its lower bound and the hourly total at zero.
    """
    G, F = problem.G_ineq, problem.F_eq
    n = problem.n
    pinned = np.zeros(n, dtype=bool)
    if F.shape[0]:
        pinned[np.any(F != 0.0, axis=0)] = True
    support_sizes = (G != 0.0).sum(axis=1)
    for k in np.flatnonzero(active & (support_sizes == 1)):
        pinned[np.argmax(G[k] != 0.0)] = True

    redundant = []
    for k in np.flatnonzero(active & (support_sizes > 1)):
        if np.all(pinned[G[k] != 0.0]):
            redundant.append(k)
    return np.asarray(redundant, dtype=int)


def _factorize(system: KKTSystem):
    """LU of the repaired system, or None when least squares must take over.

    Tight rows with a zero multiplier contribute an all-zero
    complementarity row, and redundant coupling rows a dependent one; a
    shift on their slack diagonal pins the corresponding multiplier
    differential to zero, which leaves the primal sensitivities exact.
    """
    diag = system.diagnostics
    M = system.G_mat.copy()
    shift = np.union1d(diag.degenerate_rows, diag.redundant_rows).astype(int)
    if shift.size:
        idx = system.n + shift
        M[idx, idx] -= REGULARIZATION_EPS

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu = scipy.linalg.lu_factor(M, overwrite_a=False, check_finite=False)
        pivots = np.abs(np.diag(lu[0]))
        if pivots.min() <= 1e-12 * max(pivots.max(), 1.0):
            return None, M
    return lu, M


def estimate_condition(system: KKTSystem) -> float:
    """1-norm condition estimate of the repaired system (fills diagnostics).

    Kept out of the gradient hot path; call it when diagnosing a run.
    """
    lu, M = _factorize(system)
    if lu is None:
        system.diagnostics.condition_estimate = np.inf
        return np.inf
    gecon = scipy.linalg.get_lapack_funcs("gecon", (M,))
    rcond, _ = gecon(lu[0], np.linalg.norm(M, 1), norm="1")
    cond = float(1.0 / rcond) if rcond > 0 else np.inf
    system.diagnostics.condition_estimate = cond
    return cond


def grad_wrt_e_hat(system: KKTSystem, grad_x: np.ndarray) -> np.ndarray:
    """Pull a cost gradient w.r.t. the schedule back onto the demand estimates.

    Solves the transposed differential system with ``(grad_x, 0, 0)`` on
    the right-hand side and contracts the primal block with the demand
    coupling map; algebraically the same as forming the full Jacobian of
    the optimum and multiplying, but needs a single solve.
    """
    grad_x = np.asarray(grad_x, dtype=float)
    if grad_x.shape != (system.n,):
        raise ValidationError(f"grad_x must have shape ({system.n},)")

    rhs = np.concatenate([grad_x, np.zeros(system.m_ineq + system.n_eq)])
    lu, M = _factorize(system)
    if lu is None:
        # leftover rank deficiency (active-set tie): the system is still
        # consistent, so a least-squares solve recovers the primal block
        system.diagnostics.least_squares_fallback = True
        z, _, rank, _ = scipy.linalg.lstsq(M.T, rhs, lapack_driver="gelsy")
        if rank == 0:
            system.diagnostics.singular = True
            warnings.warn("sensitivity system is singular beyond repair; "
                          "returning a zero gradient", DegenerateSystemWarning)
            return np.zeros(system.rhs_scale.shape[1])
        return system.rhs_scale.T @ z[:system.n]

    z = scipy.linalg.lu_solve(lu, rhs, trans=1, check_finite=False)
    return system.rhs_scale.T @ z[:system.n]


def jacobian_wrt_e_hat(system: KKTSystem) -> np.ndarray:
    """Dense Jacobian of the optimal schedule w.r.t. the demand estimates.

    One forward solve per customer; intended for validation at small sizes
    (the adjoint path in :func:`grad_wrt_e_hat` is the production route).
    """
    lu, M = _factorize(system)
    rhs = np.zeros((system.dim, system.rhs_scale.shape[1]))
    rhs[:system.n] = system.rhs_scale
    if lu is None:
        system.diagnostics.least_squares_fallback = True
        sol, _, rank, _ = scipy.linalg.lstsq(M, rhs, lapack_driver="gelsy")
        if rank == 0:
            system.diagnostics.singular = True
            warnings.warn("sensitivity system is singular beyond repair; "
                          "returning a zero Jacobian", DegenerateSystemWarning)
            return np.zeros((system.n, system.rhs_scale.shape[1]))
        return sol[:system.n]
    sol = scipy.linalg.lu_solve(lu, rhs, trans=0)
    return sol[:system.n]
