"""Tests for the scheduling-problem types and QP assembly."""

import numpy as np
import pytest

from optcharge.model import (
    Session,
    StationConfig,
    ValidationError,
    active_mask,
    build_matrices,
    build_qp,
    task_loss,
    with_selling_prices,
)

from oracles import central_diff_gradient, direct_operation_cost


def make_config(T=3, N=2, price=None, cap=10.0, beta=2.0, alpha=0.1):
    if price is None:
        price = np.linspace(0.1, 0.3, T)
    return StationConfig(T=T, N=N, purchase_price=price,
                         station_cap=cap, beta=beta, alpha=alpha)


def full_sessions(config, max_power=5.0, selling_price=0.4):
    return [Session(ev_index=i, t_arrival=0, t_depart=config.T,
                    max_power=max_power, selling_price=selling_price)
            for i in range(config.N)]


# ---------------------------------------------------------------------------
# construction invariants


def test_station_config_rejects_bad_values():
    with pytest.raises(ValidationError):
        make_config(T=0)
    with pytest.raises(ValidationError):
        StationConfig(T=3, N=1, purchase_price=np.zeros(2),
                      station_cap=1.0, beta=1.0, alpha=0.0)
    with pytest.raises(ValidationError):
        make_config(beta=0.0)
    with pytest.raises(ValidationError):
        make_config(alpha=-1e-9)
    with pytest.raises(ValidationError):
        make_config(cap=0.0)
    with pytest.raises(ValidationError):
        make_config(price=np.array([0.1, -0.2, 0.3]))


def test_session_rejects_empty_window():
    with pytest.raises(ValidationError):
        Session(ev_index=0, t_arrival=2, t_depart=2, max_power=5.0, selling_price=0.3)
    with pytest.raises(ValidationError):
        Session(ev_index=0, t_arrival=3, t_depart=1, max_power=5.0, selling_price=0.3)
    with pytest.raises(ValidationError):
        Session(ev_index=0, t_arrival=0, t_depart=2, max_power=0.0, selling_price=0.3)


def test_sessions_must_match_station():
    config = make_config(T=3, N=2)
    sessions = full_sessions(config)
    with pytest.raises(ValidationError):
        build_matrices(config, sessions[:1])
    with pytest.raises(ValidationError):
        build_matrices(config, sessions[::-1])
    late = [sessions[0],
            Session(ev_index=1, t_arrival=0, t_depart=5, max_power=5.0, selling_price=0.3)]
    with pytest.raises(ValidationError):
        build_matrices(config, late)


# ---------------------------------------------------------------------------
# structural matrices


def test_build_matrices_single_ev_full_horizon():
    config = make_config(T=2, N=1)
    sessions = [Session(ev_index=0, t_arrival=0, t_depart=2,
                        max_power=5.0, selling_price=0.4)]
    A, B, F = build_matrices(config, sessions)
    np.testing.assert_array_equal(A, np.eye(2))
    np.testing.assert_array_equal(B, np.array([[1.0, 1.0]]))
    assert F.shape == (0, 2)


def test_build_matrices_default_scale():
    config = make_config(T=24, N=5)
    sessions = full_sessions(config)
    A, B, F = build_matrices(config, sessions)
    assert A.shape == (24, 120)
    assert B.shape == (5, 120)
    problem = build_qp(config, sessions, np.ones(5))
    assert problem.G_ineq.shape == (288, 120)
    assert problem.h.shape == (288,)


def test_forced_indices_enumerated_by_hand():
    # EV0 may only charge hour 1, EV1 hours {0, 1}: forced coordinates are
    # EV0 hours {0, 2} and EV1 hour {2} -> flat indices {0, 2, 5}.
    config = make_config(T=3, N=2)
    sessions = [
        Session(ev_index=0, t_arrival=1, t_depart=2, max_power=5.0, selling_price=0.4),
        Session(ev_index=1, t_arrival=0, t_depart=2, max_power=5.0, selling_price=0.4),
    ]
    _, _, F = build_matrices(config, sessions)
    assert F.shape == (3, 6)

    forced_by_scan = []
    for j in range(6):
        unit = np.zeros(6)
        unit[j] = 1.0
        if np.any(F @ unit != 0.0):
            forced_by_scan.append(j)
    assert forced_by_scan == [0, 2, 5]

    # each row is a single 1 and rows do not repeat
    assert np.all(F.sum(axis=1) == 1.0)
    assert np.all((F == 0.0) | (F == 1.0))
    assert len({tuple(row) for row in F}) == F.shape[0]


def test_forced_zero_bookkeeping_random_windows():
    rng = np.random.default_rng(7)
    for _ in range(20):
        T = int(rng.integers(2, 8))
        N = int(rng.integers(1, 4))
        config = make_config(T=T, N=N, price=np.full(T, 0.2))
        sessions = []
        for i in range(N):
            t_a = int(rng.integers(0, T))
            t_d = int(rng.integers(t_a + 1, T + 1))
            sessions.append(Session(ev_index=i, t_arrival=t_a, t_depart=t_d,
                                    max_power=4.0, selling_price=0.3))
        _, _, F = build_matrices(config, sessions)
        mask = active_mask(config, sessions)
        expected = {i * T + t for i, s in enumerate(sessions)
                    for t in range(T) if not (s.t_arrival <= t < s.t_depart)}
        got = {int(np.argmax(row)) for row in F} if F.shape[0] else set()
        assert got == expected
        assert F.shape[0] == int((~mask).sum())


# ---------------------------------------------------------------------------
# QP assembly


def test_build_qp_scalar_case():
    config = StationConfig(T=1, N=1, purchase_price=np.array([0.25]),
                           station_cap=10.0, beta=1.0, alpha=0.5)
    sessions = [Session(ev_index=0, t_arrival=0, t_depart=1,
                        max_power=6.0, selling_price=0.4)]
    e_hat = np.array([3.0])
    problem = build_qp(config, sessions, e_hat)
    np.testing.assert_allclose(problem.Q, [[3.0]])
    np.testing.assert_allclose(problem.q, [0.25 - 0.4 - 2.0 * 3.0])
    assert problem.constant == pytest.approx(9.0)


def test_build_qp_zero_demand():
    config = make_config()
    sessions = full_sessions(config, selling_price=0.35)
    problem = build_qp(config, sessions, np.zeros(config.N))
    _, B, _ = build_matrices(config, sessions)
    p = np.tile(config.purchase_price, config.N)
    np.testing.assert_allclose(problem.q, p - B.T @ np.full(config.N, 0.35))
    assert problem.constant == 0.0


def test_build_qp_h_layout():
    config = make_config(T=3, N=2, cap=7.5)
    sessions = [Session(ev_index=0, t_arrival=0, t_depart=3, max_power=6.6, selling_price=0.4),
                Session(ev_index=1, t_arrival=1, t_depart=3, max_power=3.6, selling_price=0.5)]
    problem = build_qp(config, sessions, np.array([1.0, 2.0]))
    T, NT = 3, 6
    np.testing.assert_array_equal(problem.h[:T], np.zeros(T))
    np.testing.assert_array_equal(problem.h[T:2 * T], np.full(T, 7.5))
    np.testing.assert_array_equal(problem.h[2 * T:2 * T + NT], np.zeros(NT))
    np.testing.assert_array_equal(problem.h[2 * T + NT:],
                                  np.array([6.6] * 3 + [3.6] * 3))


def test_build_qp_rejects_negative_demand():
    config = make_config()
    with pytest.raises(ValidationError):
        build_qp(config, full_sessions(config), np.array([1.0, -0.5]))


def test_objective_matches_direct_sum_form():
    rng = np.random.default_rng(42)
    config = make_config(T=3, N=2, price=rng.uniform(0.1, 0.4, 3),
                         cap=8.0, beta=3.0, alpha=0.2)
    sessions = [
        Session(ev_index=0, t_arrival=0, t_depart=2, max_power=5.0, selling_price=0.45),
        Session(ev_index=1, t_arrival=1, t_depart=3, max_power=4.0, selling_price=0.25),
    ]
    e_hat = rng.uniform(0.0, 6.0, 2)
    problem = build_qp(config, sessions, e_hat)
    mask = active_mask(config, sessions).reshape(2, 3)
    for _ in range(10):
        x_grid = rng.uniform(0.0, 4.0, (2, 3)) * mask
        direct = direct_operation_cost(x_grid, config, sessions, e_hat)
        quad = problem.objective(x_grid.ravel())
        assert quad == pytest.approx(direct, rel=1e-10, abs=1e-12)


def test_q_smallest_eigenvalue_at_least_two_alpha():
    rng = np.random.default_rng(3)
    for _ in range(10):
        T = int(rng.integers(1, 6))
        N = int(rng.integers(1, 4))
        alpha = float(rng.uniform(0.0, 0.5))
        config = make_config(T=T, N=N, price=np.full(T, 0.2), alpha=alpha,
                             beta=float(rng.uniform(0.5, 5.0)))
        problem = build_qp(config, full_sessions(config), rng.uniform(0, 5, N))
        eigmin = np.linalg.eigvalsh(problem.Q)[0]
        assert eigmin >= 2.0 * alpha - 1e-9


# ---------------------------------------------------------------------------
# task loss


def test_task_loss_at_origin():
    config = make_config()
    sessions = full_sessions(config, selling_price=0.5)
    NT = config.N * config.T
    result = task_loss(np.zeros(NT), np.zeros(config.N), config, sessions)
    assert result.loss == pytest.approx(0.0)
    _, B, _ = build_matrices(config, sessions)
    p = np.tile(config.purchase_price, config.N)
    np.testing.assert_allclose(result.grad_x, p - B.T @ np.full(config.N, 0.5))


def test_task_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    config = make_config(T=4, N=2, price=rng.uniform(0.1, 0.4, 4),
                         beta=2.5, alpha=0.05)
    sessions = [
        Session(ev_index=0, t_arrival=0, t_depart=4, max_power=5.0, selling_price=0.4),
        Session(ev_index=1, t_arrival=1, t_depart=3, max_power=4.0, selling_price=0.3),
    ]
    e = rng.uniform(1.0, 8.0, 2)
    x0 = rng.uniform(0.0, 3.0, 8)
    result = task_loss(x0, e, config, sessions)
    fd = central_diff_gradient(
        lambda x: task_loss(x, e, config, sessions).loss, x0, step=1e-6)
    np.testing.assert_allclose(result.grad_x, fd, rtol=1e-6, atol=1e-7)


def test_task_loss_decomposition_identity():
    rng = np.random.default_rng(23)
    config = make_config(T=5, N=3, price=rng.uniform(0.1, 0.4, 5),
                         beta=4.0, alpha=0.01)
    sessions = full_sessions(config, selling_price=0.3)
    sessions = with_selling_prices(sessions, rng.uniform(0.2, 0.6, 3))
    for _ in range(25):
        x = rng.uniform(0.0, 5.0, 15)
        e = rng.uniform(0.0, 10.0, 3)
        r = task_loss(x, e, config, sessions)
        assert r.loss == pytest.approx(
            -r.profit + r.completion_penalty + r.smooth_penalty, abs=1e-8)


def test_with_selling_prices_replaces_only_price():
    config = make_config()
    sessions = full_sessions(config)
    swapped = with_selling_prices(sessions, np.array([0.55, 0.21]))
    assert [s.selling_price for s in swapped] == [0.55, 0.21]
    assert [s.t_arrival for s in swapped] == [s.t_arrival for s in sessions]
    assert sessions[0].selling_price == 0.4  # originals untouched
