"""Shared helpers for the test suite."""

from optcharge.model import Session, StationConfig


def random_instance(rng, n_max=3, t_max=6, full_windows=False,
                    alpha_range=(0.05, 0.5)):
    """Random small scheduling instance: (config, sessions, e_hat)."""
    T = int(rng.integers(2, t_max + 1))
    N = int(rng.integers(1, n_max + 1))
    config = StationConfig(
        T=T, N=N,
        purchase_price=rng.uniform(0.05, 0.5, T),
        station_cap=float(rng.uniform(4.0, 12.0)),
        beta=float(rng.uniform(1.0, 6.0)),
        alpha=float(rng.uniform(*alpha_range)),
    )
    sessions = []
    for i in range(N):
        if full_windows:
            t_a, t_d = 0, T
        else:
            t_a = int(rng.integers(0, T))
            t_d = int(rng.integers(t_a + 1, T + 1))
        sessions.append(Session(ev_index=i, t_arrival=t_a, t_depart=t_d,
                                max_power=float(rng.uniform(2.0, 7.0)),
                                selling_price=float(rng.uniform(0.2, 0.6))))
    e_hat = rng.uniform(0.0, 15.0, N)
    return config, sessions, e_hat
