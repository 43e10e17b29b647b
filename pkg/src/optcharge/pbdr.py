"""Synthetic price-responsive demand models and dataset generation.

Two customer families are supported: a utility-maximizing customer whose
demand is the closed-form solution of a private charging cost/benefit
trade-off (piecewise linear in price), and a threshold customer whose
demand decays quadratically once the price crosses a sensitivity level.
Populations are sampled so every customer's demand stays inside a
configured kWh band over the operating price range.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .model import ValidationError


@dataclass(frozen=True)
class UtilityMaxPattern:
    """Customer who trades off charging cost against a target energy level.

    Demand at price ``c`` minimizes ``gamma1*c*e + gamma2*(level - e_trip)^2``
    with ``level = e_init + e*eta``, subject to battery bounds and the
    average-power limit over the session window.
    """

    gamma1: float
    gamma2: float
    eta: float
    e_init: float
    e_trip: float
    soc_min: float
    soc_max: float
    p_max: float
    t_arrival: int
    t_depart: int

    def __post_init__(self):
        if not (0.0 < self.eta < 1.0):
            raise ValidationError("eta must be in (0, 1)")
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            raise ValidationError("gamma1 and gamma2 must be > 0")
        if not (self.soc_min <= self.e_init <= self.soc_max):
            raise ValidationError("need soc_min <= e_init <= soc_max")
        if not (self.soc_min <= self.e_trip <= self.soc_max):
            raise ValidationError("need soc_min <= e_trip <= soc_max")
        if self.p_max <= 0:
            raise ValidationError("p_max must be > 0")
        if self.t_depart <= self.t_arrival:
            raise ValidationError("need t_arrival < t_depart")


@dataclass(frozen=True)
class PiecewiseQuadraticPattern:
    """Customer with baseline demand and quadratic decay above a threshold price."""

    e_base: float
    mu: float
    c_s: float

    def __post_init__(self):
        if self.e_base < 0 or self.mu < 0 or self.c_s < 0:
            raise ValidationError("e_base, mu and c_s must be >= 0")


PBDRPattern = UtilityMaxPattern | PiecewiseQuadraticPattern


def utility_max_demand(pattern: UtilityMaxPattern, c: float) -> float:
    """Closed-form demand of the utility-maximizing customer at price ``c``.

    The unconstrained minimizer is linear in price; the battery bounds and
    the session power budget clip it to a feasible interval.
    """
    if c < 0:
        raise ValidationError("price must be >= 0")
    lo = max(0.0, (pattern.soc_min - pattern.e_init) / pattern.eta)
    hi = min((pattern.soc_max - pattern.e_init) / pattern.eta,
             pattern.p_max * (pattern.t_depart - pattern.t_arrival))
    if hi < lo:
        raise ValidationError("pattern has an empty feasible demand interval")
    e_u = ((pattern.e_trip - pattern.e_init) / pattern.eta
           - pattern.gamma1 * c / (2.0 * pattern.gamma2 * pattern.eta ** 2))
    return float(min(max(e_u, lo), hi))


def piecewise_quadratic_demand(pattern: PiecewiseQuadraticPattern, c: float) -> float:
    """Baseline demand below the threshold, quadratic decay (floored at 0) above."""
    if c < 0:
        raise ValidationError("price must be >= 0")
    if c <= pattern.c_s:
        return float(pattern.e_base)
    return float(max(pattern.e_base - pattern.mu * (c - pattern.c_s) ** 2, 0.0))


def demand(pattern: PBDRPattern, c: float) -> float:
    if isinstance(pattern, UtilityMaxPattern):
        return utility_max_demand(pattern, c)
    if isinstance(pattern, PiecewiseQuadraticPattern):
        return piecewise_quadratic_demand(pattern, c)
    raise TypeError(f"unknown pattern type {type(pattern).__name__}")


def demands(patterns: list[PBDRPattern], c: np.ndarray) -> np.ndarray:
    """Evaluate each customer's demand at their assigned price."""
    return np.array([demand(p, float(ci)) for p, ci in zip(patterns, c, strict=True)])


# ---------------------------------------------------------------------------
# population synthesis


def _sample_utility_pattern(rng: np.random.Generator, price_low: float,
                            price_high: float, demand_low: float,
                            demand_high: float) -> UtilityMaxPattern:
    span = price_high - price_low
    e_top = rng.uniform(demand_low + 0.5 * (demand_high - demand_low),
                        demand_high - 0.5)
    e_bot = rng.uniform(demand_low + 0.5, min(e_top - 2.0, demand_low + 7.0))
    slope = (e_top - e_bot) / span
    eta = rng.uniform(0.85, 0.95)
    gamma2 = 1.0
    gamma1 = 2.0 * gamma2 * eta ** 2 * slope
    e0 = e_top + slope * price_low  # unclipped demand at c = 0
    e_init = rng.uniform(2.0, 6.0)
    soc_min = rng.uniform(0.0, min(2.0, e_init))
    e_trip = e_init + eta * e0
    soc_max = e_init + eta * (e0 + rng.uniform(1.0, 3.0))

    duration = int(rng.integers(6, 11))
    if rng.random() < 0.5:
        # power budget caps the curve inside the price range: one extra kink
        cap_e = rng.uniform(e_bot + 1.0, e_top - 0.5)
    else:
        cap_e = e0 + rng.uniform(1.0, 3.0)
    p_max = cap_e / duration

    return UtilityMaxPattern(gamma1=gamma1, gamma2=gamma2, eta=eta,
                             e_init=e_init, e_trip=e_trip, soc_min=soc_min,
                             soc_max=soc_max, p_max=p_max,
                             t_arrival=0, t_depart=duration)


def _sample_quadratic_pattern(rng: np.random.Generator, price_low: float,
                              price_high: float, demand_low: float,
                              demand_high: float) -> PiecewiseQuadraticPattern:
    e_base = rng.uniform(demand_low + 0.55 * (demand_high - demand_low),
                         demand_high)
    c_s = rng.uniform(price_low + 0.1 * (price_high - price_low),
                      price_low + 0.6 * (price_high - price_low))
    frac = rng.uniform(0.4, 1.0)
    mu = frac * (e_base - demand_low - 0.5) / (price_high - c_s) ** 2
    return PiecewiseQuadraticPattern(e_base=e_base, mu=mu, c_s=c_s)


def _within_band(pattern: PBDRPattern, price_low: float, price_high: float,
                 demand_low: float, demand_high: float) -> bool:
    grid = np.linspace(price_low, price_high, 41)
    vals = np.array([demand(pattern, float(c)) for c in grid])
    if vals.min() < demand_low or vals.max() > demand_high:
        return False
    # sensitivity must actually be expressed over the range
    return vals[0] - vals[-1] > 0.1


def generate_population(seed: int, n_utility: int = 3, n_quadratic: int = 2,
                        price_low: float = 0.2, price_high: float = 0.6,
                        demand_low: float = 5.0, demand_high: float = 20.0,
                        max_tries: int = 1000) -> list[PBDRPattern]:
    """Sample a customer population, one demand pattern per customer.

    Rejection-samples each pattern until its demand stays inside
    ``[demand_low, demand_high]`` over the whole operating price range and
    is not flat.  Deterministic for a given seed.
    """
    rng = np.random.default_rng(seed)
    population: list[PBDRPattern] = []
    for sampler, count in ((_sample_utility_pattern, n_utility),
                           (_sample_quadratic_pattern, n_quadratic)):
        for _ in range(count):
            for attempt in range(max_tries):
                try:
                    pattern = sampler(rng, price_low, price_high,
                                      demand_low, demand_high)
                except ValidationError:
                    continue
                if _within_band(pattern, price_low, price_high,
                                demand_low, demand_high):
                    population.append(pattern)
                    break
            else:
                raise RuntimeError(
                    f"population sampling failed after {max_tries} tries")
    return population


def population_id(patterns: list[PBDRPattern]) -> str:
    blob = json.dumps([(type(p).__name__, asdict(p)) for p in patterns],
                      sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# dataset synthesis


@dataclass
class Dataset:
    """Price/demand samples: row k holds prices[k] (N,) and demands[k] (N,)."""

    prices: np.ndarray
    demands: np.ndarray
    patterns_id: str
    seed: int

    def __post_init__(self):
        if self.prices.shape != self.demands.shape:
            raise ValidationError("prices and demands must have matching shapes")

    def __len__(self) -> int:
        return self.prices.shape[0]

    @property
    def n_customers(self) -> int:
        return self.prices.shape[1]

    def subset(self, n: int) -> "Dataset":
        if n > len(self):
            raise ValidationError(f"requested {n} samples from a dataset of {len(self)}")
        return Dataset(prices=self.prices[:n], demands=self.demands[:n],
                       patterns_id=self.patterns_id, seed=self.seed)


def generate_dataset(patterns: list[PBDRPattern], n_samples: int,
                     price_low: float = 0.2, price_high: float = 0.6,
                     seed: int = 0, noise: float = 0.0) -> Dataset:
    """Draw per-customer prices i.i.d. uniform and evaluate each pattern.

    Sample ``k`` uses an independent substream keyed by ``(seed, k)``, so
    samples may be generated in any order or in parallel without changing
    the result.  Gaussian ``noise`` (kWh std, default 0) is added to the
    demands and floored at zero.
    """
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    n = len(patterns)
    prices = np.empty((n_samples, n))
    vals = np.empty((n_samples, n))
    for k in range(n_samples):
        rng = np.random.default_rng([seed, k])
        c = rng.uniform(price_low, price_high, n)
        e = demands(patterns, c)
        if noise > 0.0:
            e = np.maximum(e + noise * rng.standard_normal(n), 0.0)
        prices[k] = c
        vals[k] = e
    return Dataset(prices=prices, demands=vals,
                   patterns_id=population_id(patterns), seed=seed)


# ---------------------------------------------------------------------------
# serialization


def _fmt(v: float) -> str:
    # 17 significant digits: decimal text round-trips the double exactly
    return f"{v:.16e}"


def write_dataset_csv(dataset: Dataset, path: str | Path) -> None:
    n = dataset.n_customers
    header = ",".join([f"c_{i + 1}" for i in range(n)]
                      + [f"e_{i + 1}" for i in range(n)])
    lines = [header]
    for k in range(len(dataset)):
        row = list(dataset.prices[k]) + list(dataset.demands[k])
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_dataset_csv(path: str | Path, patterns_id: str = "",
                     seed: int = -1) -> Dataset:
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = raw.shape[1] // 2
    return Dataset(prices=raw[:, :n], demands=raw[:, n:],
                   patterns_id=patterns_id, seed=seed)


def write_population_json(patterns: list[PBDRPattern], path: str | Path) -> None:
    records = []
    for p in patterns:
        rec = {"kind": ("utility_max" if isinstance(p, UtilityMaxPattern)
                        else "piecewise_quadratic")}
        rec.update(asdict(p))
        records.append(rec)
    Path(path).write_text(json.dumps(records, indent=2) + "\n")


def read_population_json(path: str | Path) -> list[PBDRPattern]:
    records = json.loads(Path(path).read_text())
    patterns: list[PBDRPattern] = []
    for rec in records:
        kind = rec.pop("kind")
        if kind == "utility_max":
            patterns.append(UtilityMaxPattern(**rec))
        elif kind == "piecewise_quadratic":
            patterns.append(PiecewiseQuadraticPattern(**rec))
        else:
            raise ValidationError(f"unknown pattern kind {kind!r}")
    return patterns
