"""Experiment configuration: defaults, JSON loading, strict validation.

A config file is a JSON object with optional blocks ``station``,
``sessions``, ``pbdr``, ``train`` and ``paths``; anything omitted falls
back to the defaults below, and unknown keys anywhere are rejected.  The
hourly purchase-price profile lives in its own two-column CSV
(``hour,price``); a peak-valley profile ships with the package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .learner import TrainConfig
from .model import Session, StationConfig, ValidationError

DEFAULT_STATION = {"T": 24, "N": 5, "station_cap": 5.0,
                   "beta": 5.0, "alpha": 0.001}

# three 6.6 kW ports and two 3.6 kW ports, staggered daily sessions with a
# shared late-afternoon overlap so the station cap actually binds
DEFAULT_SESSIONS = [
    {"t_arrival": 8, "t_depart": 18, "max_power": 6.6},
    {"t_arrival": 9, "t_depart": 17, "max_power": 6.6},
    {"t_arrival": 14, "t_depart": 23, "max_power": 6.6},
    {"t_arrival": 7, "t_depart": 13, "max_power": 3.6},
    {"t_arrival": 17, "t_depart": 24, "max_power": 3.6},
]


@dataclass(frozen=True)
class PBDRConfig:
    seed: int = 0
    n_utility: int = 3
    n_quadratic: int = 2
    price_low: float = 0.2
    price_high: float = 0.6
    demand_low: float = 5.0
    demand_high: float = 20.0
    noise: float = 0.5
    n_train: int = 1000
    n_test: int = 100
    selling_price_mode: str = "random"

    def __post_init__(self):
        if self.price_low >= self.price_high:
            raise ValidationError("need price_low < price_high")
        if self.demand_low >= self.demand_high:
            raise ValidationError("need demand_low < demand_high")
        if self.noise < 0:
            raise ValidationError("noise must be >= 0")
        if self.n_train < 1 or self.n_test < 1:
            raise ValidationError("n_train and n_test must be >= 1")
        if self.selling_price_mode != "random":
            raise ValidationError(
                f"unsupported selling_price_mode {self.selling_price_mode!r}")

    @property
    def train_seed(self) -> int:
        return self.seed + 1

    @property
    def test_seed(self) -> int:
        return self.seed + 2


@dataclass(frozen=True)
class PathsConfig:
    price_profile: str | None = None  # None -> packaged default
    output_dir: str = "out"


@dataclass
class ExperimentConfig:
    station: StationConfig
    sessions: list[Session]
    pbdr: PBDRConfig = field(default_factory=PBDRConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Override both the population and training seeds."""
        return ExperimentConfig(
            station=self.station, sessions=self.sessions,
            pbdr=replace(self.pbdr, seed=seed),
            train=replace(self.train, seed=seed),
            paths=self.paths)


def load_price_profile(path: str | Path | None, T: int) -> np.ndarray:
    """Read the hourly purchase tariff; falls back to the packaged profile."""
    if path is None:
        ref = resources.files("optcharge").joinpath("data/default_price_profile.csv")
        text = ref.read_text()
    else:
        text = Path(path).read_text()
    lines = [ln for ln in text.strip().split("\n") if ln]
    if lines[0] != "hour,price":
        raise ValidationError("price profile must start with header 'hour,price'")
    rows = [ln.split(",") for ln in lines[1:]]
    if len(rows) != T:
        raise ValidationError(f"price profile has {len(rows)} rows, expected T={T}")
    prices = np.empty(T)
    for k, (hour, price) in enumerate(rows):
        if int(hour) != k:
            raise ValidationError(f"price profile hours must run 0..{T - 1} in order")
        prices[k] = float(price)
    return prices


def _take(block: dict, allowed: dict, where: str) -> dict:
    unknown = set(block) - set(allowed)
    if unknown:
        raise ValidationError(f"unknown keys in {where}: {sorted(unknown)}")
    merged = dict(allowed)
    merged.update(block)
    return merged


def _build_sessions(specs: list[dict], T: int) -> list[Session]:
    sessions = []
    for i, spec in enumerate(specs):
        fields = _take(spec, {"t_arrival": None, "t_depart": None,
                              "max_power": None}, f"sessions[{i}]")
        for key, val in fields.items():
            if val is None:
                raise ValidationError(f"sessions[{i}] is missing {key!r}")
        sessions.append(Session(ev_index=i, selling_price=0.0, **fields))
        if sessions[-1].t_depart > T:
            raise ValidationError(f"sessions[{i}]: t_depart exceeds horizon {T}")
    return sessions


def default_config() -> ExperimentConfig:
    return load_config(None)


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a JSON file (or pure defaults)."""
    raw = {}
    if path is not None:
        raw = json.loads(Path(path).read_text())
        if not isinstance(raw, dict):
            raise ValidationError("config root must be a JSON object")
    top = _take(raw, {"station": {}, "sessions": None, "pbdr": {},
                      "train": {}, "paths": {}}, "config")

    station_raw = _take(top["station"] or {}, DEFAULT_STATION, "station")
    paths_raw = _take(top["paths"] or {},
                      {"price_profile": None, "output_dir": "out"}, "paths")
    paths = PathsConfig(**paths_raw)

    price = load_price_profile(paths.price_profile, int(station_raw["T"]))
    station = StationConfig(T=int(station_raw["T"]), N=int(station_raw["N"]),
                            purchase_price=price,
                            station_cap=float(station_raw["station_cap"]),
                            beta=float(station_raw["beta"]),
                            alpha=float(station_raw["alpha"]))

    session_specs = top["sessions"] if top["sessions"] is not None else DEFAULT_SESSIONS
    sessions = _build_sessions(session_specs, station.T)
    if len(sessions) != station.N:
        raise ValidationError(
            f"{len(sessions)} sessions configured for N={station.N} customers")

    pbdr_defaults = {f: getattr(PBDRConfig, f) for f in
                     ("seed", "n_utility", "n_quadratic", "price_low",
                      "price_high", "demand_low", "demand_high", "noise",
                      "n_train", "n_test", "selling_price_mode")}
    pbdr = PBDRConfig(**_take(top["pbdr"] or {}, pbdr_defaults, "pbdr"))
    if pbdr.n_utility + pbdr.n_quadratic != station.N:
        raise ValidationError(
            "pbdr pattern counts must sum to the number of customers")

    train_defaults = {"mode": "two_step", "iterations": 250,
                      "learning_rate": None, "batch_size": 32, "seed": 0,
                      "optimizer": "adam", "hidden_width": 32,
                      "lr_schedule": "constant",
                      "anchor_weight": 0.5}
    train = TrainConfig(**_take(top["train"] or {}, train_defaults, "train"))

    return ExperimentConfig(station=station, sessions=sessions, pbdr=pbdr,
                            train=train, paths=paths)
