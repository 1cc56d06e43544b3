"""The four-strategy offloading experiment on a two-carrier cell.

Each replication draws fresh devices (a radio sample and one flow each), scores
them with every strategy, and offloads the top ceil(f * n) devices for each
fraction f. Only devices that really have secondary coverage contribute their
volume; the others count as unnecessary measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._rng import stream
from .errors import ConfigError
from .flowdata import FlowRecord
from .flowgen import FlowGenConfig, gen_flows
from .predictors import (
    CoveragePredictor,
    TrafficPredictor,
    predict_coverage_proba_batch,
    predict_volume_proba_batch,
)
from .radioenv import EnvConfig, RadioSample, calibrate_environment, gen_radio_samples

RANDOM, COVERAGE, TRAFFIC, COVERAGE_TRAFFIC, ORACLE = (
    "Random", "Coverage", "Traffic", "CoverageTraffic", "Oracle")
STRATEGIES = (RANDOM, COVERAGE, TRAFFIC, COVERAGE_TRAFFIC)
DEFAULT_GRID = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)
STEERING_THRESHOLD = 10_000
# Device ids for scenario draws start here, far from any training corpus.
SCENARIO_ID_BASE = 10_000_000


@dataclass(frozen=True)
class Device:
    device_id: int
    radio: RadioSample
    flow: FlowRecord


@dataclass(frozen=True)
class SteeringScenario:
    devices: tuple[Device, ...]
    traffic: TrafficPredictor | None = None
    coverage: CoveragePredictor | None = None
    combine: str = "product"
    weight: float = 0.5  # coverage weight for the weighted-sum rule

    def __post_init__(self):
        if self.combine not in ("product", "min", "weighted"):
            raise ConfigError("steering.combine", f"unknown rule {self.combine!r}")

    @property
    def n(self) -> int:
        return len(self.devices)

    @property
    def volumes(self) -> np.ndarray:
        return np.array([d.flow.total_volume for d in self.devices], dtype=np.float64)

    @property
    def covered(self) -> np.ndarray:
        return np.array([d.radio.covered for d in self.devices], dtype=bool)

    @property
    def ids(self) -> np.ndarray:
        return np.array([d.device_id for d in self.devices])


@dataclass(frozen=True)
class ScenarioGenerator:
    """Draws a fresh scenario per replication from the radio and flow generators."""

    env: EnvConfig
    flows: FlowGenConfig
    traffic: TrafficPredictor | None = None
    coverage: CoveragePredictor | None = None
    n_devices: int = 100
    combine: str = "product"

    def __post_init__(self):
        if self.env.coverage_threshold_dBm is None:
            object.__setattr__(self, "env", calibrate_environment(self.env))

    def draw(self, replication: int) -> SteeringScenario:
        first = SCENARIO_ID_BASE + replication * self.n_devices
        radios = gen_radio_samples(self.env, self.n_devices, first_device_id=first)
        flows = gen_flows(self.flows, first_id=first, n_flows=self.n_devices)
        devices = tuple(Device(r.device_id, r, f) for r, f in zip(radios, flows))
        return SteeringScenario(devices, self.traffic, self.coverage, self.combine)


@dataclass
class SteeringCurve:
    strategy: str
    fractions: np.ndarray
    offloaded: np.ndarray  # (replications, fractions), bytes
    unnecessary: np.ndarray  # (replications, fractions)

    @property
    def replications(self) -> int:
        return self.offloaded.shape[0]

    @property
    def offloaded_mean(self) -> np.ndarray:
        return self.offloaded.mean(axis=0)

    @property
    def offloaded_std(self) -> np.ndarray:
        return self.offloaded.std(axis=0)

    @property
    def unnecessary_mean(self) -> np.ndarray:
        return self.unnecessary.mean(axis=0)

    def index(self, fraction: float) -> int:
        hits = np.flatnonzero(np.isclose(self.fractions, fraction))
        if not hits.size:
            raise KeyError(f"fraction {fraction} not on the grid")
        return int(hits[0])


def combine_scores(p_cov: np.ndarray, p_traffic: np.ndarray, rule: str = "product", weight: float = 0.5) -> np.ndarray:
    p_cov, p_traffic = np.asarray(p_cov, float), np.asarray(p_traffic, float)
    if rule == "product":
        return p_cov * p_traffic
    if rule == "min":
        return np.minimum(p_cov, p_traffic)
    if rule == "weighted":
        return weight * p_cov + (1.0 - weight) * p_traffic
    raise ValueError(f"unknown combination rule {rule!r}")


def score_devices(scenario: SteeringScenario, strategy: str, seed: int = 0, replication: int = 0) -> np.ndarray:
    """Per-device selection scores; higher is offloaded first."""
    if strategy == RANDOM:
        return stream(seed, "random-selection", replication).random(scenario.n)
    if strategy == ORACLE:
        return np.where(scenario.covered, scenario.volumes, 0.0)
    need_cov = strategy in (COVERAGE, COVERAGE_TRAFFIC)
    need_traffic = strategy in (TRAFFIC, COVERAGE_TRAFFIC)
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if need_cov and scenario.coverage is None:
        raise ValueError(f"{strategy} needs a coverage predictor")
    if need_traffic and scenario.traffic is None:
        raise ValueError(f"{strategy} needs a traffic predictor")
    radios = [d.radio for d in scenario.devices]
    flows = [d.flow for d in scenario.devices]
    if strategy == COVERAGE:
        return predict_coverage_proba_batch(scenario.coverage, radios)
    if strategy == TRAFFIC:
        return predict_volume_proba_batch(scenario.traffic, flows, STEERING_THRESHOLD)
    return combine_scores(
        predict_coverage_proba_batch(scenario.coverage, radios),
        predict_volume_proba_batch(scenario.traffic, flows, STEERING_THRESHOLD),
        scenario.combine,
        scenario.weight,
    )


def selection_size(fraction: float, n: int) -> int:
    # Guard against 0.07 * 100 == 7.000000000000001.
    return math.ceil(fraction * n - 1e-9)


def selection_order(scores: np.ndarray, device_ids: np.ndarray) -> np.ndarray:
    """Indices by descending score, ties by ascending device id."""
    return np.lexsort((device_ids, -np.asarray(scores, float)))


def evaluate_selection(scenario: SteeringScenario, scores: np.ndarray,
                       fractions: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Offloaded bytes and unnecessary-measurement rate per fraction (NaN when nothing is selected)."""
    order = selection_order(scores, scenario.ids)
    vol = scenario.volumes[order]
    cov = scenario.covered[order]
    gained = np.cumsum(np.where(cov, vol, 0.0))
    wasted = np.cumsum(~cov)
    offloaded = np.full(len(fractions), np.nan)
    unnecessary = np.full(len(fractions), np.nan)
    for j, f in enumerate(fractions):
        k = min(selection_size(f, scenario.n), scenario.n)
        if k == 0:
            continue
        offloaded[j] = gained[k - 1]
        unnecessary[j] = wasted[k - 1] / k
    return offloaded, unnecessary


@dataclass
class SteeringResult:
    curves: dict  # strategy -> SteeringCurve
    seed: int

    def __getitem__(self, strategy: str) -> SteeringCurve:
        return self.curves[strategy]


def _check_grid(fractions: Sequence[float]) -> np.ndarray:
    grid = np.asarray(fractions, dtype=float)
    if grid.size == 0 or np.any(grid <= 0) or np.any(grid > 1):
        raise ConfigError("steering.fractions", "grid must lie in (0, 1]")
    return grid


def run_steering(generator: ScenarioGenerator, fractions: Sequence[float] = DEFAULT_GRID,
                 replications: int = 50, seed: int = 0, strategies: Sequence[str] = STRATEGIES,
                 include_oracle: bool = False) -> SteeringResult:
    """Average the four strategies over independent scenario draws."""
    grid = _check_grid(fractions)
    if replications < 1:
        raise ConfigError("steering.replications", "must be >= 1")
    names = list(strategies) + ([ORACLE] if include_oracle else [])
    off = {s: np.empty((replications, len(grid))) for s in names}
    waste = {s: np.empty((replications, len(grid))) for s in names}
    for r in range(replications):
        scenario = generator.draw(r)
        for s in names:
            off[s][r], waste[s][r] = evaluate_selection(scenario, score_devices(scenario, s, seed, r), grid)
    return SteeringResult({s: SteeringCurve(s, grid, off[s], waste[s]) for s in names}, seed)


def measurement_savings(result: SteeringResult) -> dict:
    """Mean unnecessary-measurement rate per strategy at each grid fraction."""
    return {s: dict(zip(c.fractions.tolist(), c.unnecessary_mean.tolist())) for s, c in result.curves.items()}


def savings_csv(result: SteeringResult) -> str:
    table = measurement_savings(result)
    grid = next(iter(result.curves.values())).fractions
    lines = ["strategy," + ",".join(f"{f:g}" for f in grid)]
    for s, row in table.items():
        lines.append(s + "," + ",".join(f"{row[f]:.6f}" for f in grid.tolist()))
    return "\n".join(lines) + "\n"


def curves_csv(result: SteeringResult) -> str:
    lines = ["strategy,fraction,offloaded_bytes_mean,offloaded_bytes_std,unnecessary_rate_mean"]
    for s, c in result.curves.items():
        for f, m, sd, u in zip(c.fractions, c.offloaded_mean, c.offloaded_std, c.unnecessary_mean):
            lines.append(f"{s},{f:g},{m:.3f},{sd:.3f},{u:.6f}")
    return "\n".join(lines) + "\n"


def write_curves(result: SteeringResult, path: str | Path) -> None:
    Path(path).write_text(curves_csv(result), encoding="utf-8")
