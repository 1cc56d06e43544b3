"""Run configuration: one JSON document drives every command.

Sub-sections never carry their own seeds. Each stage derives its seed from the
top-level ``seed`` and the stage name, so a config fully determines all
outputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ._rng import derive_seed
from .errors import ConfigError
from .flowgen import FlowGenConfig
from .mlcore import ForestParams
from .mobility import MobilityParams
from .radioenv import EnvConfig
from .steering import DEFAULT_GRID


@dataclass(frozen=True)
class RadioRun:
    n_samples: int = 10_000


@dataclass(frozen=True)
class TrajectoryRun:
    routes: int = 3
    devices_per_route: int = 20
    held_out_per_route: int = 10
    samples_per_trajectory: int = 30
    jitter_m: float = 5.0
    period_s: float = 10.0


@dataclass(frozen=True)
class SteeringRun:
    n_devices: int = 100
    fractions: tuple[float, ...] = DEFAULT_GRID
    replications: int = 50
    combine: str = "product"


@dataclass(frozen=True)
class MobilityRun:
    k_routes: int = 3
    prefix_fraction: float = 0.5
    floor_dBm: float = -140.0
    detection_dBm: float = -125.0
    hysteresis_dB: float = 3.0
    temperature_dB: float = 1.0
    slow_dB_per_step: float = 0.5
    fast_dB_per_step: float = 3.0


def _build(cls, section: str, data):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(section, "expected an object")
    if "seed" in data:
        raise ConfigError(f"{section}.seed", "set the top-level seed instead")
    names = {f.name for f in fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{section}.{key}", "unknown field")
    try:
        if hasattr(cls, "from_dict"):
            return cls.from_dict(data)
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(section, str(exc)) from None


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    output_dir: str = "out"
    env: EnvConfig = field(default_factory=EnvConfig)
    flows: FlowGenConfig = field(default_factory=FlowGenConfig)
    radio: RadioRun = field(default_factory=RadioRun)
    trajectories: TrajectoryRun = field(default_factory=TrajectoryRun)
    forest: ForestParams = field(default_factory=ForestParams)
    steering: SteeringRun = field(default_factory=SteeringRun)
    mobility: MobilityRun = field(default_factory=MobilityRun)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in d:
            if key not in known:
                raise ConfigError(key, "unknown field")
        seed = d.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed", "must be a nonnegative integer")
        cfg = cls(
            seed=seed,
            output_dir=str(d.get("output_dir", "out")),
            env=_build(EnvConfig, "env", d.get("env")),
            flows=_build(FlowGenConfig, "flows", d.get("flows")),
            radio=_build(RadioRun, "radio", d.get("radio")),
            trajectories=_build(TrajectoryRun, "trajectories", d.get("trajectories")),
            forest=_build(ForestParams, "forest", d.get("forest")),
            steering=_build(SteeringRun, "steering", d.get("steering")),
            mobility=_build(MobilityRun, "mobility", d.get("mobility")),
        )
        cfg.validate()
        return cfg.with_seed(seed)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"invalid JSON: {exc.msg} (line {exc.lineno})") from None
        return cls.from_dict(data)

    def validate(self) -> None:
        if self.radio.n_samples < 0:
            raise ConfigError("radio.n_samples", "must be >= 0")
        t = self.trajectories
        if t.routes < 1:
            raise ConfigError("trajectories.routes", "must be >= 1")
        if t.devices_per_route < 0 or t.held_out_per_route < 0:
            raise ConfigError("trajectories.devices_per_route", "must be >= 0")
        if t.samples_per_trajectory < 2:
            raise ConfigError("trajectories.samples_per_trajectory", "must be >= 2")
        s = self.steering
        if s.n_devices < 1:
            raise ConfigError("steering.n_devices", "must be >= 1")
        if s.replications < 1:
            raise ConfigError("steering.replications", "must be >= 1")
        if not s.fractions or any(not 0 < f <= 1 for f in s.fractions):
            raise ConfigError("steering.fractions", "grid must lie in (0, 1]")
        if s.combine not in ("product", "min", "weighted"):
            raise ConfigError("steering.combine", f"unknown rule {s.combine!r}")
        if self.mobility.k_routes < 1:
            raise ConfigError("mobility.k_routes", "must be >= 1")
        if not 0 < self.mobility.prefix_fraction < 1:
            raise ConfigError("mobility.prefix_fraction", "must be in (0, 1)")

    def with_seed(self, seed: int) -> "RunConfig":
        """Re-derive every stage seed from a new global seed."""
        return replace(
            self,
            seed=seed,
            env=replace(self.env, seed=derive_seed(seed, "env")),
            flows=replace(self.flows, seed=derive_seed(seed, "flows")),
            forest=replace(self.forest, seed=derive_seed(seed, "forest")),
        )

    def stage_seed(self, stage: str) -> int:
        return derive_seed(self.seed, stage)

    def mobility_params(self) -> MobilityParams:
        m = self.mobility
        return MobilityParams(
            floor_dBm=m.floor_dBm,
            detection_dBm=m.detection_dBm,
            hysteresis_dB=m.hysteresis_dB,
            temperature_dB=m.temperature_dB,
            slow_dB_per_step=m.slow_dB_per_step,
            fast_dB_per_step=m.fast_dB_per_step,
            seed=self.stage_seed("mobility"),
        )

    def to_dict(self) -> dict:
        def strip(d):
            return {k: v for k, v in d.items() if k != "seed"}

        return {
            "seed": self.seed,
            "output_dir": self.output_dir,
            "env": strip(self.env.to_dict()),
            "flows": strip(self.flows.to_dict()),
            "radio": asdict(self.radio),
            "trajectories": asdict(self.trajectories),
            "forest": strip(asdict(self.forest)),
            "steering": {**asdict(self.steering), "fractions": list(self.steering.fractions)},
            "mobility": asdict(self.mobility),
        }

    @property
    def hash(self) -> str:
        """Digest of everything that influences outputs (the output path does not)."""
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode("utf-8")).hexdigest()[:16]
