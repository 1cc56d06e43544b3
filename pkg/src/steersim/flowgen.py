"""Synthetic flow corpora with a controllable amount of first-packet signal.

Flows come from a mixture of service classes. Each class has its own transport
protocol, server ports and server address pool, and a volume distribution:
lognormal bodies for the light classes and a Pareto tail for the streaming
class. The default mixture puts P(volume > 10 kB) at 0.125.

With ``planted_signal=False`` the volume is drawn from a class chosen
independently of the one that produced the flow key, so no feature carries
information about volume.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._rng import stream
from .errors import ConfigError
from .flowdata import DOWNLINK, UPLINK, FlowKey, FlowRecord, PacketMeta

MTU = 1500


@dataclass(frozen=True)
class ServiceClass:
    name: str
    weight: float
    protocol: int
    ports: tuple[int, ...]
    server_prefix: int  # /16 network, as an integer a.b.0.0
    volume_model: str  # "lognormal" or "pareto"
    scale: float  # lognormal median or Pareto minimum, bytes
    shape: float  # lognormal sigma or Pareto alpha
    mean_gap: float = 0.05  # mean packet inter-arrival, seconds

    def exceed_probability(self, threshold: float) -> float:
        """Analytic P(volume > threshold) for this class."""
        if self.volume_model == "lognormal":
            z = math.log(threshold / self.scale) / self.shape
            return 0.5 * math.erfc(z / math.sqrt(2))
        if threshold < self.scale:
            return 1.0
        return (self.scale / threshold) ** self.shape

    def sample_volume(self, rng: np.random.Generator, cap: float) -> int:
        if self.volume_model == "lognormal":
            v = self.scale * math.exp(self.shape * rng.standard_normal())
        else:
            v = self.scale * (1.0 - rng.random()) ** (-1.0 / self.shape)
        return max(1, int(round(min(v, cap))))


def _net(a: int, b: int) -> int:
    return (a << 24) | (b << 16)


DEFAULT_CLASSES = (
    ServiceClass("dns", 0.40, 17, (53,), _net(8, 8), "lognormal", 180.0, 0.5, 0.01),
    ServiceClass("messaging", 0.19, 6, (1883, 5222, 8883), _net(52, 28), "lognormal", 700.0, 0.7),
    ServiceClass("web", 0.30, 6, (80, 8080), _net(93, 184), "lognormal", 2500.0, 0.9),
    ServiceClass("bulk", 0.085, 6, (443, 8443), _net(151, 101), "lognormal", 40_000.0, 0.8, 0.02),
    ServiceClass("streaming", 0.025, 6, (1935, 554), _net(23, 246), "pareto", 200_000.0, 1.1, 0.01),
)


@dataclass(frozen=True)
class FlowGenConfig:
    n_flows: int = 10_000
    planted_signal: bool = True
    classes: tuple[ServiceClass, ...] = DEFAULT_CLASSES
    client_prefix: int = _net(10, 20)
    client_hosts: int = 4096
    servers_per_class: int = 64
    max_records: int = 32
    volume_cap: float = 1e9
    seed: int = 0

    def __post_init__(self):
        if self.n_flows < 0:
            raise ConfigError("flows.n_flows", "must be >= 0")
        if not self.classes:
            raise ConfigError("flows.classes", "at least one service class required")
        total = sum(c.weight for c in self.classes)
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ConfigError("flows.classes", f"weights sum to {total}, expected 1")
        for i, c in enumerate(self.classes):
            if c.volume_model not in ("lognormal", "pareto"):
                raise ConfigError(f"flows.classes[{i}].volume_model", f"unknown {c.volume_model!r}")
            if c.scale <= 0 or c.shape <= 0 or c.weight < 0:
                raise ConfigError(f"flows.classes[{i}]", "scale, shape must be > 0 and weight >= 0")
        if self.max_records < 1:
            raise ConfigError("flows.max_records", "must be >= 1")

    def exceed_probability(self, threshold: float) -> float:
        return sum(c.weight * c.exceed_probability(threshold) for c in self.classes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FlowGenConfig":
        d = dict(d)
        if "classes" in d:
            d["classes"] = tuple(
                ServiceClass(**{**c, "ports": tuple(c["ports"])}) for c in d["classes"]
            )
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"flows.{sorted(unknown)[0]}", "unknown field")
        return cls(**d)


def _packets(rng: np.random.Generator, cls: ServiceClass, volume: int, max_records: int):
    if cls.protocol == 6:
        first = int(rng.choice((52, 60, 64, 74)))
    else:
        first = int(rng.integers(40, 121))
    first = min(first, volume)
    packets = [PacketMeta(0.0, first, UPLINK)]
    remaining = volume - first
    if remaining:
        n = min(max_records, -(-remaining // MTU))
        base, extra = divmod(remaining, n)
        gaps = rng.exponential(cls.mean_gap, size=n)
        t = 0.0
        for i in range(n):
            t += float(gaps[i])
            # Records past the MTU stand for coalesced bursts on long flows.
            size = base + (1 if i < extra else 0)
            direction = UPLINK if i % 4 == 3 else DOWNLINK
            packets.append(PacketMeta(round(t, 6), size, direction))
    return tuple(packets)


def gen_flows(config: FlowGenConfig, first_id: int = 0, n_flows: int | None = None) -> list[FlowRecord]:
    """Generate a flow corpus; the result is a pure function of the config."""
    n = config.n_flows if n_flows is None else n_flows
    rng = stream(config.seed, "flows", first_id)
    weights = np.array([c.weight for c in config.classes])
    weights = weights / weights.sum()
    key_classes = rng.choice(len(config.classes), size=n, p=weights)
    if config.planted_signal:
        volume_classes = key_classes
    else:
        volume_classes = rng.choice(len(config.classes), size=n, p=weights)
    flows = []
    for i in range(n):
        kc = config.classes[key_classes[i]]
        vc = config.classes[volume_classes[i]]
        key = FlowKey(
            src_addr=config.client_prefix + 1 + int(rng.integers(config.client_hosts)),
            dst_addr=kc.server_prefix + 1 + int(rng.integers(config.servers_per_class)) * 7,
            src_port=int(rng.integers(32768, 61000)),
            dst_port=int(rng.choice(kc.ports)),
            protocol=kc.protocol,
        )
        volume = vc.sample_volume(rng, config.volume_cap)
        flows.append(
            FlowRecord(
                flow_id=first_id + i,
                key=key,
                packets=_packets(rng, kc, volume, config.max_records),
                service_class=int(key_classes[i]),
            )
        )
    return flows


def bayes_auc(config: FlowGenConfig, threshold: float) -> float:
    """AUC of the ideal scorer that knows each flow's service class.

    Scores are P(volume > threshold | class); ties between classes with equal
    scores earn half credit, as in the Mann-Whitney statistic.
    """
    pos = np.array([c.weight * c.exceed_probability(threshold) for c in config.classes])
    neg = np.array([c.weight for c in config.classes]) - pos
    if not config.planted_signal:
        return 0.5
    score = np.array([c.exceed_probability(threshold) for c in config.classes])
    num = 0.0
    for i in range(len(score)):
        for j in range(len(score)):
            if score[i] > score[j]:
                num += pos[i] * neg[j]
            elif score[i] == score[j]:
                num += 0.5 * pos[i] * neg[j]
    return num / (pos.sum() * neg.sum())
