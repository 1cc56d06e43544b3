"""Flow data model, JSONL corpus I/O and volume-threshold labels.

A flow file holds one JSON object per line::

    {"flow_id": 7, "src_addr": "10.0.0.1", "dst_addr": "93.184.216.34",
     "src_port": 51000, "dst_port": 443, "protocol": 6, "service_class": 3,
     "packets": [{"t": 0.0, "size": 60, "dir": "ul"}, ...]}

``total_volume`` and ``duration`` are derived from the packets and never stored.
"""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InvariantError, ParseError

UPLINK = "ul"
DOWNLINK = "dl"

# Decimal kilobytes; a flow "exceeds" a threshold only when strictly above it.
VOLUME_THRESHOLDS = (1_000, 10_000, 100_000)


@dataclass(frozen=True)
class PacketMeta:
    arrival_time: float
    size: int
    direction: str

    def __post_init__(self):
        if not self.arrival_time >= 0:
            raise InvariantError("arrival_time", f"must be >= 0, got {self.arrival_time}")
        if self.size < 1:
            raise InvariantError("size", f"must be >= 1 byte, got {self.size}")
        if self.direction not in (UPLINK, DOWNLINK):
            raise InvariantError("dir", f"must be 'ul' or 'dl', got {self.direction!r}")


@dataclass(frozen=True)
class FlowKey:
    src_addr: int
    dst_addr: int
    src_port: int
    dst_port: int
    protocol: int

    def __post_init__(self):
        for name in ("src_addr", "dst_addr"):
            value = getattr(self, name)
            if not 0 <= value < 2**32:
                raise InvariantError(name, f"not a 32-bit address: {value}")
        for name in ("src_port", "dst_port"):
            value = getattr(self, name)
            if not 0 <= value <= 65535:
                raise InvariantError(name, f"port out of range: {value}")
        if not 0 <= self.protocol <= 255:
            raise InvariantError("protocol", f"out of range: {self.protocol}")


@dataclass(frozen=True)
class FlowRecord:
    flow_id: int
    key: FlowKey
    packets: tuple[PacketMeta, ...]
    service_class: int = 0

    def __post_init__(self):
        if not isinstance(self.packets, tuple):
            object.__setattr__(self, "packets", tuple(self.packets))
        if not self.packets:
            raise InvariantError("packets", "flow has no packets")
        if self.packets[0].arrival_time != 0:
            raise InvariantError("packets", "first packet must arrive at t=0")
        prev = 0.0
        for pkt in self.packets:
            if pkt.arrival_time < prev:
                raise InvariantError("packets", "arrival times must be nondecreasing")
            prev = pkt.arrival_time

    @property
    def total_volume(self) -> int:
        return sum(p.size for p in self.packets)

    @property
    def duration(self) -> float:
        return self.packets[-1].arrival_time

    @property
    def first_packet(self) -> PacketMeta:
        return self.packets[0]


@dataclass(frozen=True)
class VolumeLabel:
    exceeds_1kB: bool
    exceeds_10kB: bool
    exceeds_100kB: bool

    def as_tuple(self) -> tuple[bool, bool, bool]:
        return (self.exceeds_1kB, self.exceeds_10kB, self.exceeds_100kB)


def exceeds(volume: int, threshold: int) -> bool:
    return volume > threshold


def label_flow(flow: FlowRecord) -> VolumeLabel:
    volume = flow.total_volume
    return VolumeLabel(*(exceeds(volume, t) for t in VOLUME_THRESHOLDS))


def flow_to_dict(flow: FlowRecord) -> dict:
    key = flow.key
    return {
        "flow_id": flow.flow_id,
        "src_addr": str(ipaddress.IPv4Address(key.src_addr)),
        "dst_addr": str(ipaddress.IPv4Address(key.dst_addr)),
        "src_port": key.src_port,
        "dst_port": key.dst_port,
        "protocol": key.protocol,
        "service_class": flow.service_class,
        "packets": [
            {"t": p.arrival_time, "size": p.size, "dir": p.direction} for p in flow.packets
        ],
    }


def _parse_addr(value, field: str) -> int:
    if not isinstance(value, str):
        raise InvariantError(field, f"expected dotted quad string, got {value!r}")
    try:
        return int(ipaddress.IPv4Address(value))
    except ValueError as exc:
        raise InvariantError(field, str(exc)) from None


def _require_int(obj: dict, field: str) -> int:
    value = obj[field]
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvariantError(field, f"expected integer, got {value!r}")
    return value


def flow_from_dict(obj: dict) -> FlowRecord:
    """Build a FlowRecord from its JSON object.

    A ``total_volume`` key is tolerated for hand-written files but must then
    agree with the packet sum.
    """
    try:
        key = FlowKey(
            src_addr=_parse_addr(obj["src_addr"], "src_addr"),
            dst_addr=_parse_addr(obj["dst_addr"], "dst_addr"),
            src_port=_require_int(obj, "src_port"),
            dst_port=_require_int(obj, "dst_port"),
            protocol=_require_int(obj, "protocol"),
        )
        packets = tuple(
            PacketMeta(float(p["t"]), int(p["size"]), p["dir"]) for p in obj["packets"]
        )
        flow = FlowRecord(
            flow_id=_require_int(obj, "flow_id"),
            key=key,
            packets=packets,
            service_class=int(obj.get("service_class", 0)),
        )
    except KeyError as exc:
        raise InvariantError(str(exc.args[0]), "missing field") from None
    if "total_volume" in obj and obj["total_volume"] != flow.total_volume:
        raise InvariantError(
            "total_volume",
            f"{obj['total_volume']} != packet sum {flow.total_volume}",
        )
    if "duration" in obj and float(obj["duration"]) != flow.duration:
        raise InvariantError("duration", f"{obj['duration']} != last arrival {flow.duration}")
    return flow


def read_flows(path: str | Path, format: str = "jsonl") -> list[FlowRecord]:
    """Read a flow corpus, preserving file order.

    Raises ParseError for malformed lines and InvariantError (with the line
    number prefixed to its message) for records that parse but are invalid.
    """
    if format != "jsonl":
        raise ValueError(f"unsupported flow format {format!r}")
    flows = []
    seen: set[int] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, exc.msg) from None
            if not isinstance(obj, dict):
                raise ParseError(lineno, "expected a JSON object")
            try:
                flow = flow_from_dict(obj)
            except InvariantError as exc:
                raise InvariantError(exc.field, f"line {lineno}: {exc}") from None
            if flow.flow_id in seen:
                raise InvariantError("flow_id", f"line {lineno}: duplicate id {flow.flow_id}")
            seen.add(flow.flow_id)
            flows.append(flow)
    return flows


def write_flows(flows: Iterable[FlowRecord], path: str | Path, format: str = "jsonl") -> None:
    if format != "jsonl":
        raise ValueError(f"unsupported flow format {format!r}")
    with open(path, "w", encoding="utf-8") as fh:
        for flow in flows:
            fh.write(json.dumps(flow_to_dict(flow), separators=(",", ":")))
            fh.write("\n")


def volume_labels(flows: Sequence[FlowRecord], threshold: int) -> list[bool]:
    return [exceeds(f.total_volume, threshold) for f in flows]
