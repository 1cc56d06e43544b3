"""Feature encoders for first-packet flow metadata and primary-carrier RSRP.

Flow vector layout (54 values)::

    0       src_port
    1       dst_port
    2..17   indicators: src or dst port equals top_ports[i]
    18      dst_port < 1024
    19      protocol
    20..27  one-hot hash bucket of the source /16
    28..35  one-hot hash bucket of the source /24
    36..43  one-hot hash bucket of the destination /16
    44..51  one-hot hash bucket of the destination /24
    52      first packet size, bytes
    53      first packet direction (1 = uplink)

Radio vector layout for C primary cells (2C + 1 values): RSRPs sorted
descending, strongest minus second strongest (0 when C == 1), one-hot index of
the strongest cell.
"""

from __future__ import annotations

import zlib
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..flowdata import UPLINK, FlowKey, FlowRecord, PacketMeta
from ..radioenv import RadioSample

N_TOP_PORTS = 16
HASH_BUCKETS = 8
FLOW_FEATURE_LENGTH = 2 + N_TOP_PORTS + 2 + 4 * HASH_BUCKETS + 2

# Used until an encoder is fitted on training flows.
WELL_KNOWN_PORTS = (53, 80, 443, 22, 25, 110, 123, 143, 554, 993, 995, 1883, 1935, 5222, 8080, 8443)


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]
    schema_id: int

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("feature values must be finite")

    def __len__(self) -> int:
        return len(self.values)


def _schema_id(text: str) -> int:
    return zlib.crc32(text.encode("ascii"))


def _bucket(addr: int, prefix_len: int) -> int:
    net = addr >> (32 - prefix_len)
    return zlib.crc32(net.to_bytes(4, "big") + bytes([prefix_len])) % HASH_BUCKETS


@dataclass(frozen=True)
class FlowEncoder:
    top_ports: tuple[int, ...] = WELL_KNOWN_PORTS

    def __post_init__(self):
        if len(self.top_ports) > N_TOP_PORTS:
            raise ValueError(f"at most {N_TOP_PORTS} top ports")

    @classmethod
    def fit(cls, flows: Iterable[FlowRecord]) -> "FlowEncoder":
        """Pick the 16 most frequent ports (either side) in the training flows.

        Count ties go to the lower port number so the choice is reproducible.
        """
        counts = Counter()
        for f in flows:
            counts[f.key.src_port] += 1
            counts[f.key.dst_port] += 1
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls(tuple(p for p, _ in ranked[:N_TOP_PORTS]))

    @property
    def schema_id(self) -> int:
        return _schema_id("flow-v1|" + ",".join(map(str, self.top_ports)))

    def encode_row(self, key: FlowKey, first_packet: PacketMeta) -> np.ndarray:
        v = np.zeros(FLOW_FEATURE_LENGTH)
        v[0] = key.src_port
        v[1] = key.dst_port
        for i, port in enumerate(self.top_ports):
            if key.src_port == port or key.dst_port == port:
                v[2 + i] = 1.0
        v[18] = float(key.dst_port < 1024)
        v[19] = key.protocol
        base = 20
        for addr in (key.src_addr, key.dst_addr):
            for plen in (16, 24):
                v[base + _bucket(addr, plen)] = 1.0
                base += HASH_BUCKETS
        v[52] = first_packet.size
        v[53] = float(first_packet.direction == UPLINK)
        return v

    def encode(self, key: FlowKey, first_packet: PacketMeta) -> FeatureVector:
        return FeatureVector(tuple(self.encode_row(key, first_packet).tolist()), self.schema_id)

    def matrix(self, flows: Sequence[FlowRecord]) -> np.ndarray:
        if not flows:
            return np.zeros((0, FLOW_FEATURE_LENGTH))
        return np.array([self.encode_row(f.key, f.first_packet) for f in flows])


def encode_flow_features(key: FlowKey, first_packet: PacketMeta,
                         encoder: FlowEncoder = FlowEncoder()) -> FeatureVector:
    """Only the flow key and the first packet are visible to the encoder."""
    return encoder.encode(key, first_packet)


def radio_schema_id(n_cells: int) -> int:
    return _schema_id(f"radio-v1|{n_cells}")


def radio_rows(primary_rsrp: np.ndarray) -> np.ndarray:
    rsrp = np.atleast_2d(np.asarray(primary_rsrp, dtype=np.float64))
    n, c = rsrp.shape
    ranked = -np.sort(-rsrp, axis=1)
    margin = ranked[:, 0] - ranked[:, 1] if c > 1 else np.zeros(n)
    onehot = np.zeros((n, c))
    onehot[np.arange(n), np.argmax(rsrp, axis=1)] = 1.0
    return np.column_stack([ranked, margin, onehot])


def encode_radio_features(sample: RadioSample) -> FeatureVector:
    """Depends on ``primary_rsrp`` alone; position and secondary fields are never read."""
    row = radio_rows(sample.primary_rsrp)[0]
    return FeatureVector(tuple(row.tolist()), radio_schema_id(len(sample.primary_rsrp)))


def radio_matrix(samples: Sequence[RadioSample]) -> np.ndarray:
    return radio_rows(np.array([s.primary_rsrp for s in samples]))
