"""Synthetic two-carrier radio environment.

Primary (3.5 GHz) and secondary (28 GHz) cells sit on a square area. RSRP is
transmit power minus log-distance path loss minus a shadowing term. Shadowing
is a fixed Gaussian random field per cell and carrier, so a position always
sees the same shadowing. Each secondary cell's field is mixed with the field of
its nearest primary cell so that the two shadow terms have correlation
``shadow_correlation``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._rng import stream
from .errors import CalibrationError, ConfigError, InvariantError, ParseError


def hex_ring(centre: tuple[float, float], radius: float) -> tuple[tuple[float, float], ...]:
    """A site at ``centre`` plus six neighbours on a ring of ``radius``."""
    cx, cy = centre
    ring = tuple(
        (round(cx + radius * math.cos(math.radians(30 + 60 * k)), 3),
         round(cy + radius * math.sin(math.radians(30 + 60 * k)), 3))
        for k in range(6)
    )
    return ((cx, cy),) + ring


# One site in the middle carries both carriers; the six
# neighbours are primary-only and sit partly outside the device area.
_SITES = hex_ring((500.0, 500.0), 650.0)


@dataclass(frozen=True)
class EnvConfig:
    area_size: float = 1000.0
    primary_cells: tuple[tuple[float, float], ...] = _SITES
    secondary_cells: tuple[tuple[float, float], ...] = ((500.0, 500.0),)
    pathloss_exponent_primary: float = 3.0
    pathloss_exponent_secondary: float = 3.4
    shadow_sigma_dB: float = 6.0
    shadow_correlation: float = 0.8
    coverage_threshold_dBm: float | None = None
    target_secondary_coverage: float = 0.22
    seed: int = 0
    tx_power_primary_dBm: float = 46.0
    tx_power_secondary_dBm: float = 40.0
    # Free-space loss at the 1 m reference distance, 3.5 GHz and 28 GHz.
    pl0_primary_dB: float = 43.3
    pl0_secondary_dB: float = 61.4
    reference_distance_m: float = 1.0
    shadow_decorrelation_m: float = 20.0
    shadow_components: int = 128

    def __post_init__(self):
        object.__setattr__(self, "primary_cells", tuple(tuple(map(float, p)) for p in self.primary_cells))
        object.__setattr__(self, "secondary_cells", tuple(tuple(map(float, p)) for p in self.secondary_cells))
        if not self.area_size > 0:
            raise ConfigError("env.area_size", "must be > 0")
        if len(self.primary_cells) < 1:
            raise ConfigError("env.primary_cells", "at least one cell required")
        if len(self.secondary_cells) < 1:
            raise ConfigError("env.secondary_cells", "at least one cell required")
        for name in ("primary_cells", "secondary_cells"):
            for i, p in enumerate(getattr(self, name)):
                if len(p) != 2:
                    raise ConfigError(f"env.{name}[{i}]", "expected an (x, y) pair")
        if not 0.0 <= self.shadow_correlation <= 1.0:
            raise ConfigError("env.shadow_correlation", f"must be in [0, 1], got {self.shadow_correlation}")
        if self.shadow_sigma_dB < 0:
            raise ConfigError("env.shadow_sigma_dB", "must be >= 0")
        if not 0.0 < self.target_secondary_coverage < 1.0:
            raise ConfigError("env.target_secondary_coverage", "must be in (0, 1)")
        if self.reference_distance_m <= 0:
            raise ConfigError("env.reference_distance_m", "must be > 0")
        if self.shadow_decorrelation_m <= 0 or self.shadow_components < 1:
            raise ConfigError("env.shadow_decorrelation_m", "field parameters must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["primary_cells"] = [list(p) for p in self.primary_cells]
        d["secondary_cells"] = [list(p) for p in self.secondary_cells]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"env.{sorted(unknown)[0]}", "unknown field")
        d = dict(d)
        for name in ("primary_cells", "secondary_cells"):
            if name in d:
                d[name] = tuple(tuple(p) for p in d[name])
        return cls(**d)

    @property
    def n_primary(self) -> int:
        return len(self.primary_cells)


@dataclass(frozen=True)
class RadioSample:
    device_id: int
    position: tuple[float, float]
    primary_rsrp: tuple[float, ...]
    secondary_rsrp: float
    covered: bool


@dataclass(frozen=True)
class Trajectory:
    device_id: int
    route_id: int
    timestamps: tuple[float, ...]
    samples: tuple[RadioSample, ...]

    def __post_init__(self):
        if len(self.timestamps) != len(self.samples):
            raise InvariantError("samples", "one timestamp per sample required")
        steps = np.diff(self.timestamps)
        if np.any(steps <= 0):
            raise InvariantError("timestamps", "must be strictly increasing")
        if len(steps) and not np.allclose(steps, steps[0]):
            raise InvariantError("timestamps", "sampling period must be constant")

    @property
    def period(self) -> float:
        return float(self.timestamps[1] - self.timestamps[0]) if len(self.timestamps) > 1 else 0.0

    def rsrp_matrix(self) -> np.ndarray:
        return np.array([s.primary_rsrp for s in self.samples])


class _ShadowField:
    """Unit-variance Gaussian field with squared-exponential correlation."""

    def __init__(self, rng: np.random.Generator, length: float, components: int):
        self.w = rng.standard_normal((components, 2)) / length
        self.b = rng.uniform(0.0, 2.0 * np.pi, components)
        self.gain = math.sqrt(2.0 / components)

    def __call__(self, xy: np.ndarray) -> np.ndarray:
        return self.gain * np.cos(xy @ self.w.T + self.b).sum(axis=1)


class RadioEnvironment:
    """Evaluates RSRP and shadowing at arbitrary positions for one config."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.primary_xy = np.array(config.primary_cells, dtype=float)
        self.secondary_xy = np.array(config.secondary_cells, dtype=float)
        d = np.linalg.norm(self.secondary_xy[:, None, :] - self.primary_xy[None, :, :], axis=2)
        # Lowest index wins ties so the anchor choice is reproducible.
        self.anchor = np.argmin(d, axis=1)

    @cached_property
    def _fields(self):
        c = self.config
        primary = [
            _ShadowField(stream(c.seed, "shadow", "primary", i), c.shadow_decorrelation_m, c.shadow_components)
            for i in range(len(self.primary_xy))
        ]
        innovation = [
            _ShadowField(stream(c.seed, "shadow", "secondary", j), c.shadow_decorrelation_m, c.shadow_components)
            for j in range(len(self.secondary_xy))
        ]
        return primary, innovation

    def shadow_terms(self, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Unit-variance shadow terms: (N, n_primary) and (N, n_secondary)."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        primary, innovation = self._fields
        sp = np.column_stack([f(xy) for f in primary])
        rho = self.config.shadow_correlation
        ss = np.column_stack(
            [rho * sp[:, a] + math.sqrt(1.0 - rho * rho) * f(xy) for a, f in zip(self.anchor, innovation)]
        )
        return sp, ss

    def _mean_rsrp(self, xy, cells, tx, pl0, n):
        d = np.linalg.norm(xy[:, None, :] - cells[None, :, :], axis=2)
        d = np.maximum(d, self.config.reference_distance_m)
        return tx - pl0 - 10.0 * n * np.log10(d / self.config.reference_distance_m)

    def rsrp(self, xy: np.ndarray, shadowing: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """Primary RSRP per cell (N, C) and best secondary RSRP (N,) in dBm."""
        c = self.config
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        prim = self._mean_rsrp(xy, self.primary_xy, c.tx_power_primary_dBm, c.pl0_primary_dB,
                               c.pathloss_exponent_primary)
        sec = self._mean_rsrp(xy, self.secondary_xy, c.tx_power_secondary_dBm, c.pl0_secondary_dB,
                              c.pathloss_exponent_secondary)
        if shadowing and c.shadow_sigma_dB > 0:
            sp, ss = self.shadow_terms(xy)
            prim = prim - c.shadow_sigma_dB * sp
            sec = sec - c.shadow_sigma_dB * ss
        return prim, sec.max(axis=1)

    def samples_at(self, device_ids: Sequence[int], xy: np.ndarray, threshold: float,
                   shadowing: bool = True) -> list[RadioSample]:
        prim, sec = self.rsrp(xy, shadowing)
        return [
            RadioSample(
                device_id=int(dev),
                position=(float(p[0]), float(p[1])),
                primary_rsrp=tuple(float(v) for v in row),
                secondary_rsrp=float(s),
                covered=bool(s >= threshold),
            )
            for dev, p, row, s in zip(device_ids, xy, prim, sec)
        ]


def calibrate_threshold(secondary_rsrp: Sequence[float], target_fraction: float) -> float:
    """Threshold that marks ``target_fraction`` of the samples as covered.

    Returns the midpoint between the k-th and (k+1)-th strongest values with
    k = round(target_fraction * n), moving to the nearest boundary between
    distinct values when ties straddle it.
    """
    values = np.sort(np.asarray(secondary_rsrp, dtype=float))[::-1]
    n = len(values)
    if n == 0:
        raise ValueError("cannot calibrate on an empty sample")
    if not 0.0 < target_fraction < 1.0:
        raise ValueError("target_fraction must be in (0, 1)")
    k = min(max(int(round(target_fraction * n)), 1), n - 1) if n > 1 else 0
    boundaries = np.flatnonzero(values[:-1] > values[1:]) + 1  # candidate covered counts
    if boundaries.size == 0:
        raise CalibrationError("secondary RSRP is constant; target coverage unreachable")
    best = boundaries[np.argmin(np.abs(boundaries - k))]
    return float(0.5 * (values[best - 1] + values[best]))


def _positions(config: EnvConfig, device_ids: Iterable[int]) -> np.ndarray:
    return np.array(
        [stream(config.seed, "position", dev).uniform(0.0, config.area_size, 2) for dev in device_ids]
    ).reshape(-1, 2)


def calibrate_environment(config: EnvConfig, n_reference: int = 20_000) -> EnvConfig:
    """Fix the coverage threshold from a reference draw over the whole area."""
    if config.coverage_threshold_dBm is not None:
        return config
    rng = stream(config.seed, "calibration")
    xy = rng.uniform(0.0, config.area_size, (n_reference, 2))
    _, sec = RadioEnvironment(config).rsrp(xy)
    return replace(config, coverage_threshold_dBm=calibrate_threshold(sec, config.target_secondary_coverage))


def gen_radio_samples(config: EnvConfig, n_devices: int, first_device_id: int = 0,
                      shadowing: bool = True) -> list[RadioSample]:
    """Uniformly placed devices; positions come from per-device streams.

    Without a configured threshold the coverage threshold is calibrated on the
    generated samples themselves.
    """
    ids = range(first_device_id, first_device_id + n_devices)
    xy = _positions(config, ids)
    env = RadioEnvironment(config)
    threshold = config.coverage_threshold_dBm
    if threshold is None:
        if n_devices == 0:
            return []
        threshold = calibrate_threshold(env.rsrp(xy, shadowing)[1], config.target_secondary_coverage)
    return env.samples_at(ids, xy, threshold, shadowing)


# -- routes and trajectories ------------------------------------------------

def route_polylines(config: EnvConfig, routes: int) -> list[np.ndarray]:
    """Fixed three-point routes crossing the area at spread-out headings."""
    L = config.area_size
    rng = stream(config.seed, "routes", routes)
    out = []
    for r in range(routes):
        theta = math.pi * r / routes + rng.uniform(-0.25, 0.25)
        u = np.array([math.cos(theta), math.sin(theta)])
        normal = np.array([-u[1], u[0]])
        centre = np.full(2, L / 2) + rng.uniform(-0.15, 0.15, 2) * L
        half = 0.45 * L
        mid = centre + rng.uniform(-0.1, 0.1) * L * normal
        pts = np.array([centre - half * u, mid, centre + half * u])
        out.append(np.clip(pts, 0.05 * L, 0.95 * L))
    return out


def _walk(poly: np.ndarray, n: int, offset: float) -> np.ndarray:
    seg = np.diff(poly, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    s = np.linspace(0.0, cum[-1], n)
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    frac = (s - cum[idx]) / lengths[idx]
    pts = poly[idx] + frac[:, None] * seg[idx]
    normals = np.column_stack([-seg[idx, 1], seg[idx, 0]]) / lengths[idx, None]
    return pts + offset * normals


def gen_trajectories(config: EnvConfig, routes: int, devices_per_route: int,
                     samples_per_trajectory: int = 30, jitter_m: float = 5.0,
                     period_s: float = 10.0, first_device_id: int = 0) -> list[Trajectory]:
    """Devices walking fixed routes at constant speed, one fingerprint per period.

    Each device keeps a constant lateral offset from its route, drawn from
    N(0, jitter_m) on the device's own stream.
    """
    if routes < 1:
        raise ConfigError("trajectories.routes", "must be >= 1")
    if samples_per_trajectory < 2:
        raise ConfigError("trajectories.samples_per_trajectory", "must be >= 2")
    config = calibrate_environment(config)
    env = RadioEnvironment(config)
    polys = route_polylines(config, routes)
    times = tuple(period_s * k for k in range(samples_per_trajectory))
    out = []
    for r, poly in enumerate(polys):
        for j in range(devices_per_route):
            dev = first_device_id + r * devices_per_route + j
            offset = stream(config.seed, "jitter", dev).normal(0.0, jitter_m) if jitter_m > 0 else 0.0
            xy = _walk(poly, samples_per_trajectory, offset)
            samples = env.samples_at([dev] * samples_per_trajectory, xy, config.coverage_threshold_dBm)
            out.append(Trajectory(dev, r, times, tuple(samples)))
    return out


def serving_cells(rsrp: np.ndarray, hysteresis_dB: float = 3.0) -> np.ndarray:
    """Serving primary cell per step with an A3-style handover margin.

    Starts on the strongest cell and hands over only when another cell is
    stronger than the serving one by more than ``hysteresis_dB``.
    """
    rsrp = np.atleast_2d(rsrp)
    serving = np.empty(len(rsrp), dtype=int)
    cur = int(np.argmax(rsrp[0]))
    for k, row in enumerate(rsrp):
        best = int(np.argmax(row))
        if row[best] > row[cur] + hysteresis_dB:
            cur = best
        serving[k] = cur
    return serving


# -- JSONL ------------------------------------------------------------------

def sample_to_dict(s: RadioSample) -> dict:
    return {
        "device_id": s.device_id,
        "x": s.position[0],
        "y": s.position[1],
        "primary_rsrp": list(s.primary_rsrp),
        "secondary_rsrp": s.secondary_rsrp,
        "covered": s.covered,
    }


def sample_from_dict(d: dict, threshold: float | None = None) -> RadioSample:
    s = RadioSample(
        device_id=int(d["device_id"]),
        position=(float(d["x"]), float(d["y"])),
        primary_rsrp=tuple(float(v) for v in d["primary_rsrp"]),
        secondary_rsrp=float(d["secondary_rsrp"]),
        covered=bool(d["covered"]),
    )
    if not s.primary_rsrp:
        raise InvariantError("primary_rsrp", "at least one primary cell required")
    if threshold is not None and s.covered != (s.secondary_rsrp >= threshold):
        raise InvariantError("covered", "disagrees with secondary_rsrp and threshold")
    return s


def _read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, exc.msg) from None


def write_samples(samples: Iterable[RadioSample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(sample_to_dict(s), separators=(",", ":")) + "\n")


def read_samples(path: str | Path, threshold: float | None = None) -> list[RadioSample]:
    out = []
    for lineno, obj in _read_jsonl(path):
        try:
            out.append(sample_from_dict(obj, threshold))
        except KeyError as exc:
            raise ParseError(lineno, f"missing field {exc.args[0]}") from None
    return out


def write_trajectories(trajectories: Iterable[Trajectory], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tr in trajectories:
            obj = {
                "device_id": tr.device_id,
                "route_id": tr.route_id,
                "samples": [{"t": t, **sample_to_dict(s)} for t, s in zip(tr.timestamps, tr.samples)],
            }
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def read_trajectories(path: str | Path) -> list[Trajectory]:
    out = []
    for lineno, obj in _read_jsonl(path):
        try:
            rows = obj["samples"]
            out.append(
                Trajectory(
                    device_id=int(obj["device_id"]),
                    route_id=int(obj["route_id"]),
                    timestamps=tuple(float(r["t"]) for r in rows),
                    samples=tuple(sample_from_dict(r) for r in rows),
                )
            )
        except KeyError as exc:
            raise ParseError(lineno, f"missing field {exc.args[0]}") from None
    return out
