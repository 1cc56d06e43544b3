"""Radio-domain trajectories: mining, matching and forecasting.

Everything here works on fingerprints, i.e. per-cell RSRP keyed by cell id.
Cells that were not detected are imputed at ``floor_dBm`` so that fingerprints
with different cell sets live in one Euclidean space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from ._rng import stream
from .errors import InvariantError
from .metrics import adjusted_rand_index
from .radioenv import RadioSample, Trajectory, serving_cells

MODEL_FORMAT = "steersim-trajectories"
MODEL_VERSION = 1

STATIC, SLOW, FAST = "static", "slow", "fast"


@dataclass(frozen=True)
class MobilityParams:
    floor_dBm: float = -140.0
    detection_dBm: float = -125.0
    kmeans_max_iter: int = 100
    kmeans_restarts: int = 10
    n_steps: int | None = None  # None: shortest trajectory length
    temperature_dB: float = 1.0
    hysteresis_dB: float = 3.0
    slow_dB_per_step: float = 0.5
    fast_dB_per_step: float = 3.0
    handover_neighbours: int = 5
    seed: int = 0


@dataclass(frozen=True)
class Fingerprint:
    """Per-cell RSRP in dBm; ``None`` marks a cell that was not detected."""

    values: dict

    def __post_init__(self):
        if not any(v is not None for v in self.values.values()):
            raise InvariantError("values", "fingerprint has no detected cell")

    @classmethod
    def from_sample(cls, sample: RadioSample, detection_dBm: float = MobilityParams.detection_dBm) -> "Fingerprint":
        return cls({i: (v if v >= detection_dBm else None) for i, v in enumerate(sample.primary_rsrp)})

    def vector(self, cells: Sequence[int], floor_dBm: float) -> np.ndarray:
        out = np.full(len(cells), floor_dBm)
        for j, c in enumerate(cells):
            v = self.values.get(c)
            if v is not None:
                out[j] = v
        return out


@dataclass(frozen=True)
class RouteTemplate:
    route_id: int
    centroids: np.ndarray  # (steps, cells)
    serving: np.ndarray  # (steps,) cell id
    coverage: np.ndarray  # (steps,) mean secondary coverage of the members
    member_serving: np.ndarray  # (members, steps) cell id
    member_ids: tuple[int, ...]
    member_fingerprints: np.ndarray | None = None  # (members, steps, cells), floor-imputed

    @property
    def n_steps(self) -> int:
        return len(self.serving)


@dataclass(frozen=True)
class TrajectoryModel:
    cells: tuple[int, ...]
    templates: tuple[RouteTemplate, ...]
    params: MobilityParams
    labels: tuple[int, ...] = ()  # cluster of each training trajectory, input order

    def template(self, route_id: int) -> RouteTemplate:
        for t in self.templates:
            if t.route_id == route_id:
                return t
        raise KeyError(f"no mined route {route_id}")

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "cells": list(self.cells),
            "params": self.params.__dict__,
            "labels": list(self.labels),
            "templates": [
                {
                    "route_id": t.route_id,
                    "centroids": t.centroids.tolist(),
                    "serving": t.serving.tolist(),
                    "coverage": t.coverage.tolist(),
                    "member_serving": t.member_serving.tolist(),
                    "member_ids": list(t.member_ids),
                    "member_fingerprints": None if t.member_fingerprints is None
                    else np.round(t.member_fingerprints, 3).tolist(),
                }
                for t in self.templates
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryModel":
        if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported trajectory model {d.get('format')!r} v{d.get('version')!r}")
        templates = tuple(
            RouteTemplate(
                route_id=int(t["route_id"]),
                centroids=np.asarray(t["centroids"], dtype=float),
                serving=np.asarray(t["serving"], dtype=int),
                coverage=np.asarray(t["coverage"], dtype=float),
                member_serving=np.asarray(t["member_serving"], dtype=int),
                member_ids=tuple(t["member_ids"]),
                member_fingerprints=None if t.get("member_fingerprints") is None
                else np.asarray(t["member_fingerprints"], dtype=float),
            )
            for t in d["templates"]
        )
        return cls(tuple(d["cells"]), templates, MobilityParams(**d["params"]), tuple(d["labels"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), separators=(",", ":")) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TrajectoryModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class RouteMatch(NamedTuple):
    route_id: int
    score: float
    distance: float
    offset: int  # template step aligned with the first prefix fingerprint


@dataclass(frozen=True)
class HandoverPrediction:
    candidates: tuple[tuple[int, float], ...]  # (cell id, score), soonest first
    steps_to_handover: int | None  # None: no handover within the horizon

    @property
    def target(self) -> int | None:
        return self.candidates[0][0] if self.candidates and self.steps_to_handover is not None else None


# -- mining -----------------------------------------------------------------

def _matrix(tr: Trajectory, cells: Sequence[int], p: MobilityParams) -> np.ndarray:
    return np.array([Fingerprint.from_sample(s, p.detection_dBm).vector(cells, p.floor_dBm) for s in tr.samples])


def _resample(m: np.ndarray, n: int) -> np.ndarray:
    if len(m) == n:
        return m
    src = np.linspace(0.0, 1.0, len(m))
    dst = np.linspace(0.0, 1.0, n)
    return np.column_stack([np.interp(dst, src, col) for col in np.atleast_2d(m.T)]) if m.ndim == 2 \
        else np.interp(dst, src, m)


def kmeans(X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 100,
           n_init: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd iterations from k-means++ starts; returns (labels, centres).

    With ``n_init`` > 1 the run with the lowest within-cluster sum of squares
    wins (earliest run on ties).
    """
    best = None
    for _ in range(max(n_init, 1)):
        labels, C = _lloyd(X, k, rng, max_iter)
        inertia = float(((X - C[labels]) ** 2).sum())
        if best is None or inertia < best[0]:
            best = (inertia, labels, C)
    return best[1], best[2]


def _lloyd(X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int) -> tuple[np.ndarray, np.ndarray]:
    n = len(X)
    centres = [X[rng.integers(n)]]
    d2 = ((X - centres[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        idx = rng.integers(n) if total == 0 else rng.choice(n, p=d2 / total)
        centres.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    C = np.array(centres, dtype=float)
    labels = np.full(n, -1)
    for _ in range(max_iter):
        dist = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
        new = dist.argmin(axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = labels == j
            if members.any():
                C[j] = X[members].mean(axis=0)
            else:
                far = int(dist[np.arange(n), labels].argmax())
                labels[far] = j
                C[j] = X[far]
    return labels, C


def _mode(column: np.ndarray) -> int:
    values, counts = np.unique(column, return_counts=True)
    return int(values[np.argmax(counts)])  # lowest cell id on ties


def mine_trajectories(trajectories: Sequence[Trajectory], k_routes: int,
                      params: MobilityParams = MobilityParams()) -> TrajectoryModel:
    """Cluster trajectories into ``k_routes`` templates.

    Trajectories are resampled to a common step count, flattened and grouped by
    k-means. Each template keeps step-wise centroid fingerprints, the modal
    serving cell per step, the members' serving-cell sequences and the mean
    secondary coverage per step.
    """
    if k_routes < 1:
        raise ValueError("k_routes must be >= 1")
    if len(trajectories) < k_routes:
        raise ValueError(f"{len(trajectories)} trajectories cannot form {k_routes} routes")
    periods = {round(t.period, 9) for t in trajectories}
    if len(periods) > 1:
        raise ValueError(f"trajectories mix sampling periods {sorted(periods)}")
    n_steps = params.n_steps or min(len(t.samples) for t in trajectories)
    if n_steps < 2:
        raise ValueError("templates need at least 2 steps")
    cells = tuple(range(max(len(t.samples[0].primary_rsrp) for t in trajectories)))
    mats = np.array([_resample(_matrix(t, cells, params), n_steps) for t in trajectories])
    cover = np.array([_resample(np.array([s.covered for s in t.samples], float), n_steps) for t in trajectories])
    labels, _ = kmeans(mats.reshape(len(mats), -1), k_routes, stream(params.seed, "kmeans"),
                       params.kmeans_max_iter, params.kmeans_restarts)
    # Number clusters by first appearance so ids do not depend on the init.
    first_seen = {c: i for i, c in reversed(list(enumerate(labels)))}
    remap = {c: r for r, c in enumerate(sorted(first_seen, key=first_seen.get))}
    labels = np.array([remap[c] for c in labels])
    templates = []
    for r in range(len(remap)):
        idx = np.flatnonzero(labels == r)
        member_serving = np.array([serving_cells(mats[i], params.hysteresis_dB) for i in idx])
        templates.append(
            RouteTemplate(
                route_id=r,
                centroids=mats[idx].mean(axis=0),
                serving=np.array([_mode(col) for col in member_serving.T]),
                coverage=cover[idx].mean(axis=0),
                member_serving=member_serving,
                member_ids=tuple(int(trajectories[i].device_id) for i in idx),
                member_fingerprints=mats[idx],
            )
        )
    return TrajectoryModel(cells, tuple(templates), params, tuple(int(x) for x in labels))


# -- matching and forecasting ---------------------------------------------

def match_trajectory(model: TrajectoryModel, observed_prefix: Sequence[Fingerprint]) -> list[RouteMatch]:
    """Rank mined routes by how well the prefix fits a contiguous template window.

    The distance to a route is the smallest, over window offsets, mean
    Euclidean distance between prefix fingerprints and template centroids.
    Scores are a softmax of negative distances (temperature in dB).
    """
    if not observed_prefix:
        raise ValueError("empty prefix")
    p = model.params
    obs = np.array([fp.vector(model.cells, p.floor_dBm) for fp in observed_prefix])
    n = len(obs)
    found = []
    for t in model.templates:
        if t.n_steps < n:
            continue
        windows = np.lib.stride_tricks.sliding_window_view(t.centroids, (n, len(model.cells)))[:, 0]
        dist = np.linalg.norm(windows - obs[None], axis=2).mean(axis=1)
        offset = int(np.argmin(dist))
        found.append((t.route_id, float(dist[offset]), offset))
    if not found:
        raise ValueError(f"prefix of {n} steps is longer than every template")
    d = np.array([f[1] for f in found])
    w = np.exp(-(d - d.min()) / p.temperature_dB)
    scores = w / w.sum()
    matches = [RouteMatch(r, float(s), dist, off) for (r, dist, off), s in zip(found, scores)]
    return sorted(matches, key=lambda m: (-m.score, m.distance, m.route_id))


def _check_window(t: RouteTemplate, current_step: int, horizon: int) -> None:
    if current_step < 0 or horizon < 0:
        raise ValueError("current_step and horizon must be >= 0")
    if current_step + horizon > t.n_steps - 1:
        raise ValueError(f"step {current_step} + horizon {horizon} runs past the {t.n_steps}-step template")


def predict_coverage_ahead(model: TrajectoryModel, route_id: int, current_step: int, horizon_steps: int) -> np.ndarray:
    t = model.template(route_id)
    _check_window(t, current_step, horizon_steps)
    return t.coverage[current_step + 1: current_step + 1 + horizon_steps].copy()


def predict_handover(model: TrajectoryModel, route_id: int, current_step: int, horizon_steps: int,
                     observed_prefix: Sequence[Fingerprint] | None = None) -> HandoverPrediction:
    """Next serving-cell change on the matched route.

    The serving-cell sequence is scanned forward from ``current_step`` (the
    horizon is clipped to the template end); the first change gives
    ``steps_to_handover``. Candidates are the distinct upcoming cells in order
    of first appearance, each scored by the fraction of consulted training
    members whose first handover went to that cell.

    Without a prefix the template's modal sequence and all route members are
    used. Given the device's ``observed_prefix`` (ending at ``current_step``),
    only members in the device's serving state are consulted, and of those the
    ``handover_neighbours`` nearest in fingerprint space over the prefix
    window; the scanned sequence is then their step-wise mode. Handover timing
    depends on hysteresis state and on the shadowing along the exact path, so
    the neighbours are better timing references than the route average.
    """
    t = model.template(route_id)
    if not 0 <= current_step < t.n_steps:
        raise ValueError(f"current_step {current_step} outside the {t.n_steps}-step template")
    end = min(current_step + max(horizon_steps, 0), t.n_steps - 1)
    rows, serving = t.member_serving, t.serving
    if observed_prefix:
        rows = rows[_neighbours(model, t, current_step, observed_prefix)]
        serving = np.array([_mode(col) for col in rows.T])
    here = serving[current_step]
    ahead = serving[current_step + 1: end + 1]
    changes = np.flatnonzero(ahead != here)
    if changes.size == 0:
        return HandoverPrediction((), None)
    firsts = []
    for row in rows:
        diff = np.flatnonzero(row[current_step + 1: end + 1] != row[current_step])
        firsts.append(int(row[current_step + 1 + diff[0]]) if diff.size else None)
    order = list(dict.fromkeys(int(c) for c in ahead[changes]))
    candidates = tuple((c, firsts.count(c) / len(rows)) for c in order)
    return HandoverPrediction(candidates, int(changes[0]) + 1)


def _neighbours(model: TrajectoryModel, t: RouteTemplate, current_step: int,
                prefix: Sequence[Fingerprint]) -> np.ndarray:
    p = model.params
    obs = np.array([fp.vector(model.cells, p.floor_dBm) for fp in prefix])
    obs = obs[max(len(obs) - (current_step + 1), 0):]
    keep = np.arange(len(t.member_serving))
    if len(obs) == len(prefix):
        now = serving_cells(obs, p.hysteresis_dB)[-1]
        same = keep[t.member_serving[:, current_step] == now]
        if same.size:
            keep = same
    if t.member_fingerprints is not None and p.handover_neighbours > 0:
        window = t.member_fingerprints[keep, current_step + 1 - len(obs): current_step + 1]
        dist = np.linalg.norm(window - obs[None], axis=2).mean(axis=1)
        keep = keep[np.argsort(dist, kind="stable")[: p.handover_neighbours]]
    return keep


def mean_displacement(prefix: Sequence[Fingerprint], floor_dBm: float = MobilityParams.floor_dBm) -> float:
    cells = sorted(set().union(*(fp.values for fp in prefix)))
    vecs = np.array([fp.vector(cells, floor_dBm) for fp in prefix])
    return float(np.linalg.norm(np.diff(vecs, axis=0), axis=1).mean())


def estimate_dynamics(observed_prefix: Sequence[Fingerprint], slow_dB_per_step: float = 0.5,
                      fast_dB_per_step: float = 3.0, floor_dBm: float = MobilityParams.floor_dBm) -> str:
    """Classify radio-field dynamics by mean fingerprint change per step.

    A value exactly on a threshold falls in the lower class.
    """
    if len(observed_prefix) < 2:
        raise ValueError("need at least two fingerprints")
    d = mean_displacement(observed_prefix, floor_dBm)
    if d <= slow_dB_per_step:
        return STATIC
    if d <= fast_dB_per_step:
        return SLOW
    return FAST


# -- evaluation against generator ground truth -----------------------------

@dataclass
class MobilityReport:
    cluster_agreement: float
    route_top1_accuracy: float
    handover_within_1_accuracy: float
    n_train: int
    n_held_out: int
    prefix_steps: int
    details: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "cluster_agreement": self.cluster_agreement,
            "route_top1_accuracy": self.route_top1_accuracy,
            "handover_within_1_accuracy": self.handover_within_1_accuracy,
            "n_train": self.n_train,
            "n_held_out": self.n_held_out,
            "prefix_steps": self.prefix_steps,
        }


def _first_change(serving: np.ndarray, current: int) -> int | None:
    diff = np.flatnonzero(serving[current + 1:] != serving[current])
    return int(diff[0]) + 1 if diff.size else None


def evaluate_mobility(model: TrajectoryModel, train: Sequence[Trajectory], held_out: Sequence[Trajectory],
                      prefix_fraction: float = 0.5) -> MobilityReport:
    """Score a mined model against the generator's route ids and serving cells.

    Each cluster is named after the majority route of its training members.
    Held-out devices reveal the first ``prefix_fraction`` of their trajectory;
    the handover forecast counts as correct when it is within one step of the
    device's own next serving-cell change (or both report none).
    """
    p = model.params
    truth = np.array([t.route_id for t in train])
    labels = np.array(model.labels)
    to_route = {}
    for r in np.unique(labels):
        values, counts = np.unique(truth[labels == r], return_counts=True)
        to_route[int(r)] = int(values[np.argmax(counts)])
    route_hits = handover_hits = 0
    details = []
    prefix_steps = 0
    for tr in held_out:
        n = len(tr.samples)
        prefix_steps = max(1, int(round(prefix_fraction * n)))
        prefix = [Fingerprint.from_sample(s, p.detection_dBm) for s in tr.samples[:prefix_steps]]
        best = match_trajectory(model, prefix)[0]
        route_ok = to_route[best.route_id] == tr.route_id
        current = best.offset + prefix_steps - 1
        template = model.template(best.route_id)
        horizon = template.n_steps - 1 - current
        pred = predict_handover(model, best.route_id, current, horizon, prefix).steps_to_handover
        own = serving_cells(_matrix(tr, model.cells, p), p.hysteresis_dB)
        true = _first_change(own, prefix_steps - 1)
        if true is not None and true > n - prefix_steps:
            true = None
        ok = (pred is None and true is None) or (pred is not None and true is not None and abs(pred - true) <= 1)
        route_hits += route_ok
        handover_hits += ok
        details.append({"device_id": tr.device_id, "route_id": tr.route_id, "matched": to_route[best.route_id],
                        "predicted_steps": pred, "true_steps": true})
    m = len(held_out)
    return MobilityReport(
        cluster_agreement=adjusted_rand_index(labels, truth),
        route_top1_accuracy=route_hits / m if m else float("nan"),
        handover_within_1_accuracy=handover_hits / m if m else float("nan"),
        n_train=len(train),
        n_held_out=m,
        prefix_steps=prefix_steps,
        details=details,
    )
