"""First-packet traffic-volume predictors and the secondary-coverage predictor."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ._rng import derive_seed
from .errors import ClassStarvedError, SchemaMismatchError
from .flowdata import VOLUME_THRESHOLDS, FlowKey, FlowRecord, PacketMeta
from .metrics import RocCurve, roc_curve, stratified_split_indices
from .mlcore import Dataset, FlowEncoder, ForestModel, ForestParams, radio_matrix, radio_schema_id, train_forest
from .mlcore.forest import load_model, save_model
from .radioenv import RadioSample

TEST_FRACTION = 0.3
MIN_TRAFFIC_FLOWS = 200
MIN_COVERAGE_SAMPLES = 500


def threshold_tag(threshold: int) -> str:
    return f"{threshold // 1000}kB"


@dataclass(frozen=True)
class TrafficPredictor:
    encoder: FlowEncoder
    models: dict  # threshold in bytes -> ForestModel

    @property
    def schema_id(self) -> int:
        return self.encoder.schema_id

    def model_for(self, threshold: int) -> ForestModel:
        if threshold not in VOLUME_THRESHOLDS:
            raise ValueError(f"unknown volume threshold {threshold}; expected one of {VOLUME_THRESHOLDS}")
        if threshold not in self.models:
            raise ValueError(f"no model was trained for {threshold_tag(threshold)}")
        return self.models[threshold]


@dataclass(frozen=True)
class CoveragePredictor:
    model: ForestModel
    n_cells: int
    coverage_threshold_dBm: float | None

    @property
    def schema_id(self) -> int:
        return radio_schema_id(self.n_cells)


@dataclass
class TrafficTraining:
    predictor: TrafficPredictor
    rocs: dict = field(default_factory=dict)  # threshold -> RocCurve on the held-out split
    splits: dict = field(default_factory=dict)  # threshold -> (train_idx, test_idx)
    starved: dict = field(default_factory=dict)  # threshold -> reason


@dataclass
class CoverageTraining:
    predictor: CoveragePredictor
    roc: RocCurve
    train_idx: np.ndarray
    test_idx: np.ndarray


def train_traffic_predictor(flows: Sequence[FlowRecord], params: ForestParams = ForestParams(),
                            seed: int = 0) -> TrafficTraining:
    """One forest per volume threshold, each on its own stratified 70/30 split.

    The port vocabulary is fitted on the whole corpus (it uses no labels).
    Thresholds lacking a class are reported in ``starved`` and skipped.
    """
    if len(flows) < MIN_TRAFFIC_FLOWS:
        raise ValueError(f"need at least {MIN_TRAFFIC_FLOWS} flows, got {len(flows)}")
    encoder = FlowEncoder.fit(flows)
    X = encoder.matrix(flows)
    volumes = np.array([f.total_volume for f in flows])
    result = TrafficTraining(TrafficPredictor(encoder, {}))
    for threshold in VOLUME_THRESHOLDS:
        y = volumes > threshold
        try:
            train_idx, test_idx = stratified_split_indices(y, TEST_FRACTION, seed, f"split-{threshold}")
        except ClassStarvedError as exc:
            result.starved[threshold] = str(exc)
            continue
        fp = replace(params, seed=derive_seed(seed, "traffic-forest", threshold))
        model = train_forest(Dataset(X[train_idx], y[train_idx], encoder.schema_id), fp)
        result.predictor.models[threshold] = model
        result.rocs[threshold] = roc_curve(model.predict_batch(X[test_idx]), y[test_idx])
        result.splits[threshold] = (train_idx, test_idx)
    if not result.predictor.models:
        raise ClassStarvedError("every volume threshold lacks one of the classes")
    return result


def infer_coverage_threshold(samples: Sequence[RadioSample]) -> float | None:
    covered = [s.secondary_rsrp for s in samples if s.covered]
    return min(covered) if covered else None


def train_coverage_predictor(samples: Sequence[RadioSample], params: ForestParams = ForestParams(),
                             seed: int = 0, coverage_threshold_dBm: float | None = None) -> CoverageTraining:
    if len(samples) < MIN_COVERAGE_SAMPLES:
        raise ValueError(f"need at least {MIN_COVERAGE_SAMPLES} samples, got {len(samples)}")
    n_cells = {len(s.primary_rsrp) for s in samples}
    if len(n_cells) != 1:
        raise SchemaMismatchError(f"samples mix primary cell counts {sorted(n_cells)}")
    n_cells = n_cells.pop()
    X = radio_matrix(samples)
    y = np.array([s.covered for s in samples])
    train_idx, test_idx = stratified_split_indices(y, TEST_FRACTION, seed, "split-coverage")
    fp = replace(params, seed=derive_seed(seed, "coverage-forest"))
    model = train_forest(Dataset(X[train_idx], y[train_idx], radio_schema_id(n_cells)), fp)
    roc = roc_curve(model.predict_batch(X[test_idx]), y[test_idx])
    if coverage_threshold_dBm is None:
        coverage_threshold_dBm = infer_coverage_threshold(samples)
    return CoverageTraining(CoveragePredictor(model, n_cells, coverage_threshold_dBm), roc, train_idx, test_idx)


def predict_volume_proba(p: TrafficPredictor, key: FlowKey, first_packet: PacketMeta, threshold: int) -> float:
    model = p.model_for(threshold)
    return float(model.predict_batch(p.encoder.encode_row(key, first_packet)[None, :])[0])


def predict_volume_proba_batch(p: TrafficPredictor, flows: Sequence[FlowRecord], threshold: int) -> np.ndarray:
    model = p.model_for(threshold)
    return model.predict_batch(p.encoder.matrix(flows))


def _check_cells(p: CoveragePredictor, n: int) -> None:
    if n != p.n_cells:
        raise SchemaMismatchError(f"predictor trained on {p.n_cells} primary cells, sample has {n}")


def predict_coverage_proba(p: CoveragePredictor, sample: RadioSample) -> float:
    _check_cells(p, len(sample.primary_rsrp))
    return float(p.model.predict_batch(radio_matrix([sample]))[0])


def predict_coverage_proba_batch(p: CoveragePredictor, samples: Sequence[RadioSample]) -> np.ndarray:
    for s in samples:
        _check_cells(p, len(s.primary_rsrp))
    return p.model.predict_batch(radio_matrix(samples))


# -- persistence: model JSON per forest plus a small manifest -----------------

def save_traffic_predictor(p: TrafficPredictor, out_dir: str | Path, extra: dict | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for threshold, model in sorted(p.models.items()):
        name = f"traffic_{threshold_tag(threshold)}.model.json"
        save_model(model, out / name)
        files[str(threshold)] = name
    manifest = {
        "kind": "traffic",
        "schema_id": p.schema_id,
        "top_ports": list(p.encoder.top_ports),
        "thresholds": sorted(p.models),
        "models": files,
        **(extra or {}),
    }
    path = out / "traffic_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_traffic_predictor(manifest_path: str | Path) -> TrafficPredictor:
    path = Path(manifest_path)
    m = json.loads(path.read_text(encoding="utf-8"))
    if m.get("kind") != "traffic":
        raise ValueError(f"{path}: not a traffic predictor manifest")
    encoder = FlowEncoder(tuple(m["top_ports"]))
    if encoder.schema_id != m["schema_id"]:
        raise SchemaMismatchError(f"{path}: port list does not match schema id")
    models = {}
    for threshold, name in m["models"].items():
        model = load_model(path.parent / name)
        if model.schema_id != encoder.schema_id:
            raise SchemaMismatchError(f"{name}: model schema differs from manifest")
        models[int(threshold)] = model
    return TrafficPredictor(encoder, models)


def save_coverage_predictor(p: CoveragePredictor, out_dir: str | Path, extra: dict | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_model(p.model, out / "coverage.model.json")
    manifest = {
        "kind": "coverage",
        "schema_id": p.schema_id,
        "n_cells": p.n_cells,
        "coverage_threshold_dBm": p.coverage_threshold_dBm,
        "model": "coverage.model.json",
        **(extra or {}),
    }
    path = out / "coverage_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_coverage_predictor(manifest_path: str | Path) -> CoveragePredictor:
    path = Path(manifest_path)
    m = json.loads(path.read_text(encoding="utf-8"))
    if m.get("kind") != "coverage":
        raise ValueError(f"{path}: not a coverage predictor manifest")
    model = load_model(path.parent / m["model"])
    if model.schema_id != radio_schema_id(m["n_cells"]):
        raise SchemaMismatchError(f"{path}: model schema differs from manifest")
    return CoveragePredictor(model, int(m["n_cells"]), m["coverage_threshold_dBm"])
