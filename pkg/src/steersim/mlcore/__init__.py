"""Decision trees, random forests and feature encoders."""

from ._backend import BACKEND
from .features import (
    FLOW_FEATURE_LENGTH,
    FeatureVector,
    FlowEncoder,
    encode_flow_features,
    encode_radio_features,
    radio_matrix,
    radio_schema_id,
)
from .forest import (
    Dataset,
    ForestModel,
    ForestParams,
    TreeModel,
    gini,
    load_model,
    predict_proba,
    predict_proba_batch,
    save_model,
    train_forest,
    train_tree,
)

__all__ = [
    "BACKEND",
    "Dataset",
    "FLOW_FEATURE_LENGTH",
    "FeatureVector",
    "FlowEncoder",
    "ForestModel",
    "ForestParams",
    "TreeModel",
    "encode_flow_features",
    "encode_radio_features",
    "gini",
    "load_model",
    "predict_proba",
    "predict_proba_batch",
    "radio_matrix",
    "radio_schema_id",
    "save_model",
    "train_forest",
    "train_tree",
]
