"""Model files: JSON with floats as text decimals, stable key order."""

from __future__ import annotations

import json

from .declist import DecisionListModel
from .knn import KnnModel
from .maxent import MaxEntModel
from .svm import PairwiseModel

FORMAT = "tamkit-model"

_CLASSES = {
    "knn": KnnModel,
    "dlist": DecisionListModel,
    "maxent": MaxEntModel,
    "svm": PairwiseModel,
}
_METHODS = {cls: name for name, cls in _CLASSES.items()}


def model_method(model) -> str:
    return _METHODS[type(model)]


def save_model(path, model) -> None:
    document = {
        "format": FORMAT,
        "method": model_method(model),
        "payload": model.to_dict(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(document, fh, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        document = json.load(fh)
    if document.get("format") != FORMAT:
        raise ValueError(f"{path}: not a {FORMAT} file")
    method = document.get("method")
    if method not in _CLASSES:
        raise ValueError(f"{path}: unknown model method {method!r}")
    return _CLASSES[method].from_dict(document["payload"])
