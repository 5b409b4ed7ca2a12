"""Versioned JSON model files.

Every file is one JSON object with ``format``, ``version``, ``kind`` and
``n_features`` keys around a kind-specific payload. Floats are written with
``repr`` precision, so save/load is loss-free, and keys are sorted, so equal
models give identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from ..errors import ModelFormatError
from .boost import BoostedEnsemble
from .knn import KnnModel
from .tree import DecisionTree, ForestModel

FORMAT = "fallzone.model"
VERSION = 1


def _tree_to_dict(t: DecisionTree) -> Dict[str, Any]:
    return {
        "feature": t.feature.tolist(), "threshold": t.threshold.tolist(),
        "left": t.left.tolist(), "right": t.right.tolist(), "value": t.value.tolist(),
        "n_features": t.n_features, "n_classes": t.n_classes,
    }


def _tree_from_dict(p: Dict[str, Any]) -> DecisionTree:
    return DecisionTree(
        np.array(p["feature"], dtype=np.int64), np.array(p["threshold"], dtype=np.float64),
        np.array(p["left"], dtype=np.int64), np.array(p["right"], dtype=np.int64),
        np.array(p["value"], dtype=np.int64), int(p["n_features"]), int(p["n_classes"]),
    )


def model_to_dict(model) -> Dict[str, Any]:
    if isinstance(model, KnnModel):
        return {"kind": "knn", "n_features": model.d, "k": model.k, "n_classes": model.n_classes,
                "X": model.X.tolist(), "y": model.y.tolist()}
    if isinstance(model, DecisionTree):
        return {"kind": "tree", **_tree_to_dict(model)}
    if isinstance(model, ForestModel):
        return {"kind": "forest", "n_features": model.n_features, "m": model.feature_subset_size,
                "seed": model.seed, "trees": [_tree_to_dict(t) for t in model.trees]}
    if isinstance(model, BoostedEnsemble):
        return {"kind": "boost", "n_features": model.d, "k": model.k, "n_classes": model.n_classes,
                "X": model.X.tolist(), "y": model.y.tolist(),
                "indices": [i.tolist() for i in model.indices], "alphas": list(model.alphas)}
    raise TypeError(f"cannot serialise {type(model).__name__}")


def model_from_dict(p: Dict[str, Any]):
    try:
        kind = p["kind"]
        if kind == "knn":
            return KnnModel(np.array(p["X"], dtype=np.float64).reshape(-1, p["n_features"]),
                            np.array(p["y"], dtype=np.int64), int(p["k"]), int(p["n_classes"]))
        if kind == "tree":
            return _tree_from_dict(p)
        if kind == "forest":
            return ForestModel(tuple(_tree_from_dict(t) for t in p["trees"]), int(p["m"]), int(p["seed"]))
        if kind == "boost":
            return BoostedEnsemble(
                np.array(p["X"], dtype=np.float64).reshape(-1, p["n_features"]),
                np.array(p["y"], dtype=np.int64), int(p["n_classes"]), int(p["k"]),
                tuple(np.array(i, dtype=np.int64) for i in p["indices"]),
                tuple(float(a) for a in p["alphas"]),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model payload: {exc}") from None
    raise ModelFormatError(f"unknown model kind {kind!r}")


def encode(payload: Dict[str, Any]) -> bytes:
    doc = {"format": FORMAT, "version": VERSION, **payload}
    return (json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n").encode("utf-8")


def decode(data: bytes, kind: Optional[str] = None, n_features: Optional[int] = None) -> Dict[str, Any]:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"not a model file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ModelFormatError("not a fallzone model file")
    if doc.get("version") != VERSION:
        raise ModelFormatError(f"unsupported model version {doc.get('version')!r} (expected {VERSION})")
    if kind is not None and doc.get("kind") != kind:
        raise ModelFormatError(f"expected a {kind!r} model, found {doc.get('kind')!r}")
    if n_features is not None and doc.get("n_features") != n_features:
        raise ModelFormatError(f"model expects {doc.get('n_features')} features, caller has {n_features}")
    return doc


def dumps_model(model) -> bytes:
    return encode(model_to_dict(model))


def loads_model(data: bytes, kind: Optional[str] = None, n_features: Optional[int] = None):
    return model_from_dict(decode(data, kind, n_features))


def save_model(model, path: str | Path) -> None:
    Path(path).write_bytes(dumps_model(model))


def load_model(path: str | Path, kind: Optional[str] = None, n_features: Optional[int] = None):
    return loads_model(Path(path).read_bytes(), kind, n_features)
