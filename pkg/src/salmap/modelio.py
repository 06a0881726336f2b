"""Model persistence: JSON header + flat little-endian binary node arrays.

File layout:
    bytes 0..7    magic ``SALMAP01``
    bytes 8..15   uint64 little-endian header length L
    bytes 16..16+L  UTF-8 JSON header (format version, config snapshot,
                    forest metadata, per-tree node counts, metadata)
    remainder     binary section, little-endian:
                    fusion weights           float64[level_count]
                    then per tree, in order:
                      feature   int32[nodes]
                      threshold float64[nodes]
                      left      int32[nodes]
                      right     int32[nodes]
                      value     float64[nodes]

The header is human-readable and seekable; all numeric payload lives in
the binary section so a load(save(m)) round trip is bit-identical.
"""

from __future__ import annotations

import dataclasses
import json
import time

import numpy as np

from .forest import ForestModel, RegressionTree
from .io import atomic_write
from .multiseg import MultisegConfig
from .preprocess import PreprocessConfig
from .regionfeat import FeatureConfig
from .saliency import PipelineConfig, SaliencyModel

MAGIC = b"SALMAP01"
FORMAT_VERSION = 1


def _config_dict(cfg):
    return dataclasses.asdict(cfg)


def _config_from_dict(d):
    return PipelineConfig(
        preprocess=PreprocessConfig(**d["preprocess"]),
        multiseg=MultisegConfig(**d["multiseg"]),
        features=FeatureConfig(**d["features"]),
        tree_count=d["tree_count"],
        seed=d["seed"],
        label_positive=d["label_positive"],
        label_negative=d["label_negative"],
    )


def save_model(path, model):
    """Write a SaliencyModel to the versioned model-file format."""
    forest = model.forest
    header = {
        "format_version": FORMAT_VERSION,
        "created_unix": int(time.time()),
        "config": _config_dict(model.config),
        "training_residual": model.training_residual,
        "fusion_weight_count": int(model.fusion_weights.size),
        "forest": {
            "feature_count": forest.feature_count,
            "tree_count": forest.tree_count,
            "seed": forest.seed,
            "label_min": forest.label_min,
            "label_max": forest.label_max,
            "node_counts": [int(t.feature.size) for t in forest.trees],
        },
    }
    head = json.dumps(header, indent=1).encode()
    parts = [MAGIC, np.uint64(len(head)).astype("<u8").tobytes(), head]
    parts.append(np.asarray(model.fusion_weights, dtype="<f8").tobytes())
    for t in forest.trees:
        parts.append(t.feature.astype("<i4").tobytes())
        parts.append(t.threshold.astype("<f8").tobytes())
        parts.append(t.left.astype("<i4").tobytes())
        parts.append(t.right.astype("<i4").tobytes())
        parts.append(t.value.astype("<f8").tobytes())
    atomic_write(path, b"".join(parts))


def load_model(path):
    """Read a model file back into a SaliencyModel."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != MAGIC:
        raise ValueError(f"not a model file: {path}")
    hlen = int(np.frombuffer(blob[8:16], dtype="<u8")[0])
    header = json.loads(blob[16 : 16 + hlen].decode())
    if header["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {header['format_version']}")

    pos = 16 + hlen

    def take(dtype, count):
        nonlocal pos
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=pos)
        pos += arr.nbytes
        return arr

    weights = take("<f8", header["fusion_weight_count"]).astype(np.float64)
    fmeta = header["forest"]
    trees = []
    for nodes in fmeta["node_counts"]:
        feature = take("<i4", nodes).astype(np.int32)
        threshold = take("<f8", nodes).astype(np.float64)
        left = take("<i4", nodes).astype(np.int32)
        right = take("<i4", nodes).astype(np.int32)
        value = take("<f8", nodes).astype(np.float64)
        trees.append(RegressionTree(feature, threshold, left, right, value))
    if pos != len(blob):
        raise ValueError("model file has trailing bytes; file is corrupt")
    forest = ForestModel(
        trees=trees,
        feature_count=fmeta["feature_count"],
        tree_count=fmeta["tree_count"],
        seed=fmeta["seed"],
        label_min=fmeta["label_min"],
        label_max=fmeta["label_max"],
    )
    return SaliencyModel(
        forest=forest,
        fusion_weights=weights,
        config=_config_from_dict(header["config"]),
        training_residual=header["training_residual"],
    )
