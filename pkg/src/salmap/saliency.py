"""Training and inference of the multi-level saliency model.

Training: label regions against ground truth, fit the forest on all
non-excluded region descriptors, then solve the per-pixel least-squares
fusion weights over the per-level saliency maps of the training set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import forest as forest_mod
from .multiseg import MultisegConfig, build_partition
from .preprocess import PreprocessConfig, preprocess_image
from .regionfeat import FeatureConfig, compute_planes, partition_descriptors

LABEL_POSITIVE = 0.8
LABEL_NEGATIVE = 0.2


@dataclass
class PipelineConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    multiseg: MultisegConfig = field(default_factory=MultisegConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    tree_count: int = 200
    seed: int = 0
    label_positive: float = LABEL_POSITIVE
    label_negative: float = LABEL_NEGATIVE


@dataclass
class SaliencyModel:
    forest: forest_mod.ForestModel
    fusion_weights: np.ndarray  # one weight per segmentation level
    config: PipelineConfig
    training_residual: float = float("nan")


def label_regions(partition, gt, positive=LABEL_POSITIVE, negative=LABEL_NEGATIVE):
    """Per-region {0, 1} labels with exclusion of ambiguous overlaps.

    Returns (labels, included) arrays over all levels stacked in the same
    row order as :func:`partition_descriptors`.
    """
    gt = np.asarray(gt, dtype=bool)
    labels_out, included_out = [], []
    for labels in partition.levels:
        if gt.shape != labels.shape:
            raise ValueError("ground truth size does not match the partition")
        n = int(labels.max()) + 1
        flat = labels.ravel()
        counts = np.bincount(flat, minlength=n).astype(np.float64)
        inter = np.bincount(flat[gt.ravel()], minlength=n).astype(np.float64)
        ratio = inter / counts
        lab = np.where(ratio >= positive, 1.0, 0.0)
        inc = (ratio >= positive) | (ratio <= negative)
        labels_out.append(lab)
        included_out.append(inc)
    return np.concatenate(labels_out), np.concatenate(included_out)


def paint_level_maps(partition, scores, descriptor_set):
    """Per-level saliency maps painted region-wise from predicted scores."""
    maps = []
    for li, labels in enumerate(partition.levels):
        start, stop = descriptor_set.level_slices[li]
        lut = np.clip(scores[start:stop], 0.0, 1.0)
        maps.append(lut[labels])
    return np.stack(maps)


def extract_image(img, cfg, source_path=None, pre=True):
    """Preprocess + partition + descriptors for one image."""
    if pre:
        img = preprocess_image(img, cfg.preprocess, source_path=source_path)
    partition = build_partition(img, cfg.multiseg)
    planes = compute_planes(img, cfg.features)
    desc = partition_descriptors(planes, partition, cfg.features)
    return img, partition, planes, desc


def solve_fusion_weights(normal_matrix, normal_rhs):
    """Minimal-norm least-squares weights from accumulated normal equations."""
    return np.linalg.pinv(normal_matrix) @ normal_rhs


def train_saliency(images, gts, cfg=None, progress=None):
    """Train the full saliency model on (image, ground-truth) pairs."""
    cfg = cfg or PipelineConfig()
    if len(images) < 2:
        raise ValueError("need at least 2 training images")
    if len(images) != len(gts):
        raise ValueError("images and ground-truth lists differ in length")

    extracted = []
    all_feats, all_labels = [], []
    for i, (img, gt) in enumerate(zip(images, gts)):
        if progress:
            progress(f"features {i + 1}/{len(images)}")
        img_p, partition, planes, desc = extract_image(img, cfg)
        gt_p = np.asarray(gt, dtype=bool)
        if gt_p.shape != img_p.shape[:2]:
            from .preprocess import resize_nearest_mask

            gt_p = resize_nearest_mask(gt_p, img_p.shape[0], img_p.shape[1])
        labels, included = label_regions(
            partition, gt_p, cfg.label_positive, cfg.label_negative
        )
        extracted.append((partition, desc, gt_p))
        all_feats.append(desc.features[included])
        all_labels.append(labels[included])

    x = np.concatenate(all_feats, axis=0)
    y = np.concatenate(all_labels)
    if x.shape[0] == 0:
        raise ValueError("no valid labeled regions in the training set")
    if progress:
        progress(f"training forest on {x.shape[0]} regions")
    model = forest_mod.train_forest(x, y, cfg.tree_count, cfg.seed)

    # least-squares fusion over all training pixels, via normal equations
    level_count = cfg.multiseg.level_count
    a = np.zeros((level_count, level_count))
    b = np.zeros(level_count)
    sq = 0.0
    npix = 0
    for i, (partition, desc, gt_p) in enumerate(extracted):
        if progress:
            progress(f"level maps {i + 1}/{len(extracted)}")
        scores = forest_mod.predict(model, desc.features)
        maps = paint_level_maps(partition, scores, desc)
        s = maps.reshape(level_count, -1)
        g = gt_p.ravel().astype(np.float64)
        a += s @ s.T
        b += s @ g
        sq += float(g @ g)
        npix += g.size
    w = solve_fusion_weights(a, b)
    residual = (sq - 2.0 * w @ b + w @ a @ w) / npix
    return SaliencyModel(model, w, cfg, training_residual=float(max(residual, 0.0)))


def predict_saliency(model, img, pre=True, source_path=None):
    """Final fused saliency map plus the per-level maps for one image."""
    img_p, partition, planes, desc = extract_image(
        img, model.config, source_path=source_path, pre=pre
    )
    scores = forest_mod.predict(model.forest, desc.features)
    maps = paint_level_maps(partition, scores, desc)
    w = model.fusion_weights
    if maps.shape[0] != w.size:
        raise ValueError("model weight count does not match partition levels")
    final = np.clip(np.tensordot(w, maps, axes=1), 0.0, 1.0)
    return final, maps
