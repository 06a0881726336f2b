"""Command-line front end: train, segment, eval, synth.

Dataset layout (ISIC convention):
    <root>/images/<stem>.png|jpg
    <root>/masks/<stem>_segmentation.png
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io, modelio
from .evalkit import batch_evaluate, mask_metrics, roc_auc
from .forest import predict as forest_predict
from .preprocess import HAIR_HOOKS, resize_nearest_mask
from .saliency import PipelineConfig, extract_image, paint_level_maps, train_saliency
from .segment import segment_from_saliency
from .synthgen import SynthSpec, generate

IMAGE_EXTS = (".png", ".jpg", ".jpeg")


def _log(msg):
    print(msg, file=sys.stderr)


def _default_jobs():
    try:
        return max(1, int(os.environ.get("SALMAP_JOBS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# dataset indexing

def _mask_path(root, stem):
    return Path(root) / "masks" / f"{stem}_segmentation.png"


def build_dataset_index(root, require_masks):
    """(image path, gt path or None) pairs from the directory layout."""
    root = Path(root)
    img_dir = root / "images" if (root / "images").is_dir() else root
    images = sorted(
        p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_EXTS
    )
    if not images:
        raise FileNotFoundError(f"no images found under {img_dir}")
    pairs, missing = [], []
    for p in images:
        m = _mask_path(root, p.stem)
        if not m.is_file():
            m = p.with_name(p.stem + "_segmentation.png")
        if m.is_file():
            pairs.append((p, m))
        elif require_masks:
            missing.append(p.name)
        else:
            pairs.append((p, None))
    if missing:
        raise FileNotFoundError(
            "missing ground-truth masks for: " + ", ".join(missing)
        )
    return pairs


# ---------------------------------------------------------------------------
# train

def cmd_train(args):
    pairs = build_dataset_index(args.data, require_masks=True)
    if len(pairs) < 2:
        raise ValueError(f"need at least 2 image/mask pairs, got {len(pairs)}")
    if args.hair_hook not in HAIR_HOOKS:
        raise KeyError(f"unknown hair-removal hook {args.hair_hook!r}")
    cfg = PipelineConfig(tree_count=args.trees, seed=args.seed)
    cfg.multiseg.level_count = args.levels
    cfg.preprocess.use_color_constancy = not args.no_color_constancy
    cfg.preprocess.hair_removal = args.hair_hook

    images, gts = [], []
    for img_path, gt_path in pairs:
        try:
            images.append(io.read_image(img_path))
            gts.append(io.read_mask(gt_path))
        except OSError as e:
            raise OSError(f"unreadable input {img_path}: {e}") from e
    model = train_saliency(images, gts, cfg, progress=_log)
    modelio.save_model(args.out, model)
    _log(f"model written to {args.out}")
    _log(f"training residual (mean squared, per pixel): {model.training_residual:.6f}")
    _log("fusion weights: " + " ".join(f"{w:.6f}" for w in model.fusion_weights))
    return 0


# ---------------------------------------------------------------------------
# segment

def _contour(mask):
    from scipy import ndimage as ndi

    m = np.asarray(mask, dtype=bool)
    return m & ~ndi.binary_erosion(m, np.ones((3, 3), dtype=bool))


def _overlay(img, gt, init, final):
    out = np.asarray(img, dtype=np.float64).copy()
    if gt is not None:
        out[_contour(gt)] = (0.0, 1.0, 0.0)
    out[_contour(init)] = (1.0, 0.0, 0.0)
    out[_contour(final)] = (0.0, 0.0, 1.0)
    return out


def _predict_full(model, img, source_path):
    img_p, partition, planes, desc = extract_image(
        img, model.config, source_path=source_path
    )
    scores = forest_predict(model.forest, desc.features)
    maps = paint_level_maps(partition, scores, desc)
    final = np.clip(np.tensordot(model.fusion_weights, maps, axes=1), 0.0, 1.0)
    return img_p, planes, maps, final


def _segment_one(model, img_path, gt_path, out_dir, dump):
    img = io.read_image(img_path)
    img_p, planes, level_maps, saliency = _predict_full(model, img, img_path)
    final, init = segment_from_saliency(saliency, img_p)
    gt = None
    if gt_path is not None:
        gt = resize_nearest_mask(io.read_mask(gt_path), *final.shape)
    stem = Path(img_path).stem
    io.write_saliency(out_dir / f"{stem}_saliency.png", saliency)
    io.write_mask(out_dir / f"{stem}_initial.png", init)
    io.write_mask(out_dir / f"{stem}_final.png", final)
    io.write_rgb(out_dir / f"{stem}_overlay.png", _overlay(img_p, gt, init, final))
    if dump:
        io.write_mask(out_dir / f"{stem}_strip.png", planes.pseudo_background.strip_mask)
        io.write_saliency(out_dir / f"{stem}_circle.png", planes.circle.probability_map)
        for li in range(level_maps.shape[0]):
            io.write_saliency(out_dir / f"{stem}_level{li:02d}.png", level_maps[li])


def cmd_segment(args):
    model = modelio.load_model(args.model)
    in_path = Path(args.inp)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if in_path.is_dir():
        pairs = build_dataset_index(in_path, require_masks=False)
    else:
        root = in_path.parent.parent if in_path.parent.name == "images" else in_path.parent
        m = _mask_path(root, in_path.stem)
        if not m.is_file():
            m = in_path.with_name(in_path.stem + "_segmentation.png")
        pairs = [(in_path, m if m.is_file() else None)]

    failures = []

    def work(pair):
        img_path, gt_path = pair
        try:
            _segment_one(model, img_path, gt_path, out_dir, args.dump_intermediate)
            return None
        except Exception as e:
            return f"{img_path.name}: {e}"

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        for err in pool.map(work, pairs):
            if err:
                failures.append(err)
                _log("FAILED " + err)
    done = len(pairs) - len(failures)
    _log(f"segmented {done}/{len(pairs)} images into {out_dir}")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# eval

def _stem_key(path):
    stem = Path(path).stem
    for suffix in ("_segmentation", "_final", "_mask"):
        if stem.endswith(suffix):
            return stem[: -len(suffix)]
    return stem


def cmd_eval(args):
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    preds = {
        _stem_key(p): p
        for p in sorted(pred_dir.iterdir())
        if p.suffix.lower() == ".png" and not p.stem.endswith(("_saliency", "_overlay"))
    }
    gts = {
        _stem_key(p): p
        for p in sorted(gt_dir.iterdir())
        if p.suffix.lower() == ".png"
    }
    common = sorted(preds.keys() & gts.keys())
    if not common:
        raise ValueError(
            "no matching stems between prediction and ground truth; "
            f"predictions: {sorted(preds)}; ground truth: {sorted(gts)}"
        )
    rows, pairs = [], []
    for stem in common:
        pred = io.read_mask(preds[stem])
        gt = io.read_mask(gts[stem])
        if pred.shape != gt.shape:
            gt = resize_nearest_mask(gt, *pred.shape)
        r = mask_metrics(pred, gt)
        pairs.append((pred, gt))
        rows.append(
            [stem] + [f"{v:.6f}" for v in (r.dsc, r.jsi, r.acc, r.sens, r.spec)]
        )
    mean, _ = batch_evaluate(pairs)
    rows.append(
        ["mean"]
        + [f"{v:.6f}" for v in (mean.dsc, mean.jsi, mean.acc, mean.sens, mean.spec)]
    )
    io.write_csv(args.out, ["stem", "dsc", "jsi", "acc", "sens", "spec"], rows)
    _log(f"evaluated {len(common)} pairs; mean dsc {mean.dsc:.4f}")
    return 0


# ---------------------------------------------------------------------------
# synth

def cmd_synth(args):
    with open(args.spec) as f:
        spec = SynthSpec(**json.load(f))
    out = Path(args.out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    for i, (img, gt) in enumerate(generate(spec)):
        stem = f"synth_{spec.seed:04d}_{i:04d}"
        io.write_rgb(out / "images" / f"{stem}.png", img)
        io.write_mask(out / "masks" / f"{stem}_segmentation.png", gt)
    _log(f"wrote {spec.count} image/mask pairs to {out}")
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog="salmap", description="Saliency-based dermoscopic lesion segmentation."
    )
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a saliency model on an image/mask dataset")
    t.add_argument("--data", required=True, help="dataset root (images/ + masks/)")
    t.add_argument("--out", required=True, help="output model file")
    t.add_argument("--levels", type=int, default=15)
    t.add_argument("--trees", type=int, default=200)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--no-color-constancy", action="store_true")
    t.add_argument("--hair-hook", default="identity", choices=sorted(HAIR_HOOKS))
    t.set_defaults(fn=cmd_train)

    s = sub.add_parser("segment", help="segment images with a trained model")
    s.add_argument("--model", required=True)
    s.add_argument("--in", dest="inp", required=True, help="image file or directory")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--dump-intermediate", action="store_true")
    s.add_argument("--jobs", type=int, default=_default_jobs())
    s.set_defaults(fn=cmd_segment)

    e = sub.add_parser("eval", help="score predicted masks against ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--out", required=True, help="output CSV path")
    e.set_defaults(fn=cmd_eval)

    y = sub.add_parser("synth", help="generate a synthetic dataset")
    y.add_argument("--spec", required=True, help="JSON file of generator settings")
    y.add_argument("--out", required=True, help="output dataset root")
    y.set_defaults(fn=cmd_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, ValueError, KeyError) as e:
        _log(f"error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
