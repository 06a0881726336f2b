"""Image normalization: resize, Shades-of-Gray color constancy, hair hook."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imgcore import check_image


@dataclass(frozen=True)
class GainTriple:
    d_r: float
    d_g: float
    d_b: float

    def as_array(self):
        return np.array([self.d_r, self.d_g, self.d_b])


@dataclass
class PreprocessConfig:
    target_height: int = 300
    target_width: int = 400
    minkowski_p: float = 6.0
    use_color_constancy: bool = True
    hair_removal: str = "identity"


def shades_of_gray_gains(img, p=6.0):
    """Per-channel illuminant gains from Minkowski p-norm channel means.

    The channel estimates are normalized to unit Euclidean length and the
    gain for channel c is 1 / (sqrt(3) * e_c).
    """
    img = check_image(img, channels=3)
    if p < 1:
        raise ValueError("p must be >= 1")
    e = (np.mean(img**p, axis=(0, 1))) ** (1.0 / p)
    if np.any(e == 0):
        raise ValueError("degenerate channel")
    e = e / np.sqrt((e**2).sum())
    d = 1.0 / (np.sqrt(3.0) * e)
    return GainTriple(*d.tolist())


def apply_color_constancy(img, gains):
    """Multiply each channel by its gain and clamp back into [0, 1]."""
    img = check_image(img, channels=3)
    return np.clip(img * gains.as_array(), 0.0, 1.0)


def _bilinear_resize(channel, out_h, out_w):
    in_h, in_w = channel.shape
    if (in_h, in_w) == (out_h, out_w):
        return channel.copy()
    # pixel-center aligned sampling
    ry = (np.arange(out_h) + 0.5) * in_h / out_h - 0.5
    rx = (np.arange(out_w) + 0.5) * in_w / out_w - 0.5
    y0 = np.clip(np.floor(ry).astype(int), 0, in_h - 1)
    x0 = np.clip(np.floor(rx).astype(int), 0, in_w - 1)
    y1 = np.clip(y0 + 1, 0, in_h - 1)
    x1 = np.clip(x0 + 1, 0, in_w - 1)
    wy = np.clip(ry - y0, 0.0, 1.0)[:, None]
    wx = np.clip(rx - x0, 0.0, 1.0)[None, :]
    a = channel[np.ix_(y0, x0)]
    b = channel[np.ix_(y0, x1)]
    c = channel[np.ix_(y1, x0)]
    d = channel[np.ix_(y1, x1)]
    return (a * (1 - wy) * (1 - wx) + b * (1 - wy) * wx + c * wy * (1 - wx) + d * wy * wx)


def resize_bilinear(img, out_h, out_w):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return _bilinear_resize(img, out_h, out_w)
    return np.stack(
        [_bilinear_resize(img[..., c], out_h, out_w) for c in range(img.shape[2])],
        axis=-1,
    )


def resize_nearest_mask(mask, out_h, out_w):
    mask = np.asarray(mask, dtype=bool)
    in_h, in_w = mask.shape
    if (in_h, in_w) == (out_h, out_w):
        return mask.copy()
    ry = np.clip(((np.arange(out_h) + 0.5) * in_h / out_h).astype(int), 0, in_h - 1)
    rx = np.clip(((np.arange(out_w) + 0.5) * in_w / out_w).astype(int), 0, in_w - 1)
    return mask[np.ix_(ry, rx)]


def resize_to_standard(img, cfg):
    return resize_bilinear(img, cfg.target_height, cfg.target_width)


# ---------------------------------------------------------------------------
# hair-removal hook registry

def _identity_hook(img, source_path=None):
    return img


def _passthrough_file_hook(img, source_path=None):
    """Use an externally inpainted sibling file ``<stem>_inpainted.png``."""
    from .io import read_image  # local import: io depends on nothing here

    if source_path is None:
        raise ValueError("passthrough-file hook needs the source image path")
    source_path = Path(source_path)
    sibling = source_path.with_name(source_path.stem + "_inpainted.png")
    if not sibling.exists():
        raise FileNotFoundError(f"no inpainted sibling for {source_path}: {sibling}")
    out = read_image(sibling)
    if out.shape != img.shape:
        out = resize_bilinear(out, img.shape[0], img.shape[1])
    return out


HAIR_HOOKS = {
    "identity": _identity_hook,
    "passthrough-file": _passthrough_file_hook,
}


def register_hair_hook(name, fn):
    HAIR_HOOKS[name] = fn


def hair_removal_hook(img, hook="identity", source_path=None):
    if hook not in HAIR_HOOKS:
        raise KeyError(f"unknown hair-removal hook {hook!r}")
    return HAIR_HOOKS[hook](img, source_path=source_path)


def preprocess_image(img, cfg, source_path=None):
    """Full normalization chain: resize -> color constancy -> hair hook."""
    out = resize_to_standard(img, cfg)
    if cfg.use_color_constancy:
        gains = shades_of_gray_gains(out, cfg.minkowski_p)
        out = apply_color_constancy(out, gains)
    out = hair_removal_hook(out, cfg.hair_removal, source_path=source_path)
    return out
