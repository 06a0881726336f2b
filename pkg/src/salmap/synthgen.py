"""Deterministic synthetic dermoscopy-like images for desk-scale testing.

Each image is a smooth "skin" field with one darker star-convex lesion
(random Fourier perimeter) whose border fades over a per-image fuzz
width.  Optional artifacts mimic the usual trouble: hair strokes,
circular color-chart arcs, dark corners, a blue-gray distractor blob
(ink/gel-like mark at the lesion's luminance), and a global color cast
(per-channel tint times a strong shared illuminant dimming).  The
ground-truth mask is the exact rasterized lesion (the 0.5 level of the
border fade).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi


@dataclass
class SynthSpec:
    seed: int = 0
    count: int = 1
    height: int = 300
    width: int = 400
    area_fraction: tuple = (0.05, 0.4)
    lesion_contrast: float = 0.35
    border_sigma: tuple = (1.5, 5.0)  # per-image fuzzy-border blur range, px
    hair: bool = True
    chart_arcs: bool = True
    dark_corners: bool = True
    distractor_blob: bool = True
    color_cast: bool = True


def _lesion_mask(rng, h, w, area_range):
    """Star-convex blob via a random Fourier radius profile, rejection-sampled
    into the requested area fraction and kept away from >2 borders."""
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(100):
        cy = rng.uniform(0.3 * h, 0.7 * h)
        cx = rng.uniform(0.3 * w, 0.7 * w)
        base = rng.uniform(0.16, 0.36) * min(h, w)
        n_harm = 5
        amp = rng.uniform(0.0, 0.12, size=n_harm) / (np.arange(n_harm) + 1)
        phase = rng.uniform(0.0, 2 * np.pi, size=n_harm)
        theta = np.arctan2(yy - cy, xx - cx)
        r = base * (
            1.0
            + sum(
                amp[k] * np.cos((k + 1) * theta + phase[k]) for k in range(n_harm)
            )
        )
        dist = np.hypot(yy - cy, xx - cx)
        mask = dist <= r
        frac = mask.mean()
        if not (area_range[0] <= frac <= area_range[1]):
            continue
        borders = sum(
            [mask[0, :].any(), mask[-1, :].any(), mask[:, 0].any(), mask[:, -1].any()]
        )
        if borders > 2:
            continue
        return mask
    # worst case: plain disk of mid-range area
    target = 0.5 * (area_range[0] + area_range[1]) * h * w
    rad = np.sqrt(target / np.pi)
    return np.hypot(yy - h / 2.0, xx - w / 2.0) <= rad


def _distractor_mask(rng, h, w, lesion, max_tries=60):
    """A second star-convex blob disjoint from the (dilated) lesion."""
    yy, xx = np.mgrid[0:h, 0:w]
    keep_out = ndi.binary_dilation(lesion, iterations=12)
    for _ in range(max_tries):
        cy = rng.uniform(0.2 * h, 0.8 * h)
        cx = rng.uniform(0.2 * w, 0.8 * w)
        base = rng.uniform(0.12, 0.22) * min(h, w)
        n_harm = 4
        amp = rng.uniform(0.0, 0.1, size=n_harm) / (np.arange(n_harm) + 1)
        phase = rng.uniform(0.0, 2 * np.pi, size=n_harm)
        theta = np.arctan2(yy - cy, xx - cx)
        r = base * (
            1.0
            + sum(
                amp[k] * np.cos((k + 1) * theta + phase[k]) for k in range(n_harm)
            )
        )
        mask = np.hypot(yy - cy, xx - cx) <= r
        if not (mask & keep_out).any():
            return mask
    return None


def _smooth_noise(rng, h, w, sigma, amplitude):
    return ndi.gaussian_filter(rng.normal(0.0, 1.0, size=(h, w)), sigma) * amplitude


def _hair_mask(rng, h, w):
    mask = np.zeros((h, w), dtype=bool)
    n_hairs = rng.integers(3, 9)
    for _ in range(n_hairs):
        y0, x0 = rng.uniform(0, h), rng.uniform(0, w)
        ang = rng.uniform(0, 2 * np.pi)
        curve = rng.uniform(-0.002, 0.002)
        length = rng.uniform(0.4, 1.2) * min(h, w)
        t = np.linspace(0, length, int(length * 2))
        ys = y0 + t * np.sin(ang) + curve * t**2
        xs = x0 + t * np.cos(ang) + curve * t**2 * 0.5
        ok = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
        ys, xs = ys[ok].astype(int), xs[ok].astype(int)
        for dy in (-1, 0):
            for dx in (-1, 0):
                mask[np.clip(ys + dy, 0, h - 1), np.clip(xs + dx, 0, w - 1)] = True
    return mask


def _draw_chart_arc(rng, img):
    h, w = img.shape[:2]
    # circle centered outside/near a border so only an arc is visible
    side = rng.integers(0, 4)
    rad = rng.uniform(0.15, 0.3) * min(h, w)
    if side == 0:
        cy, cx = rng.uniform(0, 0.1) * h, rng.uniform(0.2, 0.8) * w
    elif side == 1:
        cy, cx = rng.uniform(0.9, 1.0) * h, rng.uniform(0.2, 0.8) * w
    elif side == 2:
        cy, cx = rng.uniform(0.2, 0.8) * h, rng.uniform(0, 0.1) * w
    else:
        cy, cx = rng.uniform(0.2, 0.8) * h, rng.uniform(0.9, 1.0) * w
    yy, xx = np.mgrid[0:h, 0:w]
    d = np.hypot(yy - cy, xx - cx)
    ring = np.abs(d - rad) <= 2.0
    tint = rng.uniform(0.0, 0.3, size=3)
    img[ring] = tint
    return img


def _dark_corners(rng, img):
    h, w = img.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w]
    rad = rng.uniform(0.25, 0.4) * min(h, w)
    for cy, cx in ((0, 0), (0, w - 1), (h - 1, 0), (h - 1, w - 1)):
        d = np.hypot(yy - cy, xx - cx)
        fall = np.clip((rad - d) / (0.25 * rad), 0.0, 1.0)
        img *= (1.0 - 0.9 * fall)[..., None]
    return img


def generate_one(spec, index):
    """One deterministic (image, ground-truth) pair."""
    rng = np.random.default_rng([spec.seed, index])
    h, w = spec.height, spec.width
    gt = _lesion_mask(rng, h, w, spec.area_fraction)

    # per-image skin tone along a pale-to-dark melanin axis: brightness
    # varies a lot (so the observed background does not identify the
    # cast's strength) while the skin hue stays in a narrow band
    t = rng.uniform(0.0, 1.0)
    pale = np.array([0.92, 0.78, 0.68])
    dark = np.array([0.55, 0.42, 0.33])
    skin = pale + t * (dark - pale) + rng.uniform(-0.02, 0.02, size=3)
    # contrasts scale with skin brightness so dark skins do not clip
    tone = (0.299 * skin[0] + 0.587 * skin[1] + 0.114 * skin[2]) / 0.65
    lesion = skin - spec.lesion_contrast * tone * np.array(
        [1.0, 1.1, 0.9]
    ) + rng.uniform(-0.04, 0.04, size=3)
    img = np.empty((h, w, 3))
    tex = _smooth_noise(rng, h, w, 6.0, 0.02)
    lesion_tex = _smooth_noise(rng, h, w, 4.0, 0.03)
    # fuzzy border: the lesion fades over a per-image ramp; the ground
    # truth stays the hard mask (the 0.5 level of the fade)
    bsig = rng.uniform(*spec.border_sigma)
    soft = ndi.gaussian_filter(gt.astype(np.float64), bsig)
    for c in range(3):
        img[..., c] = skin[c] + tex + soft * (lesion[c] - skin[c]) + gt * lesion_tex

    if spec.distractor_blob:
        dm = _distractor_mask(rng, h, w, gt)
        if dm is not None:
            # blue-gray mark (ink/gel-like) at the lesion's luminance:
            # only normalized hue separates it from the true lesion
            drop = tone * np.array([0.42, 0.37, 0.19]) + rng.uniform(
                -0.03, 0.03, size=3
            )
            soft_d = ndi.gaussian_filter(dm.astype(np.float64), bsig)
            for c in range(3):
                img[..., c] -= soft_d * drop[c]
            img += (dm * lesion_tex)[..., None]  # same interior texture

    if spec.chart_arcs and rng.uniform() < 0.7:
        img = _draw_chart_arc(rng, img)
    if spec.hair and rng.uniform() < 0.8:
        hair = _hair_mask(rng, h, w)
        shade = rng.uniform(0.05, 0.25)
        img[hair] = img[hair] * 0.25 + shade * 0.75
    if spec.dark_corners and rng.uniform() < 0.6:
        img = _dark_corners(rng, img)
    if spec.color_cast:
        # per-channel tint on top of a strong shared illuminant dimming;
        # kept <= 1 so no channel clips and the cast stays invertible
        cast = rng.uniform(0.35, 1.65, size=3) * rng.uniform(0.45, 1.0)
        cast = np.minimum(cast, 1.0)
        img = img * cast
    return np.clip(img, 0.0, 1.0), gt


def generate(spec):
    """The full deterministic dataset for a spec."""
    if spec.count < 1:
        raise ValueError("count must be >= 1")
    return [generate_one(spec, i) for i in range(spec.count)]
