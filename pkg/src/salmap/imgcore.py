"""Core image types and pixel-level operations shared by the whole pipeline.

Images are numpy arrays: ``(H, W, 3)`` or ``(H, W)`` float64 with every
intensity in [0, 1].  Binary masks are ``(H, W)`` bool arrays.  All
functions here are pure.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage as ndi
from scipy.spatial import ConvexHull, QhullError

# ITU-R 601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])

# sRGB -> XYZ (D65)
_RGB2XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ2RGB = np.linalg.inv(_RGB2XYZ)
_D65 = np.array([0.95047, 1.0, 1.08883])


class DegenerateMaskError(ValueError):
    """Raised when a mask without both foreground and background is used."""


def check_image(img, channels=None):
    img = np.asarray(img, dtype=np.float64)
    if channels == 3 and (img.ndim != 3 or img.shape[2] != 3):
        raise ValueError("expected a 3-channel image")
    if channels == 1 and img.ndim != 2:
        raise ValueError("expected a single-channel image")
    return img


def to_gray(img):
    """ITU-R 601 luma of an RGB image, clamped to [0, 1]."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        raise ValueError("already gray")
    img = check_image(img, channels=3)
    return np.clip(img @ _LUMA, 0.0, 1.0)


def _srgb_linearize(c):
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _srgb_delinearize(c):
    c = np.clip(c, 0.0, None)
    return np.where(c <= 0.0031308, c * 12.92, 1.055 * c ** (1.0 / 2.4) - 0.055)


def _lab_f(t):
    d = 6.0 / 29.0
    return np.where(t > d**3, np.cbrt(t), t / (3 * d**2) + 4.0 / 29.0)


def _lab_finv(t):
    d = 6.0 / 29.0
    return np.where(t > d, t**3, 3 * d**2 * (t - 4.0 / 29.0))


def rgb_to_lab(img):
    """sRGB -> CIE L*a*b* (D65), rescaled so every channel lies in [0, 1].

    L* is divided by 100; a*, b* are mapped affinely from [-128, 127].
    """
    img = check_image(img, channels=3)
    xyz = _srgb_linearize(img) @ _RGB2XYZ.T / _D65
    fx, fy, fz = _lab_f(xyz[..., 0]), _lab_f(xyz[..., 1]), _lab_f(xyz[..., 2])
    L = 116.0 * fy - 16.0
    a = 500.0 * (fx - fy)
    b = 200.0 * (fy - fz)
    return np.stack([L / 100.0, (a + 128.0) / 255.0, (b + 128.0) / 255.0], axis=-1)


def lab_to_rgb(lab):
    """Inverse of :func:`rgb_to_lab` (rescaled Lab back to sRGB)."""
    lab = check_image(lab, channels=3)
    L = lab[..., 0] * 100.0
    a = lab[..., 1] * 255.0 - 128.0
    b = lab[..., 2] * 255.0 - 128.0
    fy = (L + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0
    xyz = np.stack([_lab_finv(fx), _lab_finv(fy), _lab_finv(fz)], axis=-1) * _D65
    rgb = _srgb_delinearize(xyz @ _XYZ2RGB.T)
    return np.clip(rgb, 0.0, 1.0)


def rgb_to_hsv(img):
    """sRGB -> HSV with H, S, V each in [0, 1]."""
    img = check_image(img, channels=3)
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    mx = img.max(axis=-1)
    mn = img.min(axis=-1)
    delta = mx - mn
    safe = np.where(delta == 0, 1.0, delta)
    h = np.zeros_like(mx)
    h = np.where(mx == r, ((g - b) / safe) % 6.0, h)
    h = np.where(mx == g, (b - r) / safe + 2.0, h)
    h = np.where(mx == b, (r - g) / safe + 4.0, h)
    h = np.where(delta == 0, 0.0, h) / 6.0
    s = np.where(mx == 0, 0.0, delta / np.where(mx == 0, 1.0, mx))
    return np.stack([h, s, mx], axis=-1)


def convert_color(img, target):
    if target == "Lab":
        return rgb_to_lab(img)
    if target == "HSV":
        return rgb_to_hsv(img)
    raise ValueError(f"unknown color target {target!r}")


# ---------------------------------------------------------------------------
# binary morphology

def disk(radius):
    """Flat disk structuring element; radius must be >= 1."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    r = int(radius)
    y, x = np.ogrid[-r : r + 1, -r : r + 1]
    return (x * x + y * y) <= r * r


def erode(mask, se):
    return ndi.binary_erosion(mask, structure=se, border_value=0)


def dilate(mask, se):
    return ndi.binary_dilation(mask, structure=se, border_value=0)


def opening(mask, se):
    return dilate(erode(mask, se), se)


def closing(mask, se):
    # the erosion treats the outside as foreground so closing stays extensive
    return ndi.binary_erosion(dilate(mask, se), structure=se, border_value=1)


def fill_holes(mask):
    """Fill background components not connected to the image border."""
    return ndi.binary_fill_holes(mask)


def remove_small(mask, area_px):
    """Drop 8-connected components with area strictly below ``area_px``."""
    lab, n = ndi.label(mask, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return mask.copy()
    areas = np.bincount(lab.ravel())[1:]
    keep = np.flatnonzero(areas >= area_px) + 1
    return np.isin(lab, keep)


def morphology(mask, op, se=None, area_px=None):
    """Dispatch interface over the flat binary morphology operations."""
    mask = np.asarray(mask, dtype=bool)
    if op == "erode":
        return erode(mask, se)
    if op == "dilate":
        return dilate(mask, se)
    if op == "open":
        return opening(mask, se)
    if op == "close":
        return closing(mask, se)
    if op == "fill_holes":
        return fill_holes(mask)
    if op == "remove_small":
        return remove_small(mask, area_px)
    raise ValueError(f"unknown morphology op {op!r}")


def connected_components(mask):
    """8-connected components ordered by raster scan of their first pixel.

    Returns a list of ``(component_id, area, pixels)`` with pixels as an
    (N, 2) array of (row, col) coordinates.
    """
    mask = np.asarray(mask, dtype=bool)
    lab, n = ndi.label(mask, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return []
    flat = lab.ravel()
    first = np.full(n + 1, flat.size, dtype=np.int64)
    idx = np.flatnonzero(flat)
    # first occurrence per label
    np.minimum.at(first, flat[idx], idx)
    order = np.argsort(first[1:], kind="stable")
    out = []
    for new_id, old in enumerate(order):
        rows, cols = np.nonzero(lab == old + 1)
        out.append((new_id, rows.size, np.column_stack([rows, cols])))
    return out


def _pixel_center_hull(points):
    """Convex hull of pixel centers; returns hull vertices or None if degenerate."""
    try:
        hull = ConvexHull(points)
    except QhullError:
        return None
    return hull


def convex_hull_mask(mask):
    """Filled convex hull (over pixel centers) of all true pixels."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("empty input")
    rows, cols = np.nonzero(mask)
    pts = np.column_stack([rows, cols]).astype(np.float64)
    hull = _pixel_center_hull(pts)
    out = np.zeros_like(mask)
    if hull is None:
        # collinear pixels: rasterize the extreme segment
        t = pts @ (pts.max(axis=0) - pts.min(axis=0))
        p0, p1 = pts[np.argmin(t)], pts[np.argmax(t)]
        n = int(max(abs(p1 - p0))) + 1
        rr = np.rint(np.linspace(p0[0], p1[0], n)).astype(int)
        cc = np.rint(np.linspace(p0[1], p1[1], n)).astype(int)
        out[rr, cc] = True
        out |= mask
        return out
    gy, gx = np.mgrid[0 : mask.shape[0], 0 : mask.shape[1]]
    grid = np.column_stack([gy.ravel(), gx.ravel()]).astype(np.float64)
    # inside iff on the non-positive side of every facet
    inside = np.ones(grid.shape[0], dtype=bool)
    for a0, a1, b in hull.equations:
        inside &= grid @ np.array([a0, a1]) + b <= 1e-9
    out = inside.reshape(mask.shape)
    out |= mask
    return out


def signed_distance(mask):
    """Exact Euclidean signed distance field; negative inside the mask."""
    mask = np.asarray(mask, dtype=bool)
    if mask.all() or not mask.any():
        raise DegenerateMaskError("degenerate mask")
    outside = ndi.distance_transform_edt(~mask)
    inside = ndi.distance_transform_edt(mask)
    return outside - inside


# ---------------------------------------------------------------------------
# histograms / entropy

def gray_histogram(channel):
    """256-bin count histogram of a [0, 1] channel (nearest-bin quantization)."""
    q = np.clip(np.rint(np.asarray(channel, dtype=np.float64) * 255.0), 0, 255)
    return np.bincount(q.astype(np.int64).ravel(), minlength=256)


def _entropy_bits(counts):
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def channel_entropy(img):
    """Shannon entropy (bits) of the 256-bin histogram of each channel.

    For RGB input returns entries for R, G, B and gray (in that order);
    for single-channel input just gray.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return {"gray": _entropy_bits(gray_histogram(img))}
    img = check_image(img, channels=3)
    out = {}
    for i, name in enumerate("RGB"):
        out[name] = _entropy_bits(gray_histogram(img[..., i]))
    out["gray"] = _entropy_bits(gray_histogram(to_gray(img)))
    return out
