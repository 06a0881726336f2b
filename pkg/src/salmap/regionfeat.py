"""Regional descriptors: contrast (29) + property (58) + background (29).

The per-image planes (color spaces, filter responses, LBP codes, circle
probability, pseudo-background strip) are computed once and shared by all
segmentation levels; per-region statistics are then reduced with
``np.bincount`` over the level's label map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import ndimage as ndi
from scipy.signal import find_peaks
from . import filterbank, imgcore
from .multiseg import region_adjacency

CONTRAST_DIM = 29
PROPERTY_DIM = 58
BACKGROUND_DIM = 29
DESCRIPTOR_DIM = CONTRAST_DIM + PROPERTY_DIM + BACKGROUND_DIM


@dataclass
class FeatureConfig:
    # circle detection
    circle_rho: float = 0.5
    circle_min_radius: int = 5
    circle_annulus_width: float = 5.0
    circle_arc_disk_radius: int = 10
    circle_smooth_sigma: float = 3.0
    circle_exact: bool = False
    circle_cost_limit: float = 1e8
    circle_downsample: int = 4
    # pseudo-background
    hist_smooth_window: int = 11
    peak_prominence_frac: float = 0.005
    background_threshold_factor: float = 0.9
    background_min_object_px: int = 500
    background_close_radius: int = 5
    strip_width: int = 15
    # histogram quantization for chi-square features
    lab_bins_per_axis: int = 8
    hue_bins: int = 32
    sat_bins: int = 32


# ---------------------------------------------------------------------------
# Eq.-style feature difference

def feature_diff(v_r, v_n, is_histogram):
    """Chi-square scalar for histogram features, |elementwise| otherwise."""
    v_r = np.asarray(v_r, dtype=np.float64)
    v_n = np.asarray(v_n, dtype=np.float64)
    if v_r.shape != v_n.shape:
        raise ValueError("feature vectors differ in length")
    if is_histogram:
        denom = v_r + v_n
        keep = denom > 0
        num = (v_r - v_n) ** 2
        return float((2.0 * num[keep] / denom[keep]).sum())
    return np.abs(v_r - v_n)


def _chi_square_rows(a, b):
    """Row-wise chi-square between matrices of (normalized) histograms."""
    denom = a + b
    num = 2.0 * (a - b) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), 0.0)
    return terms.sum(axis=1)


# ---------------------------------------------------------------------------
# shape statistics

def elongation_from_moments(area, sx, sy, sxx, syy, sxy):
    mx, my = sx / area, sy / area
    # 1/12 term: second moment of a unit pixel about its own center
    u20 = sxx / area - mx * mx + 1.0 / 12.0
    u02 = syy / area - my * my + 1.0 / 12.0
    u11 = sxy / area - mx * my
    spread = np.sqrt((u20 - u02) ** 2 + 4.0 * u11 * u11)
    l1 = 0.5 * (u20 + u02 + spread)
    l2 = 0.5 * (u20 + u02 - spread)
    l1 = np.maximum(l1, 1e-12)
    ratio = np.sqrt(np.clip(l2, 0.0, None) / l1)
    return 1.0 - ratio


def elongation(pixels):
    """1 - minor/major axis ratio of the moment-matched ellipse.

    ``pixels`` is an (N, 2) array of (row, col) coordinates, N >= 2.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.shape[0] < 2:
        raise ValueError("need at least 2 pixels")
    y, x = pixels[:, 0], pixels[:, 1]
    return float(
        elongation_from_moments(
            len(x), x.sum(), y.sum(), (x * x).sum(), (y * y).sum(), (x * y).sum()
        )
    )


@njit(cache=True)
def _hull_rect_area(ys, xs):
    """Min-area rotated rectangle over a point set (monotone chain + calipers)."""
    n = ys.size
    key = xs * 1048576.0 + ys
    order = np.argsort(key)
    px = xs[order]
    py = ys[order]
    hx = np.empty(2 * n + 1)
    hy = np.empty(2 * n + 1)
    k = 0
    for i in range(n):
        while k >= 2 and (hx[k - 1] - hx[k - 2]) * (py[i] - hy[k - 2]) - (
            hy[k - 1] - hy[k - 2]
        ) * (px[i] - hx[k - 2]) <= 0:
            k -= 1
        hx[k] = px[i]
        hy[k] = py[i]
        k += 1
    lower = k + 1
    for i in range(n - 2, -1, -1):
        while k >= lower and (hx[k - 1] - hx[k - 2]) * (py[i] - hy[k - 2]) - (
            hy[k - 1] - hy[k - 2]
        ) * (px[i] - hx[k - 2]) <= 0:
            k -= 1
        hx[k] = px[i]
        hy[k] = py[i]
        k += 1
    m = k - 1  # closed hull; last point equals the first
    if m < 3:
        return 0.0
    best = np.inf
    for i in range(m):
        ex = hx[i + 1] - hx[i]
        ey = hy[i + 1] - hy[i]
        ln = np.sqrt(ex * ex + ey * ey)
        if ln == 0.0:
            continue
        ex /= ln
        ey /= ln
        umin = np.inf
        umax = -np.inf
        wmin = np.inf
        wmax = -np.inf
        for j in range(m):
            u = hx[j] * ex + hy[j] * ey
            v = -hx[j] * ey + hy[j] * ex
            if u < umin:
                umin = u
            if u > umax:
                umax = u
            if v < wmin:
                wmin = v
            if v > wmax:
                wmax = v
        area = (umax - umin) * (wmax - wmin)
        if area < best:
            best = area
    return best


@njit(cache=True)
def _corner_rect_area(rows, cols):
    m = rows.size
    ys = np.empty(4 * m)
    xs = np.empty(4 * m)
    t = 0
    for i in range(m):
        for dy in (-0.5, 0.5):
            for dx in (-0.5, 0.5):
                ys[t] = rows[i] + dy
                xs[t] = cols[i] + dx
                t += 1
    return _hull_rect_area(ys, xs)


@njit(cache=True)
def _batch_min_rect(rows, cols, starts):
    nreg = starts.size - 1
    out = np.zeros(nreg)
    for r in range(nreg):
        lo, hi = starts[r], starts[r + 1]
        if hi > lo:
            out[r] = _corner_rect_area(rows[lo:hi], cols[lo:hi])
    return out


def min_area_rect_area(pixels):
    """Area of the minimum-area rotated rectangle over pixel corners.

    Rotating calipers over the convex hull of the 4 corner points of each
    pixel; degenerate (sub-pixel) regions return 0.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    return float(_corner_rect_area(pixels[:, 0].copy(), pixels[:, 1].copy()))


def extent(pixels):
    """Region area divided by its minimum-area rotated bounding-box area."""
    pixels = np.asarray(pixels)
    area = float(pixels.shape[0])
    if area < 1:
        raise ValueError("empty region")
    box = min_area_rect_area(pixels)
    if box <= 0:
        return 1.0
    return min(area / box, 1.0)


# ---------------------------------------------------------------------------
# circle detection (distance-histogram voting)

@dataclass
class CircleMaps:
    center_map: np.ndarray  # per-pixel max vote count
    radius_map: np.ndarray  # per-pixel argmax distance bin
    probability_map: np.ndarray  # [0, 1]
    centers: list  # (row, col, radius) of detected circles


def _otsu_threshold(values):
    hist = imgcore.gray_histogram(values / max(values.max(), 1e-12))
    total = hist.sum()
    if total == 0:
        return 0.0
    bins = np.arange(256) / 255.0
    w0 = np.cumsum(hist)
    w1 = total - w0
    m0 = np.cumsum(hist * bins)
    mt = m0[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        between = np.where(
            (w0 > 0) & (w1 > 0), (mt * w0 - m0 * total) ** 2 / (w0 * w1), 0.0
        )
    k = int(np.argmax(between))
    return bins[k] * max(values.max(), 1e-12)


@njit(cache=True)
def _vote_maps(cand_rows, cand_cols, edge_rows, edge_cols, n_bins):
    n = cand_rows.size
    e = edge_rows.size
    center = np.zeros(n, dtype=np.int64)
    radius = np.zeros(n, dtype=np.int64)
    hist = np.zeros(n_bins, dtype=np.int64)
    for i in range(n):
        hist[:] = 0
        cy = cand_rows[i]
        cx = cand_cols[i]
        for j in range(e):
            dy = cy - edge_rows[j]
            dx = cx - edge_cols[j]
            d = int(np.sqrt(dy * dy + dx * dx) + 0.5)
            hist[d] += 1
        best = 0
        best_d = 0
        for d in range(n_bins):
            if hist[d] > best:
                best = hist[d]
                best_d = d
        center[i] = best
        radius[i] = best_d
    return center, radius


def detect_circles(img, cfg=None):
    """Distance-histogram circle voting on the Otsu-thresholded edge map."""
    cfg = cfg or FeatureConfig()
    img = np.asarray(img, dtype=np.float64)
    gray = imgcore.to_gray(img) if img.ndim == 3 else img
    h, w = gray.shape
    mag = filterbank.prewitt_magnitude(gray)
    if mag.max() <= 1e-9:  # flat image up to float rounding
        zero = np.zeros((h, w))
        return CircleMaps(zero.copy(), zero.copy(), zero.copy(), [])
    edge = mag > _otsu_threshold(mag)
    ey, ex = np.nonzero(edge)
    if ey.size == 0:
        zero = np.zeros((h, w))
        return CircleMaps(zero.copy(), zero.copy(), zero.copy(), [])

    stride = 1
    if not cfg.circle_exact and h * w * ey.size > cfg.circle_cost_limit:
        stride = cfg.circle_downsample
    gy, gx = np.mgrid[0:h:stride, 0:w:stride]
    n_bins = int(np.ceil(np.hypot(h, w))) + 2
    votes, radii = _vote_maps(
        gy.ravel().astype(np.float64),
        gx.ravel().astype(np.float64),
        ey.astype(np.float64),
        ex.astype(np.float64),
        n_bins,
    )
    center_small = votes.reshape(gy.shape).astype(np.float64)
    radius_small = radii.reshape(gy.shape).astype(np.float64)
    if stride > 1:
        center_map = np.repeat(np.repeat(center_small, stride, 0), stride, 1)[:h, :w]
        radius_map = np.repeat(np.repeat(radius_small, stride, 0), stride, 1)[:h, :w]
    else:
        center_map = center_small
        radius_map = radius_small

    passing = (center_map >= cfg.circle_rho * 2.0 * np.pi * radius_map) & (
        radius_map >= cfg.circle_min_radius
    )
    local_max = center_map >= ndi.maximum_filter(center_map, size=3)
    cy, cx = np.nonzero(passing & local_max)
    centers = [(int(r), int(c), float(radius_map[r, c])) for r, c in zip(cy, cx)]

    prob = np.zeros((h, w))
    if centers:
        iy, ix = np.mgrid[0:h, 0:w]
        half = cfg.circle_annulus_width / 2.0
        arc = np.zeros((h, w), dtype=bool)
        for r0, c0, rad in centers:
            d = np.hypot(iy - r0, ix - c0)
            prob[np.abs(d - rad) <= half] = 1.0
            de = np.hypot(ey - r0, ex - c0)
            on = np.abs(de - rad) <= half
            arc[ey[on], ex[on]] = True
        if arc.any():
            arc = ndi.binary_dilation(arc, imgcore.disk(cfg.circle_arc_disk_radius))
            prob[arc] = 1.0
        prob = np.clip(ndi.gaussian_filter(prob, cfg.circle_smooth_sigma), 0.0, 1.0)
    return CircleMaps(center_map, radius_map, prob, centers)


def circle_probability(pixels_or_mask, maps):
    """Mean of the circle probability map over the region's pixels."""
    prob = maps.probability_map
    if isinstance(pixels_or_mask, np.ndarray) and pixels_or_mask.dtype == bool:
        sel = prob[pixels_or_mask]
    else:
        p = np.asarray(pixels_or_mask)
        sel = prob[p[:, 0], p[:, 1]]
    if sel.size == 0:
        return 0.0
    return float(sel.mean())


# ---------------------------------------------------------------------------
# pseudo-background

@dataclass
class PseudoBackground:
    strip_mask: np.ndarray
    background_mask: np.ndarray
    background_threshold: float
    used_fallback: bool = False


def _border_strip(shape, width):
    out = np.zeros(shape, dtype=bool)
    out[:width, :] = True
    out[-width:, :] = True
    out[:, :width] = True
    out[:, -width:] = True
    return out


def extract_pseudo_background(img, cfg=None):
    """Healthy-skin strip from the last peak of the smoothed gray histogram.

    Threshold = factor x (last-peak intensity); the thresholded object is
    cleaned up morphologically and the strip is the object minus its
    erosion by a disk of the strip width.  Falls back to a plain border
    strip when thresholding finds nothing.
    """
    cfg = cfg or FeatureConfig()
    img = np.asarray(img, dtype=np.float64)
    gray = imgcore.to_gray(img) if img.ndim == 3 else img
    hist = imgcore.gray_histogram(gray).astype(np.float64)
    win = cfg.hist_smooth_window
    kernel = np.ones(win) / win
    smooth = np.convolve(hist, kernel, mode="same")
    padded = np.r_[0.0, smooth, 0.0]
    peaks, _ = find_peaks(padded, prominence=cfg.peak_prominence_frac * hist.sum())
    if peaks.size:
        peak_bin = int(peaks[-1]) - 1
    else:
        peak_bin = int(np.argmax(smooth))
    threshold = cfg.background_threshold_factor * (peak_bin / 255.0)

    candidate = gray >= threshold
    if not candidate.any():
        strip = _border_strip(gray.shape, cfg.strip_width)
        return PseudoBackground(strip, strip.copy(), threshold, used_fallback=True)
    bg = imgcore.fill_holes(candidate)
    bg = imgcore.remove_small(bg, cfg.background_min_object_px)
    bg = imgcore.closing(bg, imgcore.disk(cfg.background_close_radius))
    if not bg.any():
        strip = _border_strip(gray.shape, cfg.strip_width)
        return PseudoBackground(strip, strip.copy(), threshold, used_fallback=True)
    strip = bg & ~imgcore.erode(bg, imgcore.disk(cfg.strip_width))
    if not strip.any():
        strip = _border_strip(gray.shape, cfg.strip_width)
        return PseudoBackground(strip, bg, threshold, used_fallback=True)
    return PseudoBackground(strip, bg, threshold)


# ---------------------------------------------------------------------------
# per-image plane stack

@dataclass
class ImagePlanes:
    height: int
    width: int
    color: np.ndarray  # (H, W, 9): R,G,B,L,a,b,H,S,V
    gray: np.ndarray
    lm_raw: np.ndarray  # (15, H, W)
    lm_abs: np.ndarray  # (15, H, W)
    lm_max: np.ndarray  # (H, W) per-pixel max over |LM|
    laws_abs: np.ndarray  # (14, H, W)
    lbp: np.ndarray  # (H, W) int codes
    lab_bin: np.ndarray  # (H, W) joint Lab histogram bin index
    hue_bin: np.ndarray
    sat_bin: np.ndarray
    circle: CircleMaps
    pseudo_background: PseudoBackground
    n_lab_bins: int
    n_hue_bins: int
    n_sat_bins: int


_BANKS = {}


def _banks():
    if not _BANKS:
        _BANKS["lm"] = filterbank.make_lm15()
        _BANKS["laws"] = filterbank.make_laws14()
    return _BANKS


def compute_planes(img, cfg=None):
    cfg = cfg or FeatureConfig()
    img = imgcore.check_image(img, channels=3)
    h, w = img.shape[:2]
    lab = imgcore.rgb_to_lab(img)
    hsv = imgcore.rgb_to_hsv(img)
    gray = imgcore.to_gray(img)
    color = np.concatenate([img, lab, hsv], axis=-1)

    banks = _banks()
    lm = np.stack(filterbank.filter_response(gray, banks["lm"]))
    laws = np.stack(filterbank.filter_response(gray, banks["laws"]))
    lm_abs = np.abs(lm)
    lbp = filterbank.lbp_codes(gray)

    nb = cfg.lab_bins_per_axis
    lab_q = np.clip((lab * nb).astype(np.int64), 0, nb - 1)
    lab_bin = (lab_q[..., 0] * nb + lab_q[..., 1]) * nb + lab_q[..., 2]
    hue_bin = np.clip((hsv[..., 0] * cfg.hue_bins).astype(np.int64), 0, cfg.hue_bins - 1)
    sat_bin = np.clip((hsv[..., 1] * cfg.sat_bins).astype(np.int64), 0, cfg.sat_bins - 1)

    return ImagePlanes(
        height=h,
        width=w,
        color=color,
        gray=gray,
        lm_raw=lm,
        lm_abs=lm_abs,
        lm_max=lm_abs.max(axis=0),
        laws_abs=np.abs(laws),
        lbp=lbp,
        lab_bin=lab_bin,
        hue_bin=hue_bin,
        sat_bin=sat_bin,
        circle=detect_circles(img, cfg),
        pseudo_background=extract_pseudo_background(img, cfg),
        n_lab_bins=nb**3,
        n_hue_bins=cfg.hue_bins,
        n_sat_bins=cfg.sat_bins,
    )


# ---------------------------------------------------------------------------
# descriptor assembly

@dataclass
class DescriptorSet:
    features: np.ndarray  # (R_total, 116)
    level_index: np.ndarray  # (R_total,)
    region_id: np.ndarray  # (R_total,)
    level_slices: list  # per level: (start, stop) into the rows
    degenerate: np.ndarray  # True where the contrast block is a flagged zero


def _region_sums(flat, weights, n):
    return np.bincount(flat, weights=weights, minlength=n)


def _region_hist(flat, bins, n, n_bins):
    h = np.bincount(flat * n_bins + bins, minlength=n * n_bins)
    return h.reshape(n, n_bins).astype(np.float64)


def _normalize_rows(h):
    s = h.sum(axis=1, keepdims=True)
    return h / np.where(s > 0, s, 1.0)


def _strip_stats(planes):
    strip = planes.pseudo_background.strip_mask
    sel = strip.ravel()
    color = planes.color.reshape(-1, 9)[sel]
    means = color.mean(axis=0)
    lm_means = planes.lm_abs.reshape(15, -1)[:, sel].mean(axis=1)
    lm_max_mean = planes.lm_max.ravel()[sel].mean()
    hists = {
        "lab": np.bincount(planes.lab_bin.ravel()[sel], minlength=planes.n_lab_bins),
        "hue": np.bincount(planes.hue_bin.ravel()[sel], minlength=planes.n_hue_bins),
        "sat": np.bincount(planes.sat_bin.ravel()[sel], minlength=planes.n_sat_bins),
        "lbp": np.bincount(planes.lbp.ravel()[sel], minlength=256),
    }
    hists = {k: v / v.sum() for k, v in hists.items()}
    return means, lm_means, float(lm_max_mean), hists


def _appearance_block(r_means, r_lm, r_lm_max, r_hists, n_means, n_lm, n_lm_max, n_hists):
    """The 29-dim Table-style block: mean diffs + histogram chi-squares."""
    cols = [
        np.abs(r_means - n_means),  # 9
        np.abs(r_lm - n_lm),  # 15
        np.abs(r_lm_max - n_lm_max)[:, None],  # 1
        _chi_square_rows(r_hists["lab"], n_hists["lab"])[:, None],
        _chi_square_rows(r_hists["hue"], n_hists["hue"])[:, None],
        _chi_square_rows(r_hists["sat"], n_hists["sat"])[:, None],
        _chi_square_rows(r_hists["lbp"], n_hists["lbp"])[:, None],
    ]
    return np.concatenate(cols, axis=1)


def _percentile_from_hist(hist, counts, q):
    """Exact q-th percentile (inverted CDF) of integer coordinates."""
    cum = np.cumsum(hist, axis=1)
    target = q * counts[:, None]
    return (cum < target).sum(axis=1).astype(np.float64)


def _base_sums(planes, labels, n):
    """All additive per-region sums of one label map.

    Every entry is additive under region merging, so coarser levels can be
    produced by folding rows through the hierarchy's parent maps.
    """
    h, w = labels.shape
    flat = labels.ravel()
    color = planes.color.reshape(-1, 9)
    lm_abs = planes.lm_abs.reshape(15, -1)
    lm_raw = planes.lm_raw.reshape(15, -1)
    laws = planes.laws_abs.reshape(14, -1)
    lbp_f = planes.lbp.ravel().astype(np.float64)
    rows_g = np.repeat(np.arange(h, dtype=np.float64), w)
    cols_g = np.tile(np.arange(w, dtype=np.float64), h)
    return {
        "counts": np.bincount(flat, minlength=n).astype(np.float64),
        "c_sum": np.stack([_region_sums(flat, color[:, i], n) for i in range(9)], 1),
        "c_sq": np.stack([_region_sums(flat, color[:, i] ** 2, n) for i in range(9)], 1),
        "lm_abs_sum": np.stack([_region_sums(flat, lm_abs[i], n) for i in range(15)], 1),
        "lm_sum": np.stack([_region_sums(flat, lm_raw[i], n) for i in range(15)], 1),
        "lm_sq": np.stack([_region_sums(flat, lm_raw[i] ** 2, n) for i in range(15)], 1),
        "lm_max_sum": _region_sums(flat, planes.lm_max.ravel(), n),
        "laws_sum": np.stack([_region_sums(flat, laws[i], n) for i in range(14)], 1),
        "lbp_sum": _region_sums(flat, lbp_f, n),
        "lbp_sq": _region_sums(flat, lbp_f**2, n),
        "hist_lab": _region_hist(flat, planes.lab_bin.ravel(), n, planes.n_lab_bins),
        "hist_hue": _region_hist(flat, planes.hue_bin.ravel(), n, planes.n_hue_bins),
        "hist_sat": _region_hist(flat, planes.sat_bin.ravel(), n, planes.n_sat_bins),
        "hist_lbp": _region_hist(flat, planes.lbp.ravel(), n, 256),
        "sy": _region_sums(flat, rows_g, n),
        "sx": _region_sums(flat, cols_g, n),
        "syy": _region_sums(flat, rows_g**2, n),
        "sxx": _region_sums(flat, cols_g**2, n),
        "sxy": _region_sums(flat, rows_g * cols_g, n),
        "row_hist": _region_hist(flat, rows_g.astype(np.int64), n, h),
        "col_hist": _region_hist(flat, cols_g.astype(np.int64), n, w),
        "circ_sum": _region_sums(flat, planes.circle.probability_map.ravel(), n),
    }


def _fold_sums(sums, pmap, n_new):
    out = {}
    for k, v in sums.items():
        if v.ndim == 1:
            out[k] = np.bincount(pmap, weights=v, minlength=n_new)
        else:
            acc = np.zeros((n_new, v.shape[1]))
            np.add.at(acc, pmap, v)
            out[k] = acc
    return out


def _features_from_sums(planes, labels, sums, level_index, level_count, cfg):
    """Descriptor rows for one level from its additive sums plus the label
    map (adjacency, boundaries and bounding boxes are level-local)."""
    h, w = labels.shape
    flat = labels.ravel()
    n = sums["counts"].size
    counts = sums["counts"]
    area_img = float(h * w)

    c_sum = sums["c_sum"]
    c_mean = c_sum / counts[:, None]
    c_var = sums["c_sq"] / counts[:, None] - c_mean**2

    lm_abs_mean = sums["lm_abs_sum"] / counts[:, None]
    lm_var = sums["lm_sq"] / counts[:, None] - (sums["lm_sum"] / counts[:, None]) ** 2
    lm_max_mean = sums["lm_max_sum"] / counts
    laws_mean = sums["laws_sum"] / counts[:, None]
    lbp_mean = sums["lbp_sum"] / counts
    lbp_var = sums["lbp_sq"] / counts - lbp_mean**2

    hists = {
        "lab": sums["hist_lab"],
        "hue": sums["hist_hue"],
        "sat": sums["hist_sat"],
        "lbp": sums["hist_lbp"],
    }
    hists_norm = {k: _normalize_rows(v) for k, v in hists.items()}

    # ---- contrast block (vs union of adjacent regions)
    pairs = region_adjacency(labels)
    adj = np.zeros((n, n), dtype=np.float64)
    if pairs.size:
        adj[pairs[:, 0], pairs[:, 1]] = 1.0
        adj[pairs[:, 1], pairs[:, 0]] = 1.0
    nb_counts = adj @ counts
    degenerate = nb_counts == 0
    safe_counts = np.where(nb_counts > 0, nb_counts, 1.0)
    nb_mean = (adj @ c_sum) / safe_counts[:, None]
    nb_lm = (adj @ (lm_abs_mean * counts[:, None])) / safe_counts[:, None]
    nb_lm_max = (adj @ (lm_max_mean * counts)) / safe_counts
    nb_hists = {k: _normalize_rows(adj @ v) for k, v in hists.items()}
    contrast = _appearance_block(
        c_mean, lm_abs_mean, lm_max_mean, hists_norm, nb_mean, nb_lm, nb_lm_max, nb_hists
    )
    contrast[degenerate] = 0.0

    # ---- background block (vs pseudo-background strip)
    s_means, s_lm, s_lm_max, s_hists = _strip_stats(planes)
    background = _appearance_block(
        c_mean,
        lm_abs_mean,
        lm_max_mean,
        hists_norm,
        np.broadcast_to(s_means, (n, 9)),
        np.broadcast_to(s_lm, (n, 15)),
        np.full(n, s_lm_max),
        {k: np.broadcast_to(v, (n, v.size)) for k, v in s_hists.items()},
    )

    # ---- property block
    sy, sx = sums["sy"], sums["sx"]
    syy, sxx, sxy = sums["syy"], sums["sxx"], sums["sxy"]
    mean_x = sx / counts / w
    mean_y = sy / counts / h

    x10 = _percentile_from_hist(sums["col_hist"], counts, 0.1) / w
    x90 = _percentile_from_hist(sums["col_hist"], counts, 0.9) / w
    y10 = _percentile_from_hist(sums["row_hist"], counts, 0.1) / h
    y90 = _percentile_from_hist(sums["row_hist"], counts, 0.9) / h

    # boundary pixels: any 4-neighbor differs or at the image border
    bnd = np.zeros((h, w), dtype=bool)
    bnd[0, :] = bnd[-1, :] = bnd[:, 0] = bnd[:, -1] = True
    bnd[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    bnd[:, 1:] |= labels[:, :-1] != labels[:, 1:]
    bnd[:-1, :] |= labels[:-1, :] != labels[1:, :]
    bnd[1:, :] |= labels[:-1, :] != labels[1:, :]
    perim = np.bincount(flat[bnd.ravel()], minlength=n).astype(np.float64)
    norm_perim = perim / (2.0 * (h + w))

    objects = ndi.find_objects(labels + 1)
    aspect = np.ones(n)
    for rid, sl in enumerate(objects):
        if sl is None:
            continue
        bh = sl[0].stop - sl[0].start
        bw = sl[1].stop - sl[1].start
        aspect[rid] = bw / bh

    elong = elongation_from_moments(counts, sx, sy, sxx, syy, sxy)

    # extent needs per-region boundary point sets
    b_idx = np.flatnonzero(bnd.ravel())
    b_lab = flat[b_idx]
    order = np.argsort(b_lab, kind="stable")
    b_idx = b_idx[order]
    starts = np.searchsorted(b_lab[order], np.arange(n + 1))
    box = _batch_min_rect(
        (b_idx // w).astype(np.float64), (b_idx % w).astype(np.float64), starts
    )
    ext = np.where(box > 0, np.minimum(counts / np.where(box > 0, box, 1.0), 1.0), 1.0)

    circ = sums["circ_sum"] / counts
    nb_area = (adj @ counts) / area_img
    level_feat = np.full(
        n, level_index / (level_count - 1) if level_count > 1 else 0.0
    )

    prop = np.concatenate(
        [
            mean_x[:, None],
            mean_y[:, None],
            x10[:, None],
            x90[:, None],
            y10[:, None],
            y90[:, None],
            (counts / area_img)[:, None],
            norm_perim[:, None],
            nb_area[:, None],
            aspect[:, None],
            c_var,  # 9 color variances
            lm_var,  # 15
            lbp_var[:, None],
            c_mean[:, 0:3],  # mean RGB
            c_mean[:, 4:6],  # mean a*, b*
            elong[:, None],
            ext[:, None],
            circ[:, None],
            laws_mean,  # 14
            level_feat[:, None],
        ],
        axis=1,
    )

    feats = np.concatenate([contrast, prop, background], axis=1)
    assert feats.shape[1] == DESCRIPTOR_DIM
    return feats, degenerate


def level_descriptors(planes, labels, level_index, level_count, cfg=None):
    """Full descriptor rows for every region of one segmentation level.

    Returns (features (R, 116), degenerate flags (R,)).
    """
    cfg = cfg or FeatureConfig()
    n = int(labels.max()) + 1
    sums = _base_sums(planes, labels, n)
    return _features_from_sums(planes, labels, sums, level_index, level_count, cfg)


def partition_descriptors(planes, partition, cfg=None):
    """Descriptor matrix for every region at every level of a partition.

    Per-region sums are computed once at the finest level and folded up
    the merge hierarchy instead of re-scanned per level.
    """
    cfg = cfg or FeatureConfig()
    level_count = len(partition.levels)
    rows, levels_ix, region_ids, flags, slices = [], [], [], [], []
    start = 0
    sums = None
    for li, labels in enumerate(partition.levels):
        if li == 0:
            n = int(labels.max()) + 1
            sums = _base_sums(planes, labels, n)
        else:
            pmap = partition.merge_parents[li - 1]
            n = int(pmap.max()) + 1
            sums = _fold_sums(sums, pmap, n)
        f, deg = _features_from_sums(planes, labels, sums, li, level_count, cfg)
        rows.append(f)
        flags.append(deg)
        n = f.shape[0]
        levels_ix.append(np.full(n, li))
        region_ids.append(np.arange(n))
        slices.append((start, start + n))
        start += n
    return DescriptorSet(
        features=np.concatenate(rows, axis=0),
        level_index=np.concatenate(levels_ix),
        region_id=np.concatenate(region_ids),
        level_slices=slices,
        degenerate=np.concatenate(flags),
    )


def contrast_descriptors(planes, labels, region_id, cfg=None):
    """Contrast block (29 values) for one region of a level."""
    feats, deg = level_descriptors(planes, labels, 0, 1, cfg)
    return feats[region_id, :CONTRAST_DIM], bool(deg[region_id])


def background_descriptors(planes, labels, region_id, cfg=None):
    """Background block (29 values) for one region of a level."""
    feats, _ = level_descriptors(planes, labels, 0, 1, cfg)
    return feats[region_id, CONTRAST_DIM + PROPERTY_DIM :]


def property_descriptors(planes, labels, region_id, level_index=0, level_count=1, cfg=None):
    """Property block (58 values) for one region of a level."""
    feats, _ = level_descriptors(planes, labels, level_index, level_count, cfg)
    return feats[region_id, CONTRAST_DIM : CONTRAST_DIM + PROPERTY_DIM]
