"""Saliency map -> lesion mask: threshold, area filter, hull, DRLSE, cleanup."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from . import imgcore

SALIENCY_THRESHOLD = 0.5


class NoSalientObjectError(ValueError):
    pass


@dataclass
class DrlseParams:
    mu: float = 0.04
    lam: float = 5.0
    alpha: float = 1.5  # positive shrinks the contour (phi < 0 inside)
    epsilon: float = 1.5
    dt: float = 5.0
    iters: int = 200
    sigma: float = 1.5

    def validate(self):
        if self.mu * self.dt >= 0.25:
            raise ValueError("unstable parameters: mu * dt must be < 0.25")


def initial_mask(saliency, threshold=SALIENCY_THRESHOLD):
    """Threshold, drop statistically small objects, take the convex hull.

    Objects with area below mean - 2 * sample std of the object areas are
    removed; with a single object nothing is removed.
    """
    saliency = np.asarray(saliency, dtype=np.float64)
    binary = saliency >= threshold
    comps = imgcore.connected_components(binary)
    if not comps:
        raise NoSalientObjectError("no salient object")
    areas = np.array([c[1] for c in comps], dtype=np.float64)
    a_m = areas.mean()
    a_s = areas.std(ddof=1) if areas.size > 1 else 0.0
    cutoff = a_m - 2.0 * a_s
    keep = np.zeros_like(binary)
    for _, area, pixels in comps:
        if area >= cutoff:
            keep[pixels[:, 0], pixels[:, 1]] = True
    return imgcore.convex_hull_mask(keep)


def fallback_mask(saliency, labels=None):
    """Largest-mean-saliency 8-connected object of the top-saliency region.

    Used when thresholding yields nothing: binarize at the maximum
    saliency value instead, so the pipeline always returns a mask.
    """
    saliency = np.asarray(saliency, dtype=np.float64)
    top = saliency >= saliency.max()
    comps = imgcore.connected_components(top)
    best, best_mean = None, -1.0
    for _, _, pixels in comps:
        m = saliency[pixels[:, 0], pixels[:, 1]].mean()
        if m > best_mean:
            best, best_mean = pixels, m
    out = np.zeros(saliency.shape, dtype=bool)
    out[best[:, 0], best[:, 1]] = True
    return imgcore.convex_hull_mask(out)


def select_evolution_channel(img):
    """The channel (R, G, B or gray) with the highest histogram entropy."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img
    ent = imgcore.channel_entropy(img)
    order = ["R", "G", "B", "gray"]
    top = max(ent[name] for name in order)
    best = next(name for name in order if ent[name] == top)  # tie: fixed order
    if best == "gray":
        return imgcore.to_gray(img)
    return img[..., order.index(best)]


def _neumann_border(phi):
    phi[0, :] = phi[2, :]
    phi[-1, :] = phi[-3, :]
    phi[:, 0] = phi[:, 2]
    phi[:, -1] = phi[:, -3]
    return phi


def drlse_evolve(init_mask, channel, params=None, snapshot_every=0):
    """Distance-regularized level-set evolution from a binary initial mask.

    The field starts as the signed distance of the mask (negative inside)
    and evolves under the regularized PDE with an edge-weighted curvature
    term and a balloon term; returns the final {phi < 0} mask (and phi
    snapshots when requested).
    """
    params = params or DrlseParams()
    params.validate()
    init_mask = np.asarray(init_mask, dtype=bool)
    phi = imgcore.signed_distance(init_mask)
    channel = np.asarray(channel, dtype=np.float64)
    if channel.shape != init_mask.shape:
        raise ValueError("channel and mask sizes differ")

    # edge indicator on the 0..255 intensity scale
    smooth = ndi.gaussian_filter(channel * 255.0, params.sigma)
    iy, ix = np.gradient(smooth)
    g = 1.0 / (1.0 + ix**2 + iy**2)
    vy, vx = np.gradient(g)

    eps = 1e-10
    snapshots = []
    for it in range(params.iters):
        phi = _neumann_border(phi)
        py, px = np.gradient(phi)
        s = np.sqrt(px**2 + py**2)
        nx = px / (s + eps)
        ny = py / (s + eps)
        _, nxx = np.gradient(nx)
        nyy, _ = np.gradient(ny)
        curvature = nxx + nyy

        # double-well distance regularization potential
        a = (s >= 0) & (s <= 1)
        b = s > 1
        ps = a * np.sin(2.0 * np.pi * s) / (2.0 * np.pi) + b * (s - 1.0)
        dps = ((ps != 0) * ps + (ps == 0)) / ((s != 0) * s + (s == 0))
        _, kxx = np.gradient(dps * px - px)
        kyy, _ = np.gradient(dps * py - py)
        lap = ndi.laplace(phi)
        dist_reg = kxx + kyy + lap

        dirac = np.where(
            np.abs(phi) <= params.epsilon,
            (1.0 / (2.0 * params.epsilon))
            * (1.0 + np.cos(np.pi * phi / params.epsilon)),
            0.0,
        )
        edge_term = dirac * (vx * nx + vy * ny) + dirac * g * curvature
        area_term = dirac * g
        phi = phi + params.dt * (
            params.mu * dist_reg + params.lam * edge_term + params.alpha * area_term
        )
        if snapshot_every and (it + 1) % snapshot_every == 0:
            snapshots.append(phi.copy())

    mask = phi < 0
    if snapshot_every:
        return mask, phi, snapshots
    return mask, phi


def final_cleanup(mask, radius=5):
    """Open + close with a disk, fill holes, keep the largest component."""
    mask = np.asarray(mask, dtype=bool)
    se = imgcore.disk(radius)
    out = imgcore.closing(imgcore.opening(mask, se), se)
    out = imgcore.fill_holes(out)
    comps = imgcore.connected_components(out)
    if not comps:
        return mask.copy()  # cleanup emptied the mask; keep the input
    largest = max(comps, key=lambda c: c[1])
    out = np.zeros_like(mask)
    out[largest[2][:, 0], largest[2][:, 1]] = True
    return out


def segment_from_saliency(saliency, img, params=None, threshold=SALIENCY_THRESHOLD):
    """Full final-mask chain; returns (final mask, initial mask)."""
    try:
        init = initial_mask(saliency, threshold)
    except NoSalientObjectError:
        init = fallback_mask(saliency)
    if init.all():
        init = init.copy()
        init[0, :] = init[-1, :] = init[:, 0] = init[:, -1] = False
    channel = select_evolution_channel(img)
    evolved, _ = drlse_evolve(init, channel, params)
    if not evolved.any():
        return init, init
    return final_cleanup(evolved), init
