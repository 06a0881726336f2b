"""Texture and edge operators: Leung-Malik and Laws' banks, LBP, Prewitt."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi
from scipy.signal import fftconvolve


@dataclass(frozen=True)
class FilterBank:
    kind: str  # "LM15" | "Laws14"
    names: tuple
    kernels: tuple  # tuple of 2-D float arrays


def _gauss1d(sigma, x, order):
    g = np.exp(-(x**2) / (2.0 * sigma**2)) / (np.sqrt(2.0 * np.pi) * sigma)
    if order == 0:
        return g
    if order == 1:
        return -g * x / sigma**2
    return g * (x**2 - sigma**2) / sigma**4


def _l1_normalize(k):
    return k / np.abs(k).sum()


def _oriented_kernel(sigma_long, sigma_short, theta, order, half):
    """Derivative-of-Gaussian bar/edge kernel, derivative along the short axis."""
    y, x = np.mgrid[-half : half + 1, -half : half + 1].astype(np.float64)
    c, s = np.cos(theta), np.sin(theta)
    u = c * x + s * y  # long axis
    v = -s * x + c * y  # short axis (derivative direction)
    k = _gauss1d(sigma_long, u, 0) * _gauss1d(sigma_short, v, order)
    if order == 2:
        k -= k.mean()  # discrete sum of the even derivative is not exactly 0
    return _l1_normalize(k)


def _gaussian2d(sigma, half):
    y, x = np.mgrid[-half : half + 1, -half : half + 1].astype(np.float64)
    g = np.exp(-(x**2 + y**2) / (2.0 * sigma**2))
    return g / g.sum()


def _log2d(sigma, half):
    y, x = np.mgrid[-half : half + 1, -half : half + 1].astype(np.float64)
    r2 = x**2 + y**2
    g = np.exp(-r2 / (2.0 * sigma**2)) * (r2 - 2.0 * sigma**2)
    g -= g.mean()
    return _l1_normalize(g)


def make_lm15():
    """15-kernel Leung-Malik style bank on 49x49 support.

    Six first-derivative and six second-derivative oriented kernels at an
    elongated scale, one Gaussian and two Laplacian-of-Gaussian blobs.
    """
    half = 24
    names, kernels = [], []
    angles = [k * np.pi / 6.0 for k in range(6)]
    for order, tag in ((1, "edge"), (2, "bar")):
        for i, th in enumerate(angles):
            names.append(f"{tag}_{i}")
            kernels.append(_oriented_kernel(3.0, 1.0, th, order, half))
    names.append("gauss")
    kernels.append(_gaussian2d(10.0, half))
    names.append("log_10")
    kernels.append(_log2d(10.0, half))
    names.append("log_20")
    kernels.append(_log2d(20.0, half))
    return FilterBank("LM15", tuple(names), tuple(kernels))


_LAWS_1D = {
    "L5": np.array([1.0, 4.0, 6.0, 4.0, 1.0]),
    "E5": np.array([-1.0, -2.0, 0.0, 2.0, 1.0]),
    "S5": np.array([-1.0, 0.0, 2.0, 0.0, -1.0]),
    "W5": np.array([-1.0, 2.0, 0.0, -2.0, 1.0]),
    "R5": np.array([1.0, -4.0, 6.0, -4.0, 1.0]),
}


def make_laws14():
    """The 14 Laws' texture kernels.

    All 25 outer products of L5/E5/S5/W5/R5, symmetric pairs averaged
    into one kernel, and the pure-smoothing L5L5 dropped.
    """
    order = ["L5", "E5", "S5", "W5", "R5"]
    names, kernels = [], []
    for i, a in enumerate(order):
        for j, b in enumerate(order[i:], start=i):
            if a == "L5" and b == "L5":
                continue
            k_ab = np.outer(_LAWS_1D[a], _LAWS_1D[b])
            if i == j:
                names.append(a + b)
                kernels.append(k_ab)
            else:
                names.append(a + b)
                kernels.append(0.5 * (k_ab + k_ab.T))
    return FilterBank("Laws14", tuple(names), tuple(kernels))


def filter_response(channel, bank):
    """Correlate a single-channel image with every kernel of a bank.

    Replicate border padding; large kernels go through FFT convolution.
    """
    channel = np.asarray(channel, dtype=np.float64)
    if channel.ndim != 2:
        raise ValueError("expected a single-channel image")
    out = []
    for k in bank.kernels:
        hh, hw = k.shape[0] // 2, k.shape[1] // 2
        if k.size >= 15 * 15:
            padded = np.pad(channel, ((hh, hh), (hw, hw)), mode="edge")
            # correlation = convolution with the flipped kernel
            r = fftconvolve(padded, k[::-1, ::-1], mode="valid")
        else:
            r = ndi.correlate(channel, k, mode="nearest")
        out.append(r)
    return out


def lbp_codes(channel):
    """8-neighbor radius-1 LBP codes in [0, 255].

    Bit i is set iff the i-th neighbor (clockwise from east) is >= the
    center; borders are replicate-padded.
    """
    channel = np.asarray(channel, dtype=np.float64)
    p = np.pad(channel, 1, mode="edge")
    h, w = channel.shape
    # clockwise from east in (row, col) image coordinates
    offsets = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)]
    codes = np.zeros((h, w), dtype=np.int64)
    for bit, (dy, dx) in enumerate(offsets):
        nb = p[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        codes |= (nb >= channel).astype(np.int64) << bit
    return codes


_PREWITT_X = np.array([[-1.0, 0.0, 1.0]] * 3)
_PREWITT_Y = _PREWITT_X.T


def prewitt_magnitude(channel):
    """Gradient magnitude with 3x3 Prewitt kernels, replicate padding."""
    channel = np.asarray(channel, dtype=np.float64)
    gx = ndi.correlate(channel, _PREWITT_X, mode="nearest")
    gy = ndi.correlate(channel, _PREWITT_Y, mode="nearest")
    return np.hypot(gx, gy)
