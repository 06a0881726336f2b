"""File plumbing: PNG/JPEG images, binary masks, saliency maps, CSV, atomic writes."""

from __future__ import annotations

import os
import tempfile

import numpy as np
from PIL import Image


def read_image(path):
    """RGB float image in [0, 1] from a PNG/JPEG file."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def read_mask(path):
    """Boolean mask from an 8-bit image; values > 127 are true."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return arr > 127


def atomic_write(path, data):
    """Write bytes to a temp file in the target directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _png_bytes(arr):
    import io as _io

    buf = _io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def write_mask(path, mask):
    """Binary mask as an 8-bit PNG with values {0, 255}."""
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    atomic_write(path, _png_bytes(arr))


def write_saliency(path, saliency):
    """Saliency map in [0, 1] as an 8-bit grayscale PNG (round(255 * s))."""
    s = np.clip(np.asarray(saliency, dtype=np.float64), 0.0, 1.0)
    atomic_write(path, _png_bytes(np.rint(s * 255.0).astype(np.uint8)))


def write_rgb(path, img):
    """RGB float image in [0, 1] as an 8-bit PNG."""
    arr = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    atomic_write(path, _png_bytes(arr))


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    atomic_write(path, ("\n".join(lines) + "\n").encode())
