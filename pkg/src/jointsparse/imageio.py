"""Binary PPM/PGM images and the YIQ colour transform."""

from __future__ import annotations

from pathlib import Path

import numpy as np

RGB_TO_YIQ = np.array([[0.299, 0.587, 0.114],
                       [0.596, -0.274, -0.322],
                       [0.211, -0.523, 0.312]])
YIQ_TO_RGB = np.linalg.inv(RGB_TO_YIQ)


def rgb_to_yiq(rgb: np.ndarray) -> np.ndarray:
    return np.asarray(rgb, dtype=float) @ RGB_TO_YIQ.T


def yiq_to_rgb(yiq: np.ndarray) -> np.ndarray:
    return np.asarray(yiq, dtype=float) @ YIQ_TO_RGB.T


def _tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out, pos = [], 0
    while len(out) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PNM header")
        out.append(data[start:pos])
    return out, pos + 1  # a single whitespace byte separates header and raster


def read_pnm(path) -> np.ndarray:
    """Read a binary P5/P6 file as floats in [0, 1].

    Returns shape ``(h, w)`` for PGM and ``(h, w, 3)`` for PPM.
    """
    data = Path(path).read_bytes()
    (magic, w, h, maxval), offset = _tokens(data, 4)
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"{path}: only binary PGM (P5) and PPM (P6) are supported")
    w, h, maxval = int(w), int(h), int(maxval)
    if not 0 < maxval < 256:
        raise ValueError(f"{path}: only 8-bit images are supported (maxval {maxval})")
    channels = 3 if magic == b"P6" else 1
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h * channels, offset=offset)
    img = raster.astype(float).reshape(h, w, channels) / maxval
    return img[..., 0] if channels == 1 else img


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_pnm(path, img: np.ndarray) -> Path:
    """Write a [0, 1] float image as P5 (2-D) or P6 (3 channels)."""
    img = np.asarray(img)
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot write image of shape {img.shape}")
    h, w = img.shape[:2]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(magic + b"\n%d %d\n255\n" % (w, h) + to_uint8(img).tobytes())
    return path


def synthetic_color_image(side: int = 64, seed: int = 0) -> np.ndarray:
    """Piecewise-constant RGB test image: coloured discs and bars on a gradient."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:side, 0:side] / side
    img = np.stack([0.3 + 0.4 * xx, 0.35 + 0.3 * yy, 0.5 - 0.2 * xx], axis=-1)
    for _ in range(4):
        cx, cy = rng.uniform(0.2, 0.8, 2)
        r = rng.uniform(0.08, 0.2)
        mask = (xx - cx) ** 2 + (yy - cy) ** 2 < r * r
        img[mask] = rng.uniform(0.05, 0.95, 3)
    x0 = rng.uniform(0.1, 0.6)
    img[(xx > x0) & (xx < x0 + 0.12) & (yy > 0.55)] = rng.uniform(0.05, 0.95, 3)
    return np.clip(img, 0.0, 1.0)
