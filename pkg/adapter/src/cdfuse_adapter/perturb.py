"""Pixel perturbations applied before querying the model.

Faithful standalone reimplementation of the engine's transforms (the
adapter talks to the engine only through files and its CLI): closed-form
forward-process noising v_N = sqrt(abar_N)*v_0 + sqrt(1-abar_N)*eps over a
linear schedule, and area-average reduction with block replication back to
the original size.
"""

from __future__ import annotations

import numpy as np

TOTAL_STEPS = 999
_GAMMAS = np.linspace(1e-4, 0.02, TOTAL_STEPS)
_ALPHA_BARS = np.cumprod(1.0 - _GAMMAS)


def noise_image(pixels: np.ndarray, steps: int, seed: int) -> np.ndarray:
    """Diffuse to step N of the forward process and clamp to [0, 1]."""
    if not 0 <= steps <= TOTAL_STEPS:
        raise ValueError(f"steps {steps} outside [0, {TOTAL_STEPS}]")
    if steps == 0:
        return pixels
    abar = _ALPHA_BARS[steps - 1]
    eps = np.random.default_rng(seed).standard_normal(pixels.shape)
    return np.clip(np.sqrt(abar) * pixels + np.sqrt(1.0 - abar) * eps, 0.0, 1.0)


def _area_weights(n: int, n_out: int) -> np.ndarray:
    w = np.zeros((n_out, n))
    step = n / n_out
    for j in range(n_out):
        lo, hi = j * step, (j + 1) * step
        for i in range(int(np.floor(lo)), min(n, int(np.ceil(hi)))):
            w[j, i] = min(hi, i + 1) - max(lo, i)
    return w / step


def downsample_image(pixels: np.ndarray, ratio: int) -> np.ndarray:
    """Shrink each side by 1/ratio (area average), then replicate back."""
    if ratio < 1:
        raise ValueError(f"ratio must be >= 1, got {ratio}")
    if ratio == 1:
        return pixels
    h, w = pixels.shape[:2]
    if ratio > h or ratio > w:
        raise ValueError(f"ratio {ratio} exceeds image side ({h}x{w})")
    ch, cw = max(1, h // ratio), max(1, w // ratio)
    coarse = np.einsum("ij,jkl->ikl", _area_weights(h, ch), pixels)
    coarse = np.einsum("kj,ijl->ikl", _area_weights(w, cw), coarse)
    rows = (np.arange(h) * ch) // h
    cols = (np.arange(w) * cw) // w
    return coarse[rows][:, cols]


def load_image(path: str) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr
