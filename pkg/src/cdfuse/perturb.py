"""Pixel-space perturbations that produce visually changed samples.

Two transforms are implemented here: forward-process Gaussian noising via
the closed-form kernel v_N = sqrt(abar_N)*v_0 + sqrt(1-abar_N)*eps (one
draw instead of N sequential ones; identical in distribution), and
resolution reduction (shrink each side by 1/r, then expand back to the
original size). The no-image variant is a marker only: the engine never
fabricates language-prior logits, they must come from a provider or a
record file.

Resizing uses area averaging on the way down (each coarse pixel is the
mean of the source cells it covers) and, by default, block replication on
the way back up. This pairing makes the round trip exactly idempotent and
exactly mean-preserving whenever r divides both sides; a conventional
bilinear upsampling kernel is available behind a flag but breaks the
idempotence guarantee.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import NoImage
from .errors import InvalidImage, RatioTooLarge, StepOutOfRange

__all__ = [
    "ImageTensor",
    "NoiseSchedule",
    "diffuse",
    "downsample",
    "blank",
    "load_image",
    "save_image",
]


@dataclass(frozen=True)
class ImageTensor:
    """H x W x C pixel array, float64 in [0, 1], clamped on construction."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise InvalidImage(f"expected HxWxC with C in (1, 3), got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise InvalidImage(f"empty image: shape {px.shape}")
        if np.isnan(px).any() or np.isinf(px).any():
            raise InvalidImage("pixels must be finite")
        px = np.clip(px, 0.0, 1.0)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step noise amounts gamma_1..gamma_T, each in (0, 1), non-decreasing.

    The cumulative signal fraction abar_n = prod_{j<=n}(1 - gamma_j) is
    strictly decreasing and cached.
    """

    gammas: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gammas, dtype=np.float64)
        if g.ndim != 1 or len(g) < 1:
            raise ValueError(f"schedule must be a non-empty 1-D array, got shape {g.shape}")
        if (g <= 0).any() or (g >= 1).any():
            raise ValueError("every gamma must lie strictly in (0, 1)")
        if (np.diff(g) < 0).any():
            raise ValueError("gammas must be monotone non-decreasing")
        g.setflags(write=False)
        object.__setattr__(self, "gammas", g)
        bars = np.cumprod(1.0 - g)
        bars.setflags(write=False)
        object.__setattr__(self, "_alpha_bars", bars)

    @property
    def total_steps(self) -> int:
        return len(self.gammas)

    def alpha_bar(self, n: int) -> float:
        """Cumulative product of (1 - gamma) over the first n steps; 1.0 at n=0."""
        if not 0 <= n <= self.total_steps:
            raise StepOutOfRange(f"step {n} outside [0, {self.total_steps}]")
        if n == 0:
            return 1.0
        return float(self._alpha_bars[n - 1])

    @classmethod
    def linear(cls, total_steps: int = 999, start: float = 1e-4, end: float = 0.02) -> "NoiseSchedule":
        return cls(gammas=np.linspace(start, end, total_steps))


DEFAULT_SCHEDULE = NoiseSchedule.linear()
DEFAULT_NOISE_STEPS = 500


def diffuse(
    image: ImageTensor, steps: int, schedule: NoiseSchedule | None = None, rng_seed: int = 0
) -> ImageTensor:
    """Noise an image to step N of the forward process, then clamp to [0, 1].

    steps=0 returns the input unchanged. Deterministic for a fixed
    (image, steps, schedule, rng_seed) tuple.
    """
    schedule = schedule if schedule is not None else DEFAULT_SCHEDULE
    if not 0 <= steps <= schedule.total_steps:
        raise StepOutOfRange(
            f"steps {steps} outside [0, {schedule.total_steps}] for this schedule"
        )
    if steps == 0:
        return image
    abar = schedule.alpha_bar(steps)
    eps = np.random.default_rng(rng_seed).standard_normal(image.pixels.shape)
    noisy = np.sqrt(abar) * image.pixels + np.sqrt(1.0 - abar) * eps
    return ImageTensor(pixels=np.clip(noisy, 0.0, 1.0))


DEFAULT_DOWNSAMPLE_RATIO = 32


def _area_weights(n: int, n_out: int) -> np.ndarray:
    """n_out x n matrix averaging source cells over equal-length output intervals."""
    w = np.zeros((n_out, n))
    step = n / n_out
    for j in range(n_out):
        lo, hi = j * step, (j + 1) * step
        for i in range(int(np.floor(lo)), min(n, int(np.ceil(hi)))):
            w[j, i] = min(hi, i + 1) - max(lo, i)
    return w / step


def _bilinear_up(coarse: np.ndarray, n: int, axis: int) -> np.ndarray:
    """Half-pixel bilinear interpolation of one axis up to length n."""
    m = coarse.shape[axis]
    coords = np.clip((np.arange(n) + 0.5) * m / n - 0.5, 0.0, m - 1.0)
    lo = np.floor(coords).astype(np.int64)
    hi = np.minimum(lo + 1, m - 1)
    frac = coords - lo
    take_lo = np.take(coarse, lo, axis=axis)
    take_hi = np.take(coarse, hi, axis=axis)
    shape = [1, 1, 1]
    shape[axis] = n
    f = frac.reshape(shape)
    return take_lo * (1.0 - f) + take_hi * f


def downsample(image: ImageTensor, ratio: int, up_kernel: str = "replicate") -> ImageTensor:
    """Shrink each side by 1/ratio, then expand back to the input size.

    up_kernel selects the expansion: "replicate" (default) repeats each
    coarse pixel over its block, "bilinear" interpolates between coarse
    pixel centers.
    """
    if ratio < 1:
        raise ValueError(f"ratio must be >= 1, got {ratio}")
    if ratio == 1:
        return image
    h, w = image.height, image.width
    if ratio > h or ratio > w:
        raise RatioTooLarge(f"ratio {ratio} exceeds image side ({h}x{w})")
    ch, cw = max(1, h // ratio), max(1, w // ratio)
    coarse = np.einsum("ij,jkl->ikl", _area_weights(h, ch), image.pixels)
    coarse = np.einsum("kj,ijl->ikl", _area_weights(w, cw), coarse)
    if up_kernel == "replicate":
        rows = (np.arange(h) * ch) // h
        cols = (np.arange(w) * cw) // w
        fine = coarse[rows][:, cols]
    elif up_kernel == "bilinear":
        fine = _bilinear_up(_bilinear_up(coarse, h, axis=0), w, axis=1)
    else:
        raise ValueError(f"unknown up_kernel: {up_kernel!r}")
    return ImageTensor(pixels=fine)


def blank(image: ImageTensor) -> NoImage:
    """Absent-image marker; the pixels are ignored by construction."""
    return NoImage()


# ---------------------------------------------------------------------------
# Image I/O: 8-bit PNG and a raw float binary (int32-LE h, w, c header then
# float32 row-major pixels)
# ---------------------------------------------------------------------------

_RAW_SUFFIXES = (".rawf", ".raw", ".bin")


def load_image(path: str) -> ImageTensor:
    if str(path).lower().endswith(_RAW_SUFFIXES):
        return _load_raw(path)
    return _load_png(path)


def save_image(image: ImageTensor, path: str) -> None:
    if str(path).lower().endswith(_RAW_SUFFIXES):
        _save_raw(image, path)
    else:
        _save_png(image, path)


def _load_png(path: str) -> ImageTensor:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if ("A" in im.mode or len(im.mode) > 2) else "L")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    return ImageTensor(pixels=arr)


def _save_png(image: ImageTensor, path: str) -> None:
    from PIL import Image

    arr = np.rint(image.pixels * 255.0).astype(np.uint8)
    if image.channels == 1:
        Image.fromarray(arr[:, :, 0], mode="L").save(path, format="PNG")
    else:
        Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def _load_raw(path: str) -> ImageTensor:
    with open(path, "rb") as f:
        header = f.read(12)
        if len(header) != 12:
            raise InvalidImage(f"truncated raw image header in {path}")
        h, w, c = struct.unpack("<iii", header)
        if h < 1 or w < 1 or c not in (1, 3):
            raise InvalidImage(f"bad raw image header h={h} w={w} c={c}")
        data = np.fromfile(f, dtype="<f4", count=h * w * c)
    if len(data) != h * w * c:
        raise InvalidImage(f"raw image payload truncated in {path}")
    return ImageTensor(pixels=data.astype(np.float64).reshape(h, w, c))


def _save_raw(image: ImageTensor, path: str) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack("<iii", image.height, image.width, image.channels))
        image.pixels.astype("<f4").tofile(f)
