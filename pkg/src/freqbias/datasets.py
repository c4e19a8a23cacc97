"""Synthetic image sets (Koch snowflakes, planar waves) and PNG directories.

Every generator seeds image ``i`` from ``(seed, i)`` alone, so generating a
single image reproduces the matching member of any batch.
"""
from __future__ import annotations

import os
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from PIL import Image

__all__ = [
    "KochParams",
    "WaveParams",
    "koch_polygon",
    "rasterize_polygon",
    "gen_koch",
    "gen_koch_image",
    "gen_planar_wave",
    "load_dataset",
    "save_dataset",
    "read_scale",
    "write_manifest",
]

MAX_KOCH_LEVEL = 8
SUPERSAMPLE = 4
SCALE_FILE = "scale.txt"


@dataclass(frozen=True)
class KochParams:
    level: int = 5
    size: int = 256
    count: int = 200
    seed: int = 0
    margin: float = 0.1

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be non-negative")
        if self.size < 64:
            raise ValueError("size must be at least 64")
        if not 0.0 <= self.margin < 0.4:
            raise ValueError("margin must lie in [0, 0.4)")


@dataclass(frozen=True)
class WaveParams:
    m: int = 128
    n: int = 128
    u: float = 3 / 128
    v: float = 0.0
    amp_mean: float = 0.0
    amp_std: float = 1.0
    phase: float = 0.0
    count: int = 100
    seed: int = 0

    def __post_init__(self):
        if not (-0.5 <= self.u < 0.5 and -0.5 <= self.v < 0.5):
            raise ValueError("wave frequency must lie in [-0.5, 0.5)^2")
        if self.amp_std < 0:
            raise ValueError("amp_std must be non-negative")


def _image_rng(seed, index):
    return np.random.default_rng([int(seed), int(index)])


def koch_polygon(level: int) -> np.ndarray:
    """Vertices of the Koch snowflake, counter-clockwise, shape ``(3 * 4**level, 2)``.

    Starts from the equilateral triangle inscribed in the unit circle; each
    level replaces every edge by four with the bump pointing outward. The
    closing edge from the last vertex back to the first is implicit.
    """
    if level < 0 or level > MAX_KOCH_LEVEL:
        raise ValueError(f"level must be in [0, {MAX_KOCH_LEVEL}], got {level}")
    pts = np.exp(2j * np.pi * np.arange(3) / 3 + 0.5j * np.pi)
    turn = np.exp(-1j * np.pi / 3)
    for _ in range(level):
        a = pts
        b = np.roll(pts, -1)
        step = (b - a) / 3.0
        s1 = a + step
        s2 = a + 2.0 * step
        tip = s1 + step * turn
        pts = np.stack([a, s1, tip, s2], axis=1).ravel()
    return np.column_stack([pts.real, pts.imag])


def rasterize_polygon(vertices: np.ndarray, size: int, supersample: int = SUPERSAMPLE) -> np.ndarray:
    """Even-odd scanline fill at ``supersample``x resolution, then box-average.

    ``vertices`` are in pixel units of the output grid, ``[:, 0]`` along
    axis 0 and ``[:, 1]`` along axis 1. Samples sit at sub-pixel centers.
    """
    s = size * supersample
    v = np.asarray(vertices, dtype=np.float64) * supersample
    x0, y0 = v[:, 0], v[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    rows = np.arange(s) + 0.5
    # Half-open crossing rule so that vertices on a scanline count once.
    crosses = (y0[None, :] <= rows[:, None]) != (y1[None, :] <= rows[:, None])
    r_idx, e_idx = np.nonzero(crosses)
    t = (rows[r_idx] - y0[e_idx]) / (y1[e_idx] - y0[e_idx])
    xs = x0[e_idx] + t * (x1[e_idx] - x0[e_idx])
    # Column samples at c + 0.5 lie right of the crossing from ceil(x - 0.5).
    start = np.clip(np.ceil(xs - 0.5), 0, s).astype(np.int64)
    toggles = np.bincount(r_idx * (s + 1) + start, minlength=s * (s + 1)).reshape(s, s + 1)
    inside = (np.cumsum(toggles[:, :s], axis=1) % 2).astype(np.float64)
    # inside is indexed [y, x]; return [x, y].
    fine = inside.T
    return fine.reshape(size, supersample, size, supersample).mean(axis=(1, 3))


def gen_koch_image(params: KochParams, index: int) -> np.ndarray:
    """Image ``index`` of the dataset described by ``params``."""
    rng = _image_rng(params.seed, index)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    pts = koch_polygon(params.level)
    c, s = np.cos(angle), np.sin(angle)
    pts = pts @ np.array([[c, s], [-s, c]])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    extent = (1.0 - 2.0 * params.margin) * params.size
    scale = extent / np.max(hi - lo)
    pts = (pts - 0.5 * (lo + hi)) * scale + 0.5 * params.size
    return rasterize_polygon(pts, params.size)


def gen_koch(params: KochParams) -> np.ndarray:
    """Randomly rotated Koch snowflakes, white (1.0) on black, ``(count, size, size)``."""
    return np.stack([gen_koch_image(params, i) for i in range(params.count)])


def gen_planar_wave(params: WaveParams) -> np.ndarray:
    """``A_i cos(2 pi (u x + v y) + phase)`` with ``A_i ~ N(amp_mean, amp_std^2)``."""
    x = np.arange(params.m)[:, None]
    y = np.arange(params.n)[None, :]
    carrier = np.cos(2.0 * np.pi * (params.u * x + params.v * y) + params.phase)
    amps = np.array([_image_rng(params.seed, i).normal(params.amp_mean, params.amp_std)
                     for i in range(params.count)])
    return amps[:, None, None] * carrier


def read_scale(directory):
    """``(offset, gain)`` from a sidecar ``scale.txt``, or ``None``."""
    path = os.path.join(directory, SCALE_FILE)
    if not os.path.exists(path):
        return None
    with open(path) as fh:
        parts = fh.read().replace(",", " ").split()
    if len(parts) != 2:
        raise ValueError(f"{path}: expected two numbers 'offset gain'")
    offset, gain = float(parts[0]), float(parts[1])
    if not gain > 0:
        raise ValueError(f"{path}: gain must be positive")
    return offset, gain


def load_dataset(directory, decode: bool = True) -> np.ndarray:
    """Read every ``*.png`` in lexicographic order, pixel values scaled to [0, 1].

    Grayscale files give ``(count, m, n)``; color files ``(count, m, n, 3)``.
    If the directory carries a ``scale.txt`` sidecar and ``decode`` is set,
    stored values ``s`` are mapped back to ``s / gain + offset``.
    """
    if not os.path.isdir(directory):
        raise FileNotFoundError(f"no such dataset directory: {directory}")
    names = sorted(f for f in os.listdir(directory) if f.lower().endswith(".png"))
    if not names:
        warnings.warn(f"{directory} contains no PNG files", RuntimeWarning, stacklevel=2)
        return np.zeros((0, 0, 0))
    images = []
    for name in names:
        path = os.path.join(directory, name)
        try:
            with Image.open(path) as im:
                mode = "RGB" if im.mode in ("RGB", "RGBA", "P", "CMYK", "YCbCr") else "L"
                arr = np.asarray(im.convert(mode), dtype=np.float64) / 255.0
        except OSError as exc:
            raise ValueError(f"cannot read {path}: {exc}") from exc
        if images and arr.shape != images[0].shape:
            raise ValueError(f"{path} has shape {arr.shape}, expected {images[0].shape}")
        images.append(arr)
    stack = np.stack(images)
    scale = read_scale(directory) if decode else None
    if scale is not None:
        stack = stack / scale[1] + scale[0]
    return stack


def _choose_scale(stack):
    lo, hi = float(stack.min()), float(stack.max())
    tol = 1.0 / 255.0
    if lo >= -tol and hi <= 1.0 + tol:
        return 0.0, 1.0
    if lo >= -1.0 - tol and hi <= 1.0 + tol:
        return -1.0, 0.5
    return lo, 1.0 / (hi - lo)


def save_dataset(images, directory, scale=None, write_sidecar=None) -> tuple[float, float]:
    """Write images as ``%06d.png`` (8-bit), returning the ``(offset, gain)`` used.

    Values are stored as ``clip((value - offset) * gain, 0, 1)``. Without an
    explicit ``scale`` the map is the identity for data in [0, 1], the fixed
    map of [-1, 1] for sign-modulated data, and the data range otherwise. A
    ``scale.txt`` sidecar is written whenever the map is not the identity,
    or always if ``write_sidecar`` is true.
    """
    stack = np.asarray(images, dtype=np.float64)
    if scale is None:
        scale = _choose_scale(stack) if stack.size else (0.0, 1.0)
    offset, gain = float(scale[0]), float(scale[1])
    os.makedirs(directory, exist_ok=True)
    for i, im in enumerate(stack):
        stored = np.clip((im - offset) * gain, 0.0, 1.0)
        pixels = np.round(stored * 255.0).astype(np.uint8)
        mode = "RGB" if pixels.ndim == 3 else "L"
        Image.fromarray(pixels, mode=mode).save(os.path.join(directory, f"{i:06d}.png"))
    if write_sidecar or (write_sidecar is None and (offset, gain) != (0.0, 1.0)):
        with open(os.path.join(directory, SCALE_FILE), "w") as fh:
            fh.write(f"{offset!r} {gain!r}\n")
    return offset, gain


def write_manifest(params, directory) -> None:
    """Record generator parameters, one ``key=value`` per line."""
    fields = asdict(params) if hasattr(params, "__dataclass_fields__") else dict(params)
    with open(os.path.join(directory, "manifest.txt"), "w") as fh:
        fh.write(f"generator={type(params).__name__}\n")
        for key, value in fields.items():
            fh.write(f"{key}={value!r}\n")
