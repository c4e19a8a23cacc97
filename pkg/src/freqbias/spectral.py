"""2D DFT, power spectra and the log-scaled spectrum display."""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .validation import check_finite, check_image, check_images, to_luminance

__all__ = [
    "LOG_FLOOR",
    "PowerSpectrum",
    "AveragePowerSpectrum",
    "centered_frequencies",
    "dft2",
    "idft2",
    "hann_window",
    "power_spectrum",
    "average_power_spectrum",
    "display_normalize",
    "write_spectrum_csv",
    "read_spectrum_csv",
    "write_heatmap_png",
]

# Power ratios below 1e-12 clamp to this value on the log10 display scale.
LOG_FLOOR = -12.0

RAW = "raw"
DISPLAY = "display"


@dataclass(frozen=True)
class PowerSpectrum:
    """Squared DFT magnitudes on an ``m x n`` bin grid.

    ``raw`` spectra are stored in DFT bin order (``power[u, v]`` for
    ``u in [0, m)``). ``display`` spectra are log10-scaled, centered so that
    the zero frequency sits at index ``(m // 2, n // 2)``, and carry ``nan``
    in the removed DC bin.
    """

    power: np.ndarray
    mode: str = RAW

    def __post_init__(self):
        if self.mode not in (RAW, DISPLAY):
            raise ValueError(f"unknown spectrum mode {self.mode!r}")

    @property
    def shape(self):
        return self.power.shape

    def in_bin_order(self) -> np.ndarray:
        """Values indexed by DFT bin regardless of mode."""
        if self.mode == DISPLAY:
            return np.fft.ifftshift(self.power)
        return self.power


def centered_frequencies(size: int) -> np.ndarray:
    """Map bins ``0..size-1`` to cycles/pixel in ``[-0.5, 0.5)``."""
    u = np.arange(size)
    return ((u + size // 2) % size - size // 2) / size


def dft2(image) -> np.ndarray:
    """Unnormalized forward 2D DFT over the first two axes.

    ``C(u, v) = sum_{x, y} I(x, y) exp(-j 2 pi (u x / m + v y / n))``.
    Trailing axes (channels) are transformed independently.
    """
    a = check_finite(np.asarray(image), "image")
    if a.ndim < 2:
        raise ValueError(f"expected at least 2 dimensions, got shape {a.shape}")
    return np.fft.fft2(a, axes=(0, 1))


def idft2(spectrum, rtol=1e-9) -> np.ndarray:
    """Inverse DFT with ``1/(mn)`` normalization, returning the real part.

    Spectra that are not Hermitian leave an imaginary residue; it is dropped
    with a warning once it exceeds ``rtol`` relative to the real part.
    """
    c = check_finite(np.asarray(spectrum, dtype=np.complex128), "spectrum")
    out = np.fft.ifft2(c, axes=(0, 1))
    scale = np.max(np.abs(out.real), initial=0.0)
    residue = np.max(np.abs(out.imag), initial=0.0)
    if residue > rtol * max(scale, np.finfo(float).tiny):
        warnings.warn(
            f"discarding imaginary residue {residue:.3g} (spectrum is not Hermitian)",
            RuntimeWarning,
            stacklevel=2,
        )
    return out.real


def hann_window(m: int, n: int) -> np.ndarray:
    """Separable symmetric Hann window, zero at both ends of each axis."""
    if m < 2 or n < 2:
        raise ValueError(f"window size must be at least 2x2, got {m}x{n}")
    wx = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(m) / (m - 1)))
    wy = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / (n - 1)))
    return np.outer(wx, wy)


def power_spectrum(image, windowed: bool = False, per_channel: bool = False) -> PowerSpectrum:
    """Raw power spectrum ``|C(u, v)|^2`` of one image.

    Color images are reduced to luminance unless ``per_channel`` is set, in
    which case the result has a trailing channel axis.
    """
    a = check_image(image)
    if not per_channel:
        a = to_luminance(a)
    if windowed:
        w = hann_window(a.shape[0], a.shape[1])
        a = a * (w if a.ndim == 2 else w[..., None])
    c = dft2(a)
    return PowerSpectrum(c.real**2 + c.imag**2)


def average_power_spectrum(images, windowed: bool = False, per_channel: bool = False,
                           n_jobs: int | None = None) -> PowerSpectrum:
    """Mean of per-image raw power spectra.

    Spectra are accumulated in image order whatever the worker count, so
    the result does not depend on ``n_jobs``.
    """
    stack = check_images(images)

    def one(im):
        return power_spectrum(im, windowed=windowed, per_channel=per_channel).power

    total = None
    with ThreadPoolExecutor(max_workers=n_jobs or 1) as pool:
        for p in pool.map(one, stack):
            total = p.copy() if total is None else total + p
    return PowerSpectrum(total / len(stack))


def display_normalize(ps: PowerSpectrum, floor: float = LOG_FLOOR) -> PowerSpectrum:
    """Drop DC, scale by the maximum, take log10 and center the zero frequency.

    The maximum of the result is exactly 0; values below ``floor`` clamp to
    it and the DC bin holds ``nan``.
    """
    if ps.mode != RAW:
        raise ValueError("display_normalize expects a raw spectrum")
    p = np.array(ps.power, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("display_normalize expects a single-channel spectrum")
    p[0, 0] = 0.0
    peak = p.max()
    if not peak > 0:
        raise ValueError("spectrum has no non-DC power; log scale is undefined")
    with np.errstate(divide="ignore"):
        out = np.log10(p / peak)
    out = np.maximum(out, floor)
    out[0, 0] = np.nan
    return PowerSpectrum(np.fft.fftshift(out), mode=DISPLAY)


def write_spectrum_csv(ps: PowerSpectrum, path) -> None:
    """Write ``m,n,mode`` metadata followed by ``u,v,value`` rows in bin order."""
    values = ps.in_bin_order()
    if values.ndim != 2:
        raise ValueError("only single-channel spectra can be exported")
    m, n = values.shape
    lines = ["m,n,mode", f"{m},{n},{ps.mode}", "u,v,value"]
    for u in range(m):
        for v in range(n):
            lines.append(f"{u},{v},{float(values[u, v])!r}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_spectrum_csv(path) -> PowerSpectrum:
    with open(path) as fh:
        rows = [line.strip() for line in fh if line.strip()]
    if rows[0] != "m,n,mode" or rows[2] != "u,v,value":
        raise ValueError(f"{path}: not a spectrum CSV")
    m, n, mode = rows[1].split(",")
    values = np.empty((int(m), int(n)))
    for row in rows[3:]:
        u, v, val = row.split(",")
        values[int(u), int(v)] = float(val)
    if mode == DISPLAY:
        values = np.fft.fftshift(values)
    return PowerSpectrum(values, mode=mode)


def write_heatmap_png(ps: PowerSpectrum, path, floor: float = LOG_FLOOR) -> None:
    """Save a display spectrum as 8-bit grayscale, mapping [floor, 0] to [0, 255].

    The horizontal image axis is the x frequency and the vertical axis the y
    frequency; the removed DC bin is drawn black.
    """
    from PIL import Image

    if ps.mode != DISPLAY:
        ps = display_normalize(ps, floor=floor)
    z = np.nan_to_num(ps.power, nan=floor)
    scaled = np.clip((z - floor) / -floor, 0.0, 1.0)
    pixels = np.round(scaled * 255.0).astype(np.uint8)
    Image.fromarray(pixels.T, mode="L").save(path)


class AveragePowerSpectrum(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`average_power_spectrum`.

    ``fit`` stores the dataset-average spectrum in ``spectrum_``;
    ``transform`` maps each image of a stack to its own raw power spectrum.
    """

    def __init__(self, windowed=False, per_channel=False, n_jobs=None):
        self.windowed = windowed
        self.per_channel = per_channel
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        self.spectrum_ = average_power_spectrum(
            X, windowed=self.windowed, per_channel=self.per_channel, n_jobs=self.n_jobs
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "spectrum_")
        stack = check_images(X)
        return np.stack([
            power_spectrum(im, windowed=self.windowed, per_channel=self.per_channel).power
            for im in stack
        ])

    def display(self) -> PowerSpectrum:
        check_is_fitted(self, "spectrum_")
        return display_normalize(self.spectrum_)
