"""Frechet distance, the high-pass FID-Levels sweep and the Leakage Ratio."""
from __future__ import annotations

import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .spectral import PowerSpectrum, centered_frequencies
from .validation import check_finite, check_image, check_images, to_luminance

__all__ = [
    "DEFAULT_CUTOFFS",
    "GaussianMoments",
    "FidLevelsCurve",
    "GaussianHighpass",
    "PixelFeatures",
    "fit_moments",
    "frechet_distance",
    "highpass_gaussian",
    "highpass_images",
    "pixel_features",
    "fid_levels",
    "true_fid_levels",
    "leakage_ratio",
    "read_features",
    "write_features",
    "write_curve_csv",
]

DEFAULT_CUTOFFS = tuple(np.linspace(0.0, 0.7, 15))
MAX_CUTOFF = 0.75
FEATURES_MAGIC = b"FSET"


@dataclass(frozen=True)
class GaussianMoments:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class FidLevelsCurve:
    cutoffs: np.ndarray
    values: np.ndarray

    def __iter__(self):
        return iter(zip(self.cutoffs.tolist(), self.values.tolist()))


def fit_moments(features) -> GaussianMoments:
    """Sample mean and unbiased covariance of the rows of ``features``."""
    f = check_finite(np.asarray(features, dtype=np.float64), "features")
    if f.ndim != 2:
        raise ValueError(f"features must be 2-D (count, dim), got shape {f.shape}")
    count, dim = f.shape
    if count < 2:
        raise ValueError("need at least 2 feature rows to fit moments")
    if count < dim + 1:
        warnings.warn(f"{count} rows for {dim} features: covariance is rank deficient",
                      RuntimeWarning, stacklevel=2)
    mean = f.mean(axis=0)
    centered = f - mean
    cov = centered.T @ centered / (count - 1)
    return GaussianMoments(mean, 0.5 * (cov + cov.T))


def _psd_sqrt(cov, name):
    scale = max(np.max(np.abs(cov)), np.finfo(float).tiny)
    if np.max(np.abs(cov - cov.T)) > 1e-12 * scale:
        raise ValueError(f"{name} covariance is not symmetric")
    evals, evecs = np.linalg.eigh(0.5 * (cov + cov.T))
    top = max(evals.max(), 0.0)
    if evals.min() < -1e-10 * max(top, np.finfo(float).tiny):
        raise ValueError(f"{name} covariance is not positive semi-definite")
    return (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T


def frechet_distance(a: GaussianMoments, b: GaussianMoments) -> float:
    """Squared Frechet (2-Wasserstein) distance between two Gaussians.

    ``|mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2)``, the
    cross term evaluated from the eigenvalues of the symmetric product.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    root_a = _psd_sqrt(a.cov, "first")
    _psd_sqrt(b.cov, "second")
    inner = root_a @ b.cov @ root_a
    evals = np.linalg.eigvalsh(0.5 * (inner + inner.T))
    cross = np.sqrt(np.clip(evals, 0.0, None)).sum()
    diff = a.mean - b.mean
    d2 = diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * cross
    return float(max(d2, 0.0))


def _highpass_transfer(m, n, cutoff):
    u = centered_frequencies(m)[:, None]
    v = centered_frequencies(n)[None, :]
    r2 = u**2 + v**2
    if cutoff == 0:
        h = np.ones((m, n))
        h[0, 0] = 0.0
        return h
    return 1.0 - np.exp(-r2 / (2.0 * cutoff**2))


def highpass_gaussian(image, cutoff: float) -> np.ndarray:
    """Gaussian high-pass: multiply the DFT by ``1 - exp(-(u^2 + v^2) / (2 rho^2))``.

    ``cutoff = 0`` removes only the DC term. Channels are filtered
    independently and the real part of the inverse transform is returned.
    """
    if not 0.0 <= cutoff <= MAX_CUTOFF:
        raise ValueError(f"cutoff must lie in [0, {MAX_CUTOFF}], got {cutoff}")
    a = check_image(image)
    h = _highpass_transfer(a.shape[0], a.shape[1], cutoff)
    if a.ndim == 3:
        h = h[..., None]
    return np.fft.ifft2(np.fft.fft2(a, axes=(0, 1)) * h, axes=(0, 1)).real


def highpass_images(images, cutoff: float, n_jobs: int | None = None) -> np.ndarray:
    """Apply :func:`highpass_gaussian` to every image of a stack."""
    stack = check_images(images)
    with ThreadPoolExecutor(max_workers=n_jobs or 1) as pool:
        return np.stack(list(pool.map(lambda im: highpass_gaussian(im, cutoff), stack)))


def _box_downsample(a, side):
    m, n = a.shape[-2:]
    rows = np.add.reduceat(a, (np.arange(side) * m) // side, axis=-2)
    rows /= np.diff(np.append((np.arange(side) * m) // side, m))[:, None]
    cols = np.add.reduceat(rows, (np.arange(side) * n) // side, axis=-1)
    cols /= np.diff(np.append((np.arange(side) * n) // side, n))
    return cols


def pixel_features(images, side: int, squash: float | None = None) -> np.ndarray:
    """Luminance, box-downsampled to ``side x side`` and flattened.

    With ``squash`` set, pixels pass through ``tanh(value / squash)`` after
    downsampling. The saturation makes the features nonlinear, so that a
    strong low band can hide a weaker high band.
    """
    stack = check_images(images)
    lum = to_luminance(stack, stacked=True)
    m, n = lum.shape[1:3]
    if not 1 <= side <= min(m, n):
        raise ValueError(f"side must be in [1, {min(m, n)}], got {side}")
    feats = _box_downsample(lum, side).reshape(len(lum), side * side)
    if squash is not None:
        feats = np.tanh(feats / squash)
    return feats


class PixelFeatures(TransformerMixin, BaseEstimator):
    """Default feature extractor; see :func:`pixel_features`."""

    def __init__(self, side=8, squash=None):
        self.side = side
        self.squash = squash

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        return pixel_features(X, self.side, self.squash)

    def __call__(self, X):
        return self.transform(X)


class GaussianHighpass(TransformerMixin, BaseEstimator):
    """Stateless transformer applying :func:`highpass_gaussian` per image."""

    def __init__(self, cutoff=0.0, n_jobs=None):
        self.cutoff = cutoff
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        return highpass_images(X, self.cutoff, n_jobs=self.n_jobs)


def _check_cutoffs(cutoffs):
    c = np.asarray(cutoffs, dtype=np.float64)
    if c.ndim != 1 or len(c) == 0:
        raise ValueError("cutoffs must be a non-empty list")
    if np.any(np.diff(c) <= 0):
        raise ValueError("cutoffs must be strictly increasing")
    if c[0] < 0 or c[-1] > MAX_CUTOFF:
        raise ValueError(f"cutoffs must lie in [0, {MAX_CUTOFF}]")
    return c


def fid_levels(set_a, set_b, cutoffs=DEFAULT_CUTOFFS, extractor=None,
               n_jobs: int | None = None) -> FidLevelsCurve:
    """Frechet distance between feature fits of two sets after each high-pass.

    ``extractor`` maps an image stack to a ``(count, dim)`` array; it
    defaults to ``PixelFeatures(side=8)``.
    """
    a = check_images(set_a, "set_a")
    b = check_images(set_b, "set_b")
    if a.shape[1:] != b.shape[1:]:
        raise ValueError(f"image sets differ in shape: {a.shape[1:]} vs {b.shape[1:]}")
    c = _check_cutoffs(cutoffs)
    extractor = PixelFeatures(side=min(8, a.shape[1], a.shape[2])) if extractor is None else extractor
    values = []
    for cutoff in c:
        fa = extractor(highpass_images(a, cutoff, n_jobs))
        fb = extractor(highpass_images(b, cutoff, n_jobs))
        values.append(frechet_distance(fit_moments(fa), fit_moments(fb)))
    return FidLevelsCurve(c, np.asarray(values))


def true_fid_levels(images, cutoffs=DEFAULT_CUTOFFS, extractor=None, seed: int = 0,
                    n_jobs: int | None = None) -> FidLevelsCurve:
    """FID Levels between two disjoint random halves of one image set."""
    stack = check_images(images)
    if len(stack) < 4:
        raise ValueError(f"need at least 4 images to split, got {len(stack)}")
    order = np.random.default_rng(seed).permutation(len(stack))
    half = len(stack) // 2
    return fid_levels(stack[order[:half]], stack[order[half:2 * half]], cutoffs, extractor, n_jobs)


def leakage_ratio(p: PowerSpectrum, q: PowerSpectrum) -> float:
    """Total variation (in percent) between DC-free normalized spectra."""
    if p.mode != "raw" or q.mode != "raw":
        raise ValueError("leakage_ratio expects raw spectra")
    if p.shape != q.shape:
        raise ValueError(f"spectrum shapes differ: {p.shape} vs {q.shape}")
    densities = []
    for s in (p, q):
        x = np.array(s.power, dtype=np.float64)
        x[(0, 0) + (slice(None),) * (x.ndim - 2)] = 0.0
        total = x.sum()
        if not total > 0:
            raise ValueError("spectrum has no non-DC power")
        densities.append(x / total)
    return float(50.0 * np.abs(densities[0] - densities[1]).sum())


def write_features(features, path) -> None:
    """``FSET``, uint32 count, uint32 dim, then float32 rows (all LE)."""
    f = np.ascontiguousarray(features, dtype="<f4")
    if f.ndim != 2:
        raise ValueError("features must be 2-D")
    with open(path, "wb") as fh:
        fh.write(FEATURES_MAGIC + struct.pack("<II", *f.shape) + f.tobytes())


def read_features(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != FEATURES_MAGIC or len(data) < 12:
        raise ValueError(f"{path}: not a feature file")
    count, dim = struct.unpack_from("<II", data, 4)
    if len(data) != 12 + 4 * count * dim:
        raise ValueError(f"{path}: expected {count}x{dim} floats, size is {len(data)} bytes")
    return np.frombuffer(data, dtype="<f4", offset=12).astype(np.float64).reshape(count, dim)


def write_curve_csv(curve: FidLevelsCurve, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("cutoff,value\n")
        for cutoff, value in curve:
            fh.write(f"{cutoff!r},{value!r}\n")
