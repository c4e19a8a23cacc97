"""Correlation between DFT bins of small filters zero-padded to a layer grid.

A ``k x k`` filter with i.i.d. zero-mean taps, viewed on a ``d x d`` grid,
has correlated spectral components. The closed form is the aliased sinc
(Dirichlet kernel) of the bin offset divided by ``k**2``; this module
evaluates it, checks it against an explicit geometric sum, and estimates it
by Monte Carlo.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FilterShape",
    "CorrelationEstimate",
    "aliased_sinc",
    "analytic_corr",
    "adjacent_diag_corr",
    "brute_force_corr",
    "monte_carlo_corr",
    "corr_curve",
]

_CHUNK = 8192


@dataclass(frozen=True)
class FilterShape:
    """Filter side ``k`` (taps) inside a layer of side ``d`` (bins)."""

    k: int
    d: int

    def __post_init__(self):
        if int(self.k) != self.k or int(self.d) != self.d:
            raise ValueError("k and d must be integers")
        if not 1 < self.k <= self.d:
            raise ValueError(f"need 1 < k <= d, got k={self.k}, d={self.d}")


@dataclass(frozen=True)
class CorrelationEstimate:
    value: complex
    sample_count: int
    standard_error: float

    @property
    def magnitude(self) -> float:
        return float(abs(self.value))


def _dirichlet(u, k, d):
    """``sin(pi u k / d) / sin(pi u / d)`` with the limit taken at ``u = j d``."""
    u = np.asarray(u, dtype=np.float64)
    r = u / d
    j = np.round(r)
    singular = np.isclose(r, j, rtol=0.0, atol=1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.sin(np.pi * u * k / d) / np.sin(np.pi * u / d)
    # L'Hopital at u = j d: k cos(pi j k) / cos(pi j) = k (-1)^(j (k - 1))
    limit = k * np.where(np.mod(j * (k - 1), 2) == 0, 1.0, -1.0)
    return np.where(singular, limit, ratio)


def aliased_sinc(u, v, shape: FilterShape):
    """DFT of the ``k x k`` box on a ``d x d`` grid, phase term included.

    Accepts scalars or broadcastable arrays of (possibly fractional) bin
    offsets.
    """
    k, d = shape.k, shape.d
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    phase = np.exp(-1j * np.pi * (u + v) * (k - 1) / d)
    out = _dirichlet(u, k, d) * _dirichlet(v, k, d) * phase
    return out[()] if out.ndim == 0 else out


def analytic_corr(du, dv, shape: FilterShape):
    """Complex correlation of two bins separated by ``(du, dv)``."""
    return aliased_sinc(du, dv, shape) / shape.k**2


def adjacent_diag_corr(shape: FilterShape) -> float:
    """``sin^2(pi k / d) / (k^2 sin^2(pi / d))`` for diagonal neighbours."""
    k, d = shape.k, shape.d
    return float(np.sin(np.pi * k / d) ** 2 / (k**2 * np.sin(np.pi / d) ** 2))


def brute_force_corr(du, dv, shape: FilterShape):
    """Correlation from the explicit tap sums, independent of the sinc form.

    For i.i.d. taps, ``E[U V*]`` reduces to the sum over the filter support
    of ``exp(-j 2 pi (du x + dv y) / d)``; the variance of each bin is
    ``k**2`` times the tap variance.
    """
    k, d = shape.k, shape.d
    du = np.asarray(du, dtype=np.float64)
    dv = np.asarray(dv, dtype=np.float64)
    taps = np.arange(k)
    sx = np.exp(-2j * np.pi * du[..., None] * taps / d).sum(axis=-1)
    sy = np.exp(-2j * np.pi * dv[..., None] * taps / d).sum(axis=-1)
    out = sx * sy / k**2
    return out[()] if out.ndim == 0 else out


def _bin_projection(shape: FilterShape, u: int, v: int) -> np.ndarray:
    """Row vector mapping flattened ``k x k`` taps to DFT bin ``(u, v)``."""
    x = np.arange(shape.k)
    return np.outer(np.exp(-2j * np.pi * u * x / shape.d),
                    np.exp(-2j * np.pi * v * x / shape.d)).ravel()


def monte_carlo_corr(shape: FilterShape, bin_a, bin_b, n_samples: int = 100_000,
                     seed: int = 0, n_jobs: int | None = None) -> CorrelationEstimate:
    """Sample the bin correlation over random standard-normal filters.

    Each filter is conceptually zero-padded to ``d x d`` and transformed;
    only the two requested DFT coefficients are evaluated. Samples are drawn
    in fixed-size chunks, chunk ``i`` from a Philox stream keyed by
    ``(seed, i)``, so the estimate is identical for any ``n_jobs``.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    for b in (bin_a, bin_b):
        if not all(0 <= c < shape.d for c in b):
            raise ValueError(f"bin {b} outside [0, {shape.d})^2")
    pa = _bin_projection(shape, *bin_a)
    pb = _bin_projection(shape, *bin_b)
    n_chunks = -(-n_samples // _CHUNK)

    def draw(i):
        count = min(_CHUNK, n_samples - i * _CHUNK)
        rng = np.random.Generator(np.random.Philox(key=[seed, i]))
        taps = rng.standard_normal((count, shape.k * shape.k))
        return taps @ pa, taps @ pb

    with ThreadPoolExecutor(max_workers=n_jobs or 1) as pool:
        parts = list(pool.map(draw, range(n_chunks)))
    a = np.concatenate([p[0] for p in parts])
    b = np.concatenate([p[1] for p in parts])
    a = a - a.mean()
    b = b - b.mean()
    cov = np.mean(a * np.conj(b))
    var_a = np.mean(a * np.conj(a)).real
    var_b = np.mean(b * np.conj(b)).real
    if not (var_a > 0 and var_b > 0):
        raise ValueError("degenerate variance in sampled bins")
    value = complex(cov / np.sqrt(var_a * var_b))
    return CorrelationEstimate(value, n_samples, float(1.0 / np.sqrt(n_samples)))


def corr_curve(k: int, d_values) -> list[tuple[int, float]]:
    """Diagonal-neighbour correlation for each layer size in ``d_values``."""
    return [(int(d), adjacent_diag_corr(FilterShape(k, int(d)))) for d in d_values]
