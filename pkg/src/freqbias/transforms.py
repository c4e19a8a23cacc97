"""Frequency shifts: the checkerboard dataset transform and the complex shift."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import check_image, check_images

__all__ = [
    "ShiftTarget",
    "CheckerboardShift",
    "FrequencyShift",
    "checkerboard_shift",
    "complex_shift",
    "reshift_for_eval",
]


@dataclass(frozen=True)
class ShiftTarget:
    """Target frequency in cycles/pixel, each coordinate in ``[-0.5, 0.5)``."""

    u: float
    v: float

    def __post_init__(self):
        for name, val in (("u", self.u), ("v", self.v)):
            if not -0.5 <= val < 0.5:
                raise ValueError(f"target {name}={val} outside [-0.5, 0.5)")


def _checkerboard(m, n):
    x = np.arange(m)[:, None]
    y = np.arange(n)[None, :]
    return np.where((x + y) % 2 == 0, 1.0, -1.0)


def checkerboard_shift(image) -> np.ndarray:
    """Multiply by ``cos(pi (x + y)) = (-1)^(x + y)`` channel-wise.

    Moves the spectrum by half the grid in both directions and is its own
    inverse. On odd-sized grids the half-bin move has no DFT counterpart;
    the pointwise product is still applied.
    """
    a = check_image(image)
    m, n = a.shape[:2]
    if m % 2 or n % 2:
        warnings.warn(f"{m}x{n} grid is odd-sized; spectrum is not translated by whole bins",
                      RuntimeWarning, stacklevel=2)
    sign = _checkerboard(m, n)
    return a * (sign if a.ndim == 2 else sign[..., None])


def reshift_for_eval(image) -> np.ndarray:
    """Undo :func:`checkerboard_shift` before evaluating a shifted dataset."""
    return checkerboard_shift(image)


def complex_shift(g_real, g_imag, target: ShiftTarget) -> np.ndarray:
    """Real part of ``(g_real + j g_imag) * exp(j 2 pi (u_t x + v_t y))``.

    Equivalently ``g_real cos(phi) - g_imag sin(phi)`` with
    ``phi = 2 pi (u_t x + v_t y)``. Off-grid targets are allowed.
    """
    gr = check_image(g_real, name="g_real")
    gi = check_image(g_imag, name="g_imag")
    if gr.shape != gi.shape:
        raise ValueError(f"g_real and g_imag differ in shape: {gr.shape} vs {gi.shape}")
    if not isinstance(target, ShiftTarget):
        target = ShiftTarget(*target)
    m, n = gr.shape[:2]
    phi = 2.0 * np.pi * (target.u * np.arange(m)[:, None] + target.v * np.arange(n)[None, :])
    if gr.ndim == 3:
        phi = phi[..., None]
    return gr * np.cos(phi) - gi * np.sin(phi)


class CheckerboardShift(TransformerMixin, BaseEstimator):
    """Stack-level :func:`checkerboard_shift`; ``inverse_transform`` is the same map."""

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        stack = check_images(X)
        return np.stack([checkerboard_shift(im) for im in stack])

    def inverse_transform(self, X):
        return self.transform(X)


class FrequencyShift(TransformerMixin, BaseEstimator):
    """Shift a stack of complex images (``G_r + j G_i``) to ``(u, v)``.

    Real input stacks are treated as having a zero imaginary part.
    """

    def __init__(self, u=-0.5, v=-0.5):
        self.u = u
        self.v = v

    def fit(self, X=None, y=None):
        ShiftTarget(self.u, self.v)
        return self

    def transform(self, X):
        X = np.asarray(X)
        target = ShiftTarget(self.u, self.v)
        real = check_images(X.real)
        imag = check_images(X.imag) if np.iscomplexobj(X) else np.zeros_like(real)
        return np.stack([complex_shift(r, i, target) for r, i in zip(real, imag)])
