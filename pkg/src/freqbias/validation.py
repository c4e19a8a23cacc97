"""Input validation helpers shared by the estimators and functions.

Images are numpy arrays indexed ``[x, y]`` or ``[x, y, channel]``; axis 0 has
length ``m`` and axis 1 has length ``n``. Image stacks carry a leading sample
axis: ``(count, m, n)`` for single-channel data and ``(count, m, n, C)`` for
multi-channel data.
"""
import numpy as np

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def check_finite(a, name="input"):
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def check_image(image, allow_channels=True, name="image"):
    """Return ``image`` as a float (or complex) array after shape checks."""
    a = np.asarray(image)
    if not (np.issubdtype(a.dtype, np.floating) or np.issubdtype(a.dtype, np.complexfloating)):
        a = a.astype(np.float64)
    if a.ndim == 3 and allow_channels:
        if a.shape[2] not in (1, 3):
            raise ValueError(f"{name} must have 1 or 3 channels, got {a.shape[2]}")
    elif a.ndim != 2:
        raise ValueError(f"{name} must be 2-D (m, n) or 3-D (m, n, C), got shape {a.shape}")
    if a.shape[0] < 2 or a.shape[1] < 2:
        raise ValueError(f"{name} must be at least 2x2, got {a.shape[:2]}")
    return check_finite(a, name)


def check_images(images, name="images"):
    """Stack a sequence of same-sized images into one array.

    A 3-D array is read as a grayscale stack ``(count, m, n)``; pass a list to
    disambiguate a single-image stack of a color image.
    """
    if isinstance(images, np.ndarray):
        a = images
        if a.ndim not in (3, 4):
            raise ValueError(f"{name} must be a stack (count, m, n[, C]), got shape {a.shape}")
    else:
        images = list(images)
        if not images:
            raise ValueError(f"{name} is empty")
        shapes = {np.shape(im) for im in images}
        if len(shapes) != 1:
            raise ValueError(f"{name} have mismatched dimensions: {sorted(shapes)}")
        a = np.stack([np.asarray(im) for im in images])
    if len(a) == 0:
        raise ValueError(f"{name} is empty")
    if not np.issubdtype(a.dtype, np.floating):
        a = a.astype(np.float64)
    if a.ndim == 4 and a.shape[3] not in (1, 3):
        raise ValueError(f"{name} must have 1 or 3 channels, got {a.shape[3]}")
    if a.shape[1] < 2 or a.shape[2] < 2:
        raise ValueError(f"{name} must be at least 2x2, got {a.shape[1:3]}")
    return check_finite(a, name)


def to_luminance(image, stacked=False):
    """Reduce color data to luminance (0.299 R + 0.587 G + 0.114 B).

    The trailing axis is a channel axis only when the array has one more
    dimension than a grayscale image (or stack, if ``stacked``).
    """
    a = np.asarray(image, dtype=np.float64)
    if a.ndim != (4 if stacked else 3):
        return a
    if a.shape[-1] == 3:
        return a @ LUMA_WEIGHTS
    return a[..., 0]
