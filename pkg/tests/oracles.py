"""Slow reference implementations used only as test oracles."""
import numpy as np


def direct_dft(image):
    """Textbook double sum, independent of any FFT."""
    m, n = image.shape
    x = np.arange(m)
    y = np.arange(n)
    ex = np.exp(-2j * np.pi * np.outer(x, x) / m)
    ey = np.exp(-2j * np.pi * np.outer(y, y) / n)
    return ex @ image @ ey.T


def loop_forward(stack, weights, h, masks=None, start=1):
    """Nested-loop pass with explicit modular indexing and index-halving upsampling.

    ReLUs are replaced by ``masks`` when given, otherwise applied as max(0, .).
    """
    h = np.array(h, dtype=np.float64)
    for idx in range(start - 1, stack.depth):
        layer = stack.layers[idx]
        w = weights[idx]
        if layer.act == "relu":
            h = h * masks[idx] if masks is not None else np.maximum(h, 0.0)
        c_in, d, _ = h.shape
        big = d * layer.up
        up = np.empty((c_in, big, big))
        for x in range(big):
            for y in range(big):
                up[:, x, y] = h[:, x // layer.up, y // layer.up]
        r = layer.k // 2
        out = np.zeros((layer.out_channels, big, big))
        for i in range(layer.out_channels):
            for x in range(big):
                for y in range(big):
                    acc = 0.0
                    for c in range(c_in):
                        for a in range(layer.k):
                            for b in range(layer.k):
                                acc += w[i, c, a, b] * up[c, (x - a + r) % big, (y - b + r) % big]
                    out[i, x, y] = acc
        h = out
    return h


def spatial_support(response, tol=1e-12):
    """Number of output pixels where any channel is nonzero."""
    return int(np.count_nonzero(np.max(np.abs(response), axis=0) > tol))


def random_stack(rng, depth=3, d0=None, max_channels=3):
    from freqbias.cnn import LayerSpec, StackSpec

    channels = [int(rng.integers(1, max_channels + 1)) for _ in range(depth + 1)]
    layers = []
    for i in range(depth):
        layers.append(LayerSpec(channels[i], channels[i + 1], int(rng.choice([1, 3, 5])),
                                up=int(rng.choice([1, 2])), act=str(rng.choice(["relu", "none"]))))
    d0 = int(rng.integers(3, 6)) if d0 is None else d0
    return StackSpec(d0, channels[0], tuple(layers))


def disc_image(size, area):
    """Disc of the given area centered on the grid, 4x supersampled."""
    s = 4
    radius = np.sqrt(area / np.pi) * s
    c = np.arange(size * s) + 0.5 - size * s / 2
    fine = (c[:, None] ** 2 + c[None, :] ** 2 <= radius**2).astype(np.float64)
    return fine.reshape(size, s, size, s).mean(axis=(1, 3))


def high_band_share(power, threshold=0.25):
    """Fraction of non-DC power at radial frequency above ``threshold``."""
    m, n = power.shape
    u = np.fft.fftfreq(m)[:, None]
    v = np.fft.fftfreq(n)[None, :]
    r = np.sqrt(u**2 + v**2)
    p = np.array(power, dtype=np.float64)
    p[0, 0] = 0.0
    return float(p[r > threshold].sum() / p.sum())
