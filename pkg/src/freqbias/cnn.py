"""Forward-only generative convolution stack with fixed-mask ReLUs.

Each layer computes ``H_next[i] = sum_c F[i, c] * Up(act(H[c]))``: the
nonlinearity acts on the layer input, nearest-neighbour upsampling follows,
and the convolution is circular with "same" output size. Activations are
channel-first arrays ``(channels, d, d)``.
"""
from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

import numpy as np

from .spectral import PowerSpectrum, power_spectrum

__all__ = [
    "LayerSpec",
    "StackSpec",
    "MaskStabilityReport",
    "default_stack",
    "init_weights",
    "upsample_nearest",
    "conv2d_circular",
    "forward",
    "record_masks",
    "ones_masks",
    "mask_stability",
    "impulse_response",
    "effective_filter_spectrum",
    "parse_stack",
    "format_stack",
    "read_stack",
    "write_stack",
    "read_weights",
    "write_weights",
]

RELU = "relu"
NONE = "none"
WEIGHTS_MAGIC = b"MCNW"


@dataclass(frozen=True)
class LayerSpec:
    in_channels: int
    out_channels: int
    k: int
    up: int = 1
    act: str = NONE

    def __post_init__(self):
        if self.k < 1 or self.k % 2 == 0:
            raise ValueError(f"kernel size must be odd and positive, got {self.k}")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be positive")
        if self.up not in (1, 2):
            raise ValueError(f"upsample factor must be 1 or 2, got {self.up}")
        if self.act not in (RELU, NONE):
            raise ValueError(f"unknown activation {self.act!r}")

    @property
    def weight_shape(self):
        return (self.out_channels, self.in_channels, self.k, self.k)


@dataclass(frozen=True)
class StackSpec:
    d0: int
    in_channels: int
    layers: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.d0 < 1:
            raise ValueError("input dimension must be positive")
        channels = self.in_channels
        for i, layer in enumerate(self.layers):
            if layer.in_channels != channels:
                raise ValueError(
                    f"layer {i + 1} expects {layer.in_channels} input channels, got {channels}"
                )
            channels = layer.out_channels

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def dims(self) -> list[int]:
        """Spatial size of the input to each layer, then of the output."""
        out = [self.d0]
        for layer in self.layers:
            out.append(out[-1] * layer.up)
        return out

    @property
    def out_dim(self) -> int:
        return self.dims[-1]

    @property
    def out_channels(self) -> int:
        return self.layers[-1].out_channels if self.layers else self.in_channels

    def input_shape(self, layer: int):
        """Shape of the input to 1-based ``layer``."""
        return (self.layers[layer - 1].in_channels, self.dims[layer - 1], self.dims[layer - 1])


@dataclass(frozen=True)
class MaskStabilityReport:
    epsilon: float
    stable_fraction: float
    measure_zero: bool


def default_stack() -> StackSpec:
    """Small four-layer generator: 4x4x8 latent grid to a 32x32 image."""
    return StackSpec(4, 8, (
        LayerSpec(8, 8, 3, up=2, act=NONE),
        LayerSpec(8, 4, 3, up=2, act=RELU),
        LayerSpec(4, 4, 3, up=2, act=RELU),
        LayerSpec(4, 1, 3, up=1, act=RELU),
    ))


def init_weights(stack: StackSpec, seed: int = 0) -> list[np.ndarray]:
    """I.i.d. normal taps scaled by ``1/sqrt(fan_in)``."""
    rng = np.random.default_rng(seed)
    weights = []
    for layer in stack.layers:
        fan_in = layer.in_channels * layer.k * layer.k
        weights.append(rng.standard_normal(layer.weight_shape) / np.sqrt(fan_in))
    return weights


def _check_weights(stack, weights):
    if len(weights) != stack.depth:
        raise ValueError(f"expected {stack.depth} weight tensors, got {len(weights)}")
    out = []
    for i, (layer, w) in enumerate(zip(stack.layers, weights)):
        w = np.asarray(w, dtype=np.float64)
        if w.shape != layer.weight_shape:
            raise ValueError(f"layer {i + 1} weights have shape {w.shape}, expected {layer.weight_shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError(f"layer {i + 1} weights are not finite")
        out.append(w)
    return out


def upsample_nearest(h: np.ndarray, factor: int = 2) -> np.ndarray:
    if factor == 1:
        return h
    return np.repeat(np.repeat(h, factor, axis=-2), factor, axis=-1)


def conv2d_circular(h: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Multi-channel circular convolution, kernel centered on its middle tap.

    ``out[i, x, y] = sum_{c, a, b} w[i, c, a, b] h[c, x - a + r, y - b + r]``
    with ``r = k // 2`` and indices taken modulo the grid size.
    """
    k = w.shape[-1]
    r = k // 2
    out = np.zeros((w.shape[0],) + h.shape[1:])
    for a in range(k):
        for b in range(k):
            shifted = np.roll(h, (a - r, b - r), axis=(1, 2))
            out += np.tensordot(w[:, :, a, b], shifted, axes=(1, 0))
    return out


def _run(stack, weights, h, mode, masks, start=1, record=None):
    activations = [h]
    for idx in range(start - 1, stack.depth):
        layer = stack.layers[idx]
        if layer.act == RELU:
            if record is not None:
                record[idx] = h > 0
            if mode == RELU:
                h = h * (h > 0)
            elif mode == "masked":
                h = h * masks[idx]
        h = conv2d_circular(upsample_nearest(h, layer.up), weights[idx])
        activations.append(h)
    return activations


def _check_masks(stack, masks, start=1):
    if masks is None or len(masks) != stack.depth:
        raise ValueError(f"masked mode needs {stack.depth} masks (None for layers without ReLU)")
    out = list(masks)
    for idx in range(start - 1, stack.depth):
        layer = stack.layers[idx]
        if layer.act != RELU:
            continue
        expected = stack.input_shape(idx + 1)
        if out[idx] is None or np.shape(out[idx]) != expected:
            raise ValueError(f"mask for layer {idx + 1} must have shape {expected}")
        out[idx] = np.asarray(out[idx], dtype=np.float64)
    return out


def forward(stack: StackSpec, weights, h1, mode: str = RELU, masks=None):
    """Run the stack; return the list of activations ``[H1, ..., H_out]``.

    ``mode`` is ``"relu"``, ``"linear"`` (nonlinearity skipped) or
    ``"masked"`` (each ReLU replaced by multiplication with ``masks[l]``).
    """
    if mode not in (RELU, "linear", "masked"):
        raise ValueError(f"unknown mode {mode!r}")
    weights = _check_weights(stack, weights)
    h1 = np.asarray(h1, dtype=np.float64)
    if h1.shape != stack.input_shape(1):
        raise ValueError(f"input must have shape {stack.input_shape(1)}, got {h1.shape}")
    if mode == "masked":
        masks = _check_masks(stack, masks)
    return _run(stack, weights, h1, mode, masks)


def record_masks(stack: StackSpec, weights, h1) -> list:
    """Binary masks of strictly positive ReLU inputs in a relu-mode pass.

    Entries for layers without a ReLU are ``None``.
    """
    weights = _check_weights(stack, weights)
    h1 = np.asarray(h1, dtype=np.float64)
    if h1.shape != stack.input_shape(1):
        raise ValueError(f"input must have shape {stack.input_shape(1)}, got {h1.shape}")
    record = [None] * stack.depth
    _run(stack, weights, h1, RELU, None, record=record)
    return [None if m is None else m.astype(np.float64) for m in record]


def ones_masks(stack: StackSpec) -> list:
    return [np.ones(stack.input_shape(i + 1)) if layer.act == RELU else None
            for i, layer in enumerate(stack.layers)]


def _relu_inputs(stack, weights, h1):
    pre = []
    h = h1
    for idx, layer in enumerate(stack.layers):
        if layer.act == RELU:
            pre.append(h)
            h = h * (h > 0)
        h = conv2d_circular(upsample_nearest(h, layer.up), weights[idx])
    return pre


def mask_stability(stack: StackSpec, weights, h1, trials: int = 100, seed: int = 0,
                   start: float = 1e-2, floor: float = 1e-10) -> MaskStabilityReport:
    """Largest tested weight perturbation that leaves every ReLU mask unchanged.

    Perturbations are ``eps * rms(weights) * direction`` for ``trials``
    random unit directions in the full parameter space. ``eps`` is searched
    by bisection on a log scale between ``floor`` and ``start``. If masks
    still flip at ``floor`` the parameters sit on a mask boundary; this is
    flagged as the measure-zero case. Exactly-zero ReLU inputs that do not
    depend on the weights stay zero under perturbation and are not flagged.
    """
    if trials < 10:
        raise ValueError("trials must be at least 10")
    weights = _check_weights(stack, weights)
    h1 = np.asarray(h1, dtype=np.float64)
    base = [p > 0 for p in _relu_inputs(stack, weights, h1)]
    flat = np.concatenate([w.ravel() for w in weights])
    rms = np.sqrt(np.mean(flat**2))
    sizes = np.cumsum([w.size for w in weights])[:-1]

    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((trials, flat.size))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)

    def stable_fraction(eps):
        hits = 0
        for direction in directions:
            perturbed = flat + eps * rms * direction
            ws = [p.reshape(w.shape) for p, w in zip(np.split(perturbed, sizes), weights)]
            masks = [p > 0 for p in _relu_inputs(stack, ws, h1)]
            hits += all(np.array_equal(a, b) for a, b in zip(masks, base))
        return hits / trials

    if stable_fraction(start) == 1.0:
        return MaskStabilityReport(start, 1.0, False)
    frac_lo = stable_fraction(floor)
    if frac_lo < 1.0:
        return MaskStabilityReport(floor, frac_lo, True)
    lo, hi = np.log10(floor), np.log10(start)
    while hi - lo > 0.25:
        mid = 0.5 * (lo + hi)
        f = stable_fraction(10.0**mid)
        if f == 1.0:
            lo, frac_lo = mid, f
        else:
            hi = mid
    return MaskStabilityReport(float(10.0**lo), frac_lo, False)


def impulse_response(stack: StackSpec, weights, layer: int, channel: int, masks=None):
    """End-to-end response of layers ``layer..L`` to a centered unit impulse.

    The impulse sits at ``(d // 2, d // 2)`` of input channel ``channel`` of
    the 1-based ``layer``; ReLUs from there on are replaced by ``masks``
    (all ones when omitted). Returns the output activation
    ``(out_channels, d, d)``.
    """
    if not 1 <= layer <= stack.depth:
        raise ValueError(f"layer must be in [1, {stack.depth}], got {layer}")
    shape = stack.input_shape(layer)
    if not 0 <= channel < shape[0]:
        raise ValueError(f"channel must be in [0, {shape[0]}), got {channel}")
    weights = _check_weights(stack, weights)
    masks = _check_masks(stack, ones_masks(stack) if masks is None else masks, start=layer)
    h = np.zeros(shape)
    h[channel, shape[1] // 2, shape[2] // 2] = 1.0
    return _run(stack, weights, h, "masked", masks, start=layer)[-1]


def effective_filter_spectrum(stack: StackSpec, weights, layer: int, channel: int,
                              masks=None) -> PowerSpectrum:
    """Power spectrum of :func:`impulse_response`, summed over output channels."""
    response = impulse_response(stack, weights, layer, channel, masks)
    total = sum(power_spectrum(r).power for r in response)
    return PowerSpectrum(total)


_INPUT_RE = re.compile(r"^input\s+d0=(\d+)\s+ch=(\d+)$")
_CONV_RE = re.compile(r"^conv\s+in=(\d+)\s+out=(\d+)\s+k=(\d+)\s+up=(\d+)\s+act=(\w+)$")


def parse_stack(text: str) -> StackSpec:
    """Parse the line-oriented stack description (``#`` starts a comment)."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty stack description")
    head = _INPUT_RE.match(lines[0])
    if head is None:
        raise ValueError(f"first line must be 'input d0=<n> ch=<c>', got {lines[0]!r}")
    layers = []
    for ln in lines[1:]:
        m = _CONV_RE.match(ln)
        if m is None:
            raise ValueError(f"cannot parse layer line {ln!r}")
        cin, cout, k, up, act = m.groups()
        layers.append(LayerSpec(int(cin), int(cout), int(k), int(up), act))
    return StackSpec(int(head.group(1)), int(head.group(2)), tuple(layers))


def format_stack(stack: StackSpec) -> str:
    lines = [f"input d0={stack.d0} ch={stack.in_channels}"]
    for layer in stack.layers:
        lines.append(f"conv in={layer.in_channels} out={layer.out_channels} "
                     f"k={layer.k} up={layer.up} act={layer.act}")
    return "\n".join(lines) + "\n"


def read_stack(path) -> StackSpec:
    with open(path) as fh:
        return parse_stack(fh.read())


def write_stack(stack: StackSpec, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_stack(stack))


def write_weights(weights, path) -> None:
    """``MCNW`` then, per layer, a uint32 tap count and float32 taps (LE)."""
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        for w in weights:
            w = np.ascontiguousarray(w, dtype="<f4")
            fh.write(struct.pack("<I", w.size))
            fh.write(w.tobytes())


def read_weights(path, stack: StackSpec) -> list[np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != WEIGHTS_MAGIC:
        raise ValueError(f"{path}: bad magic, not a weight file")
    pos = 4
    weights = []
    for i, layer in enumerate(stack.layers):
        if pos + 4 > len(data):
            raise ValueError(f"{path}: truncated before layer {i + 1}")
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        expected = int(np.prod(layer.weight_shape))
        if count != expected:
            raise ValueError(f"{path}: layer {i + 1} has {count} taps, expected {expected}")
        if pos + 4 * count > len(data):
            raise ValueError(f"{path}: truncated in layer {i + 1}")
        taps = np.frombuffer(data, dtype="<f4", count=count, offset=pos)
        weights.append(taps.astype(np.float64).reshape(layer.weight_shape))
        pos += 4 * count
    if pos != len(data):
        raise ValueError(f"{path}: {len(data) - pos} trailing bytes")
    return weights
