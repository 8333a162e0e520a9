"""
Untrained deep-decoder generator with a hand-written backward pass.

Each hidden layer applies, in order: bilinear 2x upsampling, a 1x1 channel
mixing, ReLU, per-channel spatial normalization and a per-channel affine
(gain, bias). A final 1x1 mixing with bias produces either two channels
(real and imaginary parts) or one channel passed through a sigmoid.

Feature maps are stored as ``(channels, height, width)`` float64 arrays.
Mixing matrices have shape ``(in_channels, out_channels)``.
"""
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import DimensionError, ValidationError

COMPLEX2CH = "complex2ch"
REAL_SIGMOID = "real_sigmoid"
OUTPUT_MODES = (COMPLEX2CH, REAL_SIGMOID)


@dataclass(frozen=True)
class DecoderConfig:
    num_layers: int = 3
    channels: int = 32
    seed_side: int = 4
    output_mode: str = COMPLEX2CH
    norm_epsilon: float = 1e-6

    def __post_init__(self):
        for name in ("num_layers", "channels", "seed_side"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValidationError(f"{name} must be a positive integer, got {value!r}")
        if self.output_mode not in OUTPUT_MODES:
            raise ValidationError(f"output_mode must be one of {OUTPUT_MODES}, got {self.output_mode!r}")
        if not self.norm_epsilon > 0:
            raise ValidationError("norm_epsilon must be positive")

    @property
    def output_side(self):
        return self.seed_side * 2**self.num_layers

    @property
    def out_channels(self):
        return 2 if self.output_mode == COMPLEX2CH else 1

    @classmethod
    def for_output(cls, n, num_layers=3, channels=32, **kwargs):
        """Pick ``seed_side`` so the generator emits an n-by-n image."""
        scale = 2**num_layers
        if n % scale:
            raise ValidationError(f"output side {n} is not divisible by 2**{num_layers}")
        return cls(num_layers=num_layers, channels=channels, seed_side=n // scale, **kwargs)


# Full-scale architecture: 8 * 2**4 = 128 output pixels per side.
FULL_SCALE = DecoderConfig(num_layers=4, channels=64, seed_side=8)
DESK_SCALE = DecoderConfig(num_layers=3, channels=32, seed_side=4)


@dataclass
class DecoderWeights:
    mix: List[np.ndarray]
    gain: List[np.ndarray]
    bias: List[np.ndarray]
    out_mix: np.ndarray
    out_bias: np.ndarray

    def arrays(self):
        """All tensors in a fixed order (used by the optimizer and checkpoints)."""
        out = []
        for w, g, b in zip(self.mix, self.gain, self.bias):
            out.extend((w, g, b))
        out.extend((self.out_mix, self.out_bias))
        return out

    @classmethod
    def from_arrays(cls, arrays):
        arrays = list(arrays)
        if len(arrays) < 2 or (len(arrays) - 2) % 3:
            raise DimensionError(f"cannot unpack {len(arrays)} tensors into decoder weights")
        hidden = arrays[:-2]
        return cls(
            mix=list(hidden[0::3]),
            gain=list(hidden[1::3]),
            bias=list(hidden[2::3]),
            out_mix=arrays[-2],
            out_bias=arrays[-1],
        )

    def names(self):
        names = []
        for i in range(len(self.mix)):
            names.extend((f"mix{i}", f"gain{i}", f"bias{i}"))
        return names + ["out_mix", "out_bias"]

    def num_params(self):
        return int(sum(a.size for a in self.arrays()))

    def copy(self):
        return DecoderWeights.from_arrays([a.copy() for a in self.arrays()])


# Gradients have exactly the same layout as the weights.
WeightGradients = DecoderWeights


def expected_shapes(cfg):
    k, c = cfg.channels, cfg.out_channels
    shapes = [(k, k), (k,), (k,)] * cfg.num_layers
    return shapes + [(k, c), (c,)]


def check_weights(w, cfg):
    got = [a.shape for a in w.arrays()]
    if got != expected_shapes(cfg):
        raise DimensionError("decoder weights do not match the configuration")


def num_params(cfg):
    return int(sum(np.prod(s) for s in expected_shapes(cfg)))


def init_decoder(cfg, rng_seed):
    """Draw fresh weights and the frozen seed tensor.

    Seed entries are uniform on [0, 1); mixing entries are Gaussian with
    standard deviation sqrt(2/k); gains start at 1 and biases at 0.
    """
    rng = np.random.default_rng(rng_seed)
    k = cfg.channels
    z = rng.random((k, cfg.seed_side, cfg.seed_side))
    std = np.sqrt(2.0 / k)
    mix = [rng.normal(0.0, std, (k, k)) for _ in range(cfg.num_layers)]
    out_mix = rng.normal(0.0, std, (k, cfg.out_channels))
    w = DecoderWeights(
        mix=mix,
        gain=[np.ones(k) for _ in range(cfg.num_layers)],
        bias=[np.zeros(k) for _ in range(cfg.num_layers)],
        out_mix=out_mix,
        out_bias=np.zeros(cfg.out_channels),
    )
    z.setflags(write=False)
    return w, z


def upsample_matrix(size, scale=2):
    """Bilinear interpolation matrix of shape (scale*size, size).

    Uses the half-pixel (align-corners-false) convention: output pixel i
    samples source coordinate (i + 0.5)/scale - 0.5, clamped to the border.
    """
    out = np.zeros((scale * size, size))
    src = (np.arange(scale * size) + 0.5) / scale - 0.5
    src = np.clip(src, 0.0, size - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, size - 1)
    frac = src - lo
    rows = np.arange(scale * size)
    np.add.at(out, (rows, lo), 1.0 - frac)
    np.add.at(out, (rows, hi), frac)
    return out


def upsample(x, mat):
    # x: (k, s, s) -> (k, 2s, 2s)
    return np.matmul(np.matmul(mat, x), mat.T)


def upsample_adjoint(g, mat):
    return np.matmul(np.matmul(mat.T, g), mat)


def mix_channels(x, w):
    k, h, wd = x.shape
    return (w.T @ x.reshape(k, h * wd)).reshape(w.shape[1], h, wd)


def mix_channels_backward(x, w, g):
    """Gradients of ``mix_channels(x, w)`` w.r.t. ``x`` and ``w`` given upstream ``g``."""
    k = x.shape[0]
    xf = x.reshape(k, -1)
    gf = g.reshape(w.shape[1], -1)
    return (w @ gf).reshape(x.shape), xf @ gf.T


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class LayerCache:
    up: np.ndarray
    pre: np.ndarray
    normed: np.ndarray
    inv_std: np.ndarray


@dataclass
class ForwardTape:
    layers: List[LayerCache] = field(default_factory=list)
    features: np.ndarray = None
    output: np.ndarray = None
    shapes: tuple = ()


def decoder_forward(w, z, cfg):
    """Evaluate the generator; returns the n-by-n complex image and the tape."""
    check_weights(w, cfg)
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (cfg.channels, cfg.seed_side, cfg.seed_side):
        raise DimensionError(f"seed tensor has shape {z.shape}, expected {(cfg.channels, cfg.seed_side, cfg.seed_side)}")
    tape = ForwardTape(shapes=tuple(a.shape for a in w.arrays()))
    h = z
    for mix, gain, bias in zip(w.mix, w.gain, w.bias):
        up = upsample(h, upsample_matrix(h.shape[1]))
        pre = mix_channels(up, mix)
        act = np.maximum(pre, 0.0)
        mean = act.mean(axis=(1, 2), keepdims=True)
        centered = act - mean
        var = np.mean(centered * centered, axis=(1, 2), keepdims=True)
        inv_std = 1.0 / np.sqrt(var + cfg.norm_epsilon)
        normed = centered * inv_std
        h = gain[:, None, None] * normed + bias[:, None, None]
        tape.layers.append(LayerCache(up=up, pre=pre, normed=normed, inv_std=inv_std))
    tape.features = h
    out = mix_channels(h, w.out_mix) + w.out_bias[:, None, None]
    if cfg.output_mode == COMPLEX2CH:
        image = out[0] + 1j * out[1]
    else:
        out = sigmoid(out)
        image = out[0].astype(np.complex128)
    tape.output = out
    return image, tape


def decoder_backward(tape, grad_out, w, cfg):
    """Backpropagate an image-space gradient to every weight.

    ``grad_out`` uses the packed convention of :func:`prdecoder.field.loss_gradient`
    (real part = d/dRe, imaginary part = d/dIm).
    """
    if tape.shapes != tuple(a.shape for a in w.arrays()) or len(tape.layers) != cfg.num_layers:
        raise ValidationError("forward tape does not belong to these weights")
    grad_out = np.asarray(grad_out)
    n = cfg.output_side
    if grad_out.shape != (n, n):
        raise DimensionError(f"upstream gradient has shape {grad_out.shape}, expected {(n, n)}")

    if cfg.output_mode == COMPLEX2CH:
        g = np.stack([grad_out.real, grad_out.imag]).astype(np.float64)
    else:
        s = tape.output
        g = np.real(grad_out)[None].astype(np.float64) * s * (1.0 - s)

    grads_out_bias = g.sum(axis=(1, 2))
    g, grads_out_mix = mix_channels_backward(tape.features, w.out_mix, g)

    mix_g, gain_g, bias_g = [], [], []
    for layer, cache in zip(range(cfg.num_layers - 1, -1, -1), reversed(tape.layers)):
        bias_g.append(g.sum(axis=(1, 2)))
        gain_g.append(np.sum(g * cache.normed, axis=(1, 2)))
        gn = g * w.gain[layer][:, None, None]
        # backward of per-channel standardization
        mean_gn = gn.mean(axis=(1, 2), keepdims=True)
        mean_gnx = np.mean(gn * cache.normed, axis=(1, 2), keepdims=True)
        g_act = cache.inv_std * (gn - mean_gn - cache.normed * mean_gnx)
        g_pre = np.where(cache.pre > 0, g_act, 0.0)
        g_up, g_mix = mix_channels_backward(cache.up, w.mix[layer], g_pre)
        mix_g.append(g_mix)
        g = upsample_adjoint(g_up, upsample_matrix(g_up.shape[1] // 2))

    return WeightGradients(
        mix=mix_g[::-1],
        gain=gain_g[::-1],
        bias=bias_g[::-1],
        out_mix=grads_out_mix,
        out_bias=grads_out_bias,
    )
