"""
Symmetry-resolved error metrics.

Fourier intensities are unchanged by cyclic translation of the padded frame,
conjugate flipping and a global phase factor, so a recovery is compared to
the ground truth only after the best such transformation has been applied.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError
from .field import as_image, as_pattern, forward_intensities, pad


@dataclass(frozen=True)
class Alignment:
    """Best symmetry transformation mapping a recovery onto the ground truth.

    The aligned recovery is ``exp(1j * phase) * s(xhat)[(r + shift) mod m]``
    where ``s`` is the conjugate flip when ``flipped`` is set.
    """
    shift: tuple
    flipped: bool
    phase: float
    rel_error: float

    def to_dict(self):
        return {
            "rel_error": float(self.rel_error),
            "shift_row": int(self.shift[0]),
            "shift_col": int(self.shift[1]),
            "flipped": bool(self.flipped),
            "phase": float(self.phase),
        }


def conjugate_flip(frame):
    """``conj(frame[(-r) mod m])`` on the padded grid."""
    return np.conj(np.roll(frame[::-1, ::-1], 1, axis=(0, 1)))


def _frames(x, xhat, m):
    x = as_image(x)
    xhat = as_image(xhat)
    if x.shape != xhat.shape:
        raise DimensionError(f"image shapes differ: {x.shape} vs {xhat.shape}")
    if m < x.shape[0]:
        raise DimensionError(f"frame side {m} is smaller than the image side {x.shape[0]}")
    return pad(x, m), pad(xhat, m)


def best_symmetry_alignment(x, xhat, m=None):
    """Globally optimal alignment of ``xhat`` to ``x`` over integer cyclic shifts,
    conjugate flip and global phase.
    """
    m = 2 * np.shape(x)[0] if m is None else m
    fx, fh = _frames(x, xhat, m)
    norm_x = np.vdot(fx, fx).real
    if norm_x == 0:
        raise ValidationError("ground truth is identically zero")

    spec_x = np.fft.fft2(fx)
    best = None
    for flipped, h in ((False, fh), (True, conjugate_flip(fh))):
        # corr[t] = sum_r x(r) conj(h(r - t))
        corr = np.fft.ifft2(spec_x * np.conj(np.fft.fft2(h)))
        idx = np.unravel_index(np.argmax(np.abs(corr)), corr.shape)
        peak = corr[idx]
        # prefer the unflipped copy on numerical ties
        if best is None or abs(peak) > abs(best[2]) * (1 + 1e-12):
            best = (flipped, idx, peak)

    flipped, idx, _ = best
    shift = (int((-idx[0]) % m), int((-idx[1]) % m))
    h = conjugate_flip(fh) if flipped else fh
    h = np.roll(h, (-shift[0], -shift[1]), axis=(0, 1))
    # direct inner product: exact (real) for identical inputs, unlike the FFT peak
    peak = np.vdot(h, fx)
    phase = float(np.angle(peak)) if abs(peak) > 0 else 0.0
    if phase >= np.pi:
        phase -= 2 * np.pi
    aligned = np.exp(1j * phase) * h
    # direct residual; norm_x + norm_h - 2|peak| cancels catastrophically near zero
    err = np.linalg.norm(fx - aligned) / np.sqrt(norm_x)
    return Alignment(shift=shift, flipped=flipped, phase=phase, rel_error=float(err))


def apply_alignment(xhat, alignment, m=None):
    """Return the m-by-m padded recovery moved onto the ground truth."""
    xhat = as_image(xhat)
    m = 2 * xhat.shape[0] if m is None else m
    h = pad(xhat, m)
    if alignment.flipped:
        h = conjugate_flip(h)
    h = np.roll(h, (-alignment.shift[0], -alignment.shift[1]), axis=(0, 1))
    return np.exp(1j * alignment.phase) * h


def fourier_residual(y, xhat):
    """Relative measurement misfit ``||y - |F xhat|^2|| / ||y||``."""
    y = as_pattern(y)
    norm = np.linalg.norm(y)
    if norm == 0:
        raise ValidationError("measurement is identically zero")
    return float(np.linalg.norm(y - forward_intensities(xhat, y.shape[0])) / norm)


def metrics_record(x, xhat, y=None):
    """Metrics dictionary with the public JSON keys."""
    x = as_image(x)
    m = 2 * x.shape[0]
    if y is None:
        y = forward_intensities(x, m)
    out = best_symmetry_alignment(x, xhat, np.shape(y)[0]).to_dict()
    out["fourier_residual"] = fourier_residual(y, xhat)
    return out
