"""
Oversampled Fourier forward model.

The object ``x`` is an n-by-n complex array placed in the top-left corner of
an m-by-m zero frame. Measurements are the squared moduli of the unnormalized
2D DFT of that frame (numpy's ``fft2`` convention, kernel exp(-2 pi i k.r/m)).
"""
import numpy as np

from .errors import DimensionError, ValidationError

DEFAULT_TAU = 0.04


def as_image(x):
    """Validate and return ``x`` as a square, finite complex128 array."""
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != x.shape[1] or x.shape[0] == 0:
        raise DimensionError(f"expected a non-empty square image, got shape {x.shape}")
    x = x.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(x)):
        raise ValidationError("image contains non-finite values")
    return x


def as_pattern(y):
    """Validate and return ``y`` as a square, finite, nonnegative float64 array."""
    y = np.asarray(y)
    if y.ndim != 2 or y.shape[0] != y.shape[1] or y.shape[0] == 0:
        raise DimensionError(f"expected a non-empty square pattern, got shape {y.shape}")
    if np.iscomplexobj(y):
        raise ValidationError("diffraction pattern must be real")
    y = y.astype(np.float64, copy=False)
    if not np.all(np.isfinite(y)):
        raise ValidationError("pattern contains non-finite values")
    if np.any(y < 0):
        raise ValidationError("pattern contains negative intensities")
    return y


def check_oversampling(n, m):
    if m < 2 * n - 1:
        raise DimensionError(f"frame side m={m} too small for n={n}; need m >= {2 * n - 1}")


def pad(x, m):
    """Embed ``x`` in the top-left corner of an m-by-m zero frame."""
    n = x.shape[0]
    out = np.zeros((m, m), dtype=np.complex128)
    out[:n, :n] = x
    return out


def spectrum(x, m):
    """Unnormalized DFT of the padded object."""
    x = as_image(x)
    check_oversampling(x.shape[0], m)
    return np.fft.fft2(pad(x, m))


def forward_intensities(x, m):
    """Return Y = |F(pad(x))|^2 on the m-by-m grid."""
    f = spectrum(x, m)
    return f.real**2 + f.imag**2


def loss(y, x):
    """Squared Frobenius misfit ||y - |F x|^2||^2."""
    y = as_pattern(y)
    r = forward_intensities(x, y.shape[0]) - y
    return float(np.sum(r * r))


def loss_and_gradient(y, x):
    """Return ``(loss, grad)`` sharing one forward transform.

    ``grad`` packs dL/dRe(x) in its real part and dL/dIm(x) in its imaginary
    part.
    """
    y = as_pattern(y)
    x = as_image(x)
    m = y.shape[0]
    n = x.shape[0]
    f = spectrum(x, m)
    r = f.real**2 + f.imag**2 - y
    # adjoint of the unnormalized DFT is m^2 * ifft2
    back = np.fft.ifft2(r * f) * (m * m)
    return float(np.sum(r * r)), 4.0 * back[:n, :n]


def loss_gradient(y, x):
    return loss_and_gradient(y, x)[1]


def autocorrelation(y):
    """Inverse DFT of the intensities: the cyclic autocorrelation of the object."""
    return np.fft.ifft2(as_pattern(y))


def autocorrelation_support(y, tau=DEFAULT_TAU):
    """Loose support estimate ``|a| > tau * max|a|`` from the autocorrelation ``a``.

    The zero-lag pixel is always the maximum, so it is always included.
    """
    if not 0.0 < tau < 1.0:
        raise ValidationError(f"tau must lie in (0, 1), got {tau}")
    y = as_pattern(y)
    if not np.any(y > 0):
        raise ValidationError("cannot estimate support from an all-zero pattern")
    a = np.abs(autocorrelation(y))
    mask = a > tau * a.max()
    mask[0, 0] = True
    return mask
