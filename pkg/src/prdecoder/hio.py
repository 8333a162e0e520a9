"""
Plain hybrid input-output (HIO) phase retrieval.

No support refinement is performed; the support is either supplied or taken
once from the thresholded autocorrelation.
"""
import time
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionError, DivergenceError, ValidationError
from .field import DEFAULT_TAU, as_pattern, autocorrelation_support, check_oversampling
from .metrics import fourier_residual
from .optimize import RecoveryResult

HIO = "hio"


@dataclass(frozen=True)
class HioConfig:
    beta: float = 0.9
    iterations: int = 2000
    tau: float = DEFAULT_TAU
    support: bool = True
    real: bool = False
    nonneg: bool = False
    rng_seed: int = 0
    log_every: int = 1

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValidationError(f"beta must lie in [0, 1], got {self.beta}")
        if self.iterations < 0:
            raise ValidationError("iterations must be nonnegative")
        if self.support and not 0.0 < self.tau < 1.0:
            raise ValidationError(f"tau must lie in (0, 1), got {self.tau}")
        if self.log_every < 1:
            raise ValidationError("log_every must be positive")

    def to_dict(self):
        return asdict(self)


def magnitude_project(spectrum, y):
    """Replace Fourier moduli by ``sqrt(y)`` while keeping the phases.

    Zero-modulus entries get phase 0.
    """
    y = np.asarray(y, dtype=np.float64)
    if np.shape(spectrum) != y.shape:
        raise DimensionError(f"spectrum shape {np.shape(spectrum)} does not match pattern shape {y.shape}")
    if np.any(y < 0):
        raise ValidationError("pattern contains negative intensities")
    amp = np.sqrt(y)
    mod = np.abs(spectrum)
    safe = np.where(mod > 0, mod, 1.0)
    return np.where(mod > 0, amp * spectrum / safe, amp + 0j)


def violation_set(xp, mask, cfg):
    """Pixels where the object-domain constraints fail for the projected iterate."""
    bad = np.zeros(xp.shape, dtype=bool)
    if cfg.support:
        bad |= ~mask
    if cfg.nonneg:
        bad |= xp.real < 0
    return bad


def hio_step(x_in, y, mask, cfg):
    """One HIO update on the full m-by-m frame.

    Pixels satisfying the constraints take the Fourier-projected value (real
    part only when ``cfg.real``); violating pixels get ``x_in - beta * x'``.
    """
    x_in = np.asarray(x_in, dtype=np.complex128)
    xp = np.fft.ifft2(magnitude_project(np.fft.fft2(x_in), y))
    bad = violation_set(xp, mask, cfg)
    kept = xp.real.astype(np.complex128) if cfg.real else xp
    return np.where(bad, x_in - cfg.beta * xp, kept)


def constrained(x, mask, cfg):
    """Project a frame onto the object-domain constraint set."""
    out = x.real.astype(np.complex128) if cfg.real else x.copy()
    if cfg.support:
        out[~mask] = 0
    if cfg.nonneg:
        out = np.where(out.real < 0, 0, out)
    return out


def crop_max_energy(frame, mask, n):
    """Cut the n-by-n cyclic window holding the most in-mask energy.

    Returns the window and its top-left corner.
    """
    m = frame.shape[0]
    energy = np.abs(frame) ** 2 * mask
    box = np.zeros((m, m))
    box[:n, :n] = 1.0
    # window_sum[s] = sum_r energy(r) box(r - s)
    window_sum = np.fft.ifft2(np.fft.fft2(energy) * np.conj(np.fft.fft2(box))).real
    corner = np.unravel_index(np.argmax(np.round(window_sum, 9)), window_sum.shape)
    rows = (corner[0] + np.arange(n)) % m
    cols = (corner[1] + np.arange(n)) % m
    return frame[np.ix_(rows, cols)], (int(corner[0]), int(corner[1]))


def solve_hio(y, n, cfg=HioConfig(), support=None):
    """Run plain HIO from a random-phase start.

    ``support`` (an m-by-m boolean mask) overrides the autocorrelation
    estimate. The returned image is the constrained final iterate cropped to
    n-by-n. Trace losses are the squared misfit of the constrained iterate.
    """
    y = as_pattern(y)
    m = y.shape[0]
    check_oversampling(n, m)
    if support is not None:
        mask = np.asarray(support, dtype=bool)
        if mask.shape != y.shape:
            raise DimensionError(f"support shape {mask.shape} does not match pattern shape {y.shape}")
    elif cfg.support:
        mask = autocorrelation_support(y, cfg.tau)
    else:
        mask = np.ones(y.shape, dtype=bool)

    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.rng_seed)
    phases = rng.uniform(-np.pi, np.pi, y.shape)
    x = np.fft.ifft2(np.sqrt(y) * np.exp(1j * phases))

    trace = []
    for it in range(cfg.iterations + 1):
        if it % cfg.log_every == 0 or it == cfg.iterations:
            est = constrained(x, mask, cfg) if it else x
            f = np.fft.fft2(est)
            r = f.real**2 + f.imag**2 - y
            value = float(np.sum(r * r))
            if not np.isfinite(value):
                raise DivergenceError(f"HIO diverged at iteration {it}", trace)
            trace.append((it, value, (time.perf_counter() - t0) * 1e3))
        if it == cfg.iterations:
            break
        x = hio_step(x, y, mask, cfg)

    final = constrained(x, mask, cfg) if cfg.iterations else x
    image, corner = crop_max_energy(final, mask, n)
    return RecoveryResult(
        image=image,
        trace=trace,
        wall_time_ms=(time.perf_counter() - t0) * 1e3,
        final_residual=fourier_residual(y, image),
        solver=HIO,
        best_loss=trace[-1][1],
        info={"crop_corner": corner, "support_pixels": int(mask.sum())},
    )
