"""
Gradient-based solvers for Fourier phase retrieval.

``solve_sidgp`` fits the weights of an untrained decoder so that its output
explains the measured intensities; ``solve_pixel_least_squares`` runs the same
optimizer directly on the image pixels and serves as the naive baseline.
"""
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional

import numpy as np

from . import decoder as dec
from .errors import DivergenceError, ValidationError
from .field import as_pattern, check_oversampling, loss_and_gradient
from .metrics import fourier_residual

logger = logging.getLogger(__name__)

SIDGP = "sidgp"
PIXEL_LS = "pixel_ls"


@dataclass(frozen=True)
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: tuple = ()
    v: tuple = ()

    @classmethod
    def for_params(cls, params, **hyper):
        zeros = tuple(np.zeros_like(p, dtype=np.float64) for p in params)
        return cls(m=zeros, v=tuple(z.copy() for z in zeros), **hyper)


def adam_step(state, params, grads):
    """One bias-corrected Adam update.

    Returns the new state and a new list of parameter arrays; inputs are not
    modified.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValidationError("parameter, gradient and moment lists differ in length")
    for p, g, mo in zip(params, grads, state.m):
        if np.shape(p) != np.shape(g) or np.shape(p) != np.shape(mo):
            raise ValidationError("parameter, gradient and moment shapes disagree")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient at Adam step {state.step + 1}")

    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    new_m, new_v, new_p = [], [], []
    for p, g, mo, ve in zip(params, grads, state.m, state.v):
        mo = b1 * mo + (1.0 - b1) * g
        ve = b2 * ve + (1.0 - b2) * (g * g)
        new_p.append(p - state.lr * (mo / corr1) / (np.sqrt(ve / corr2) + state.eps))
        new_m.append(mo)
        new_v.append(ve)
    return replace(state, step=t, m=tuple(new_m), v=tuple(new_v)), new_p


@dataclass
class RecoveryResult:
    image: np.ndarray
    trace: List[tuple]
    wall_time_ms: float
    final_residual: float
    solver: str
    best_loss: float
    info: dict = field(default_factory=dict)
    weights: Optional[dec.DecoderWeights] = None

    def best_so_far(self):
        """Running minimum of the logged losses."""
        return np.minimum.accumulate([row[1] for row in self.trace])


@dataclass(frozen=True)
class SidgpConfig:
    decoder: dec.DecoderConfig = dec.DESK_SCALE
    iterations: int = 3000
    lr: float = 0.01
    rng_seed: int = 0
    restarts: int = 2
    log_every: int = 10

    def __post_init__(self):
        if self.iterations < 0:
            raise ValidationError("iterations must be nonnegative")
        if self.restarts < 0:
            raise ValidationError("restarts must be nonnegative")
        if self.log_every < 1:
            raise ValidationError("log_every must be positive")
        if not self.lr > 0:
            raise ValidationError("lr must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "decoder" in d:
            d["decoder"] = dec.DecoderConfig(**d["decoder"])
        return cls(**d)


FULL_SIDGP = SidgpConfig(decoder=dec.FULL_SCALE, iterations=10000)


def _run(y, params, evaluate, iterations, lr, log_every, clock):
    """Shared Adam loop.

    ``evaluate(params)`` returns ``(loss, grads, image)``. The best iterate seen
    is tracked; iterate ``iterations`` (after the last step) is evaluated too.
    """
    state = AdamState.for_params(params, lr=lr)
    trace = []
    best = (np.inf, None, -1, None)
    for it in range(iterations + 1):
        value, grads, image = evaluate(params)
        if not np.isfinite(value):
            raise DivergenceError(f"loss became non-finite at iteration {it}", trace)
        if value < best[0]:
            best = (value, image, it, params)
        if it % log_every == 0 or it == iterations:
            trace.append((it, value, clock()))
        if it == iterations:
            break
        try:
            state, params = adam_step(state, params, grads)
        except FloatingPointError as exc:
            raise DivergenceError(str(exc), trace) from exc
    return best, trace


def solve_sidgp(y, cfg=SidgpConfig()):
    """Recover an image by fitting decoder weights to intensities ``y``.

    Runs ``cfg.restarts + 1`` independent fits (fit r seeded with
    ``cfg.rng_seed + r``) and returns the iterate with the lowest loss.
    """
    y = as_pattern(y)
    dcfg = cfg.decoder
    n = dcfg.output_side
    check_oversampling(n, y.shape[0])
    t0 = time.perf_counter()

    def clock():
        return (time.perf_counter() - t0) * 1e3

    best = None
    runs = []
    for r in range(cfg.restarts + 1):
        seed = cfg.rng_seed + r
        w, z = dec.init_decoder(dcfg, seed)

        def evaluate(params):
            weights = dec.DecoderWeights.from_arrays(params)
            image, tape = dec.decoder_forward(weights, z, dcfg)
            value, g_img = loss_and_gradient(y, image)
            grads = dec.decoder_backward(tape, g_img, weights, dcfg)
            return value, grads.arrays(), image

        try:
            (value, image, at, params), trace = _run(y, w.arrays(), evaluate, cfg.iterations, cfg.lr, cfg.log_every, clock)
        except DivergenceError as exc:
            logger.warning("restart %d diverged: %s", r, exc)
            runs.append({"rng_seed": seed, "diverged": True, "trace": exc.trace})
            continue
        logger.info("restart %d: best loss %.6g at iteration %d", r, value, at)
        runs.append({"rng_seed": seed, "diverged": False, "best_loss": value, "best_iteration": at})
        if best is None or value < best[0]:
            best = (value, image, trace, r, params)

    if best is None:
        raise DivergenceError("every restart diverged", runs[-1]["trace"] if runs else [])
    value, image, trace, r, params = best
    return RecoveryResult(
        image=image,
        trace=trace,
        wall_time_ms=clock(),
        final_residual=fourier_residual(y, image),
        solver=SIDGP,
        best_loss=value,
        info={"restart": r, "runs": [{k: v for k, v in run.items() if k != "trace"} for run in runs],
              "num_params": dec.num_params(dcfg)},
        weights=dec.DecoderWeights.from_arrays(params),
    )


def solve_pixel_least_squares(y, n, iterations=3000, lr=0.01, rng_seed=0, init="random", log_every=10):
    """Adam directly on the complex pixels of an n-by-n image.

    ``init="random"`` draws complex Gaussian pixels whose total energy matches
    the measurement (by Parseval); ``init="zeros"`` starts from the zero image,
    which is a stationary point.
    """
    y = as_pattern(y)
    m = y.shape[0]
    check_oversampling(n, m)
    if init == "zeros":
        x0 = np.zeros((n, n), dtype=np.complex128)
    elif init == "random":
        rng = np.random.default_rng(rng_seed)
        std = np.sqrt(y.sum() / (m * m) / (n * n) / 2.0)
        x0 = std * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    else:
        raise ValidationError(f"unknown init {init!r}")
    t0 = time.perf_counter()

    def clock():
        return (time.perf_counter() - t0) * 1e3

    def evaluate(params):
        image = params[0] + 1j * params[1]
        value, g = loss_and_gradient(y, image)
        return value, [g.real, g.imag], image

    (value, image, at, _), trace = _run(y, [x0.real.copy(), x0.imag.copy()], evaluate, iterations, lr, log_every, clock)
    return RecoveryResult(
        image=image,
        trace=trace,
        wall_time_ms=clock(),
        final_residual=fourier_residual(y, image),
        solver=PIXEL_LS,
        best_loss=value,
        info={"best_iteration": at, "rng_seed": rng_seed, "init": init},
    )
