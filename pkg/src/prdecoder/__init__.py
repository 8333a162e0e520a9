"""Fourier phase retrieval with an untrained deep-decoder prior, a plain HIO
baseline, synthetic crystal/toy data and symmetry-resolved metrics."""
from .decoder import DecoderConfig, DecoderWeights, decoder_backward, decoder_forward, init_decoder
from .errors import DimensionError, DivergenceError, FormatError, ValidationError
from .field import autocorrelation_support, forward_intensities, loss, loss_gradient
from .hio import HioConfig, hio_step, magnitude_project, solve_hio
from .metrics import Alignment, best_symmetry_alignment, fourier_residual
from .optimize import AdamState, RecoveryResult, SidgpConfig, adam_step, solve_pixel_least_squares, solve_sidgp
from .simulate import CrystalParams, ToyParams, simulate_crystal, simulate_toy

__version__ = "0.1.0"
