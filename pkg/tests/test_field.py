import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import direct_intensities, direct_loss, fd_complex_gradient, random_complex
from prdecoder import field
from prdecoder.errors import DimensionError, ValidationError


def test_delta_has_flat_spectrum():
    x = np.array([[1, 0], [0, 0]], dtype=complex)
    np.testing.assert_array_equal(field.forward_intensities(x, 4), np.ones((4, 4)))


def test_zero_object_gives_zero_pattern():
    np.testing.assert_array_equal(field.forward_intensities(np.zeros((2, 2)), 4), np.zeros((4, 4)))


def test_matches_direct_dft(rng):
    x = random_complex(rng, (3, 3))
    expected = direct_intensities(x, 8)
    got = field.forward_intensities(x, 8)
    assert np.max(np.abs(got - expected)) <= 1e-12 * np.max(np.abs(expected))


@pytest.mark.parametrize("n,m", [(4, 6), (3, 4), (1, 0)])
def test_rejects_undersampled_frame(n, m):
    with pytest.raises(DimensionError):
        field.forward_intensities(np.ones((n, n)), m)


def test_rejects_non_square_and_non_finite():
    with pytest.raises(DimensionError):
        field.forward_intensities(np.ones((2, 3)), 8)
    x = np.ones((2, 2), dtype=complex)
    x[0, 1] = np.nan
    with pytest.raises(ValidationError):
        field.forward_intensities(x, 4)


def test_loss_self_consistent_and_zero_object(rng):
    x = random_complex(rng, (4, 4))
    y = field.forward_intensities(x, 8)
    assert field.loss(y, x) == 0.0
    assert field.loss(y, np.zeros((4, 4))) == pytest.approx(np.sum(y**2), rel=1e-14)


def test_loss_matches_oracle(rng):
    x = random_complex(rng, (3, 3))
    y = rng.random((7, 7)) * 10
    assert field.loss(y, x) == pytest.approx(direct_loss(y, x), rel=1e-12)


def test_loss_rejects_mismatched_frame():
    with pytest.raises(DimensionError):
        field.loss(np.ones((5, 5)), np.ones((4, 4)))


def test_gradient_vanishes_at_truth(rng):
    x = random_complex(rng, (6, 6))
    y = field.forward_intensities(x, 12)
    g = field.loss_gradient(y, x)
    assert np.max(np.abs(g)) <= 1e-10 * max(1.0, np.max(y))


def _fd_rel_err(y, x):
    g = field.loss_gradient(y, x)
    fd = fd_complex_gradient(lambda v: field.loss(y, v), x)
    return np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1e-8))


def test_gradient_matches_finite_differences(rng):
    x = 0.3 * random_complex(rng, (8, 8))
    y = field.forward_intensities(x + 0.05 * random_complex(rng, (8, 8)), 16)
    assert _fd_rel_err(y, x) <= 1e-6


def test_gradient_with_zero_measurement(rng):
    # d/dx of || |F x|^2 ||^2
    x = 0.2 * random_complex(rng, (4, 4))
    assert _fd_rel_err(np.zeros((8, 8)), x) <= 1e-6


def test_support_of_single_pixel():
    x = np.zeros((4, 4))
    x[1, 2] = 1.0
    mask = field.autocorrelation_support(field.forward_intensities(x, 8), 0.5)
    expected = np.zeros((8, 8), dtype=bool)
    expected[0, 0] = True
    np.testing.assert_array_equal(mask, expected)


def test_support_of_pixel_pair():
    x = np.zeros((4, 4))
    x[0, 0] = x[0, 1] = 1.0
    mask = field.autocorrelation_support(field.forward_intensities(x, 8), 0.4)
    expected = np.zeros((8, 8), dtype=bool)
    expected[0, 0] = expected[0, 1] = expected[0, 7] = True
    np.testing.assert_array_equal(mask, expected)


def test_support_tiny_threshold_keeps_every_nonzero_lag(rng):
    # with m = 2n - 1 the autocorrelation of a generic object fills the frame
    x = random_complex(rng, (4, 4))
    y = field.forward_intensities(x, 7)
    a = np.abs(field.autocorrelation(y))
    mask = field.autocorrelation_support(y, 1e-300)
    np.testing.assert_array_equal(mask, a > 0)
    assert mask.all()


@pytest.mark.parametrize("tau", [0.0, 1.0, -0.1])
def test_support_rejects_bad_tau(tau):
    with pytest.raises(ValidationError):
        field.autocorrelation_support(np.ones((4, 4)), tau)


def test_support_rejects_zero_pattern():
    with pytest.raises(ValidationError):
        field.autocorrelation_support(np.zeros((4, 4)))


def test_parseval(rng):
    x = random_complex(rng, (5, 5))
    y = field.forward_intensities(x, 12)
    assert np.sum(y) == pytest.approx(144 * np.sum(np.abs(x) ** 2), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(1, 5),
    extra=st.integers(0, 4),
    shift=st.tuples(st.integers(0, 20), st.integers(0, 20)),
    theta=st.floats(-np.pi, np.pi),
    seed=st.integers(0, 2**32 - 1),
)
def test_symmetry_invariance(n, extra, shift, theta, seed):
    rng = np.random.default_rng(seed)
    m = 2 * n - 1 + extra
    x = random_complex(rng, (n, n))
    y = field.forward_intensities(x, m)
    frame = field.pad(x, m)
    scale = np.max(y)

    def intensities(f):
        return np.abs(np.fft.fft2(f)) ** 2

    shifted = np.roll(frame, shift, axis=(0, 1))
    flipped = np.conj(np.roll(frame[::-1, ::-1], 1, axis=(0, 1)))
    for variant in (shifted, np.exp(1j * theta) * frame, flipped):
        assert np.max(np.abs(intensities(variant) - y)) <= 1e-10 * scale


@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_oracle_equivalence_small_frames(n, seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2 * n - 1, 17)) if 2 * n - 1 <= 16 else 2 * n - 1
    x = random_complex(rng, (n, n))
    expected = direct_intensities(x, m)
    assert np.max(np.abs(field.forward_intensities(x, m) - expected)) <= 1e-12 * np.max(expected)
