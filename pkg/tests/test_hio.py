import numpy as np
import pytest

from oracles import direct_dft2, random_complex
from prdecoder import hio
from prdecoder.errors import DimensionError, ValidationError
from prdecoder.field import autocorrelation_support, forward_intensities, pad
from prdecoder.metrics import best_symmetry_alignment


def test_projection_idempotent_on_constraint_set(rng):
    z = random_complex(rng, (6, 6))
    y = np.abs(z) ** 2
    np.testing.assert_allclose(hio.magnitude_project(z, y), z, rtol=1e-14)


def test_projection_zero_modulus_tie_break():
    z = np.zeros((1, 1), dtype=complex)
    out = hio.magnitude_project(z, np.array([[4.0]]))
    assert out[0, 0] == 2 + 0j


def test_projection_moduli_and_phases(rng):
    z = random_complex(rng, (8, 8))
    y = rng.random((8, 8)) * 5
    out = hio.magnitude_project(z, y)
    assert np.max(np.abs(np.abs(out) - np.sqrt(y))) <= 1e-12
    np.testing.assert_allclose(np.angle(out), np.angle(z), atol=1e-12)


def test_projection_validation(rng):
    with pytest.raises(ValidationError):
        hio.magnitude_project(np.ones((2, 2)), -np.ones((2, 2)))
    with pytest.raises(DimensionError):
        hio.magnitude_project(np.ones((2, 2)), np.ones((3, 3)))


def test_fixed_point(rng):
    x = rng.random((4, 4))
    m = 8
    frame = pad(x, m)
    y = forward_intensities(x, m)
    mask = np.zeros((m, m), dtype=bool)
    mask[:4, :4] = True
    cfg = hio.HioConfig(real=True, nonneg=True)
    out = hio.hio_step(frame, y, mask, cfg)
    np.testing.assert_allclose(out, frame, atol=1e-12)


def test_beta_zero_keeps_outside_pixels(rng):
    m = 8
    x_in = random_complex(rng, (m, m))
    y = rng.random((m, m))
    mask = np.zeros((m, m), dtype=bool)
    mask[:3, :3] = True
    out = hio.hio_step(x_in, y, mask, hio.HioConfig(beta=0.0))
    np.testing.assert_array_equal(out[~mask], x_in[~mask])


def test_pass_through_with_full_mask(rng):
    m = 6
    x_in = random_complex(rng, (m, m))
    y = rng.random((m, m))
    out = hio.hio_step(x_in, y, np.ones((m, m), dtype=bool), hio.HioConfig(beta=1.0))
    xp = np.fft.ifft2(hio.magnitude_project(np.fft.fft2(x_in), y))
    np.testing.assert_array_equal(out, xp)


def test_step_matches_scripted_transcript():
    """4x4 instance worked through with explicit DFT sums and per-pixel rules."""
    rng = np.random.default_rng(5)
    m = 4
    x_in = random_complex(rng, (m, m))
    y = rng.random((m, m)) * 3
    mask = np.zeros((m, m), dtype=bool)
    mask[:2, :2] = True
    beta = 0.7

    spectrum = direct_dft2(x_in)
    proj = np.sqrt(y) * np.exp(1j * np.angle(spectrum))
    # inverse DFT via the conjugate of a forward DFT
    xp = np.conj(direct_dft2(np.conj(proj))) / (m * m)
    expected = np.empty_like(x_in)
    for i in range(m):
        for j in range(m):
            violates = (not mask[i, j]) or xp[i, j].real < 0
            expected[i, j] = x_in[i, j] - beta * xp[i, j] if violates else xp[i, j].real
    cfg = hio.HioConfig(beta=beta, real=True, nonneg=True)
    np.testing.assert_allclose(hio.hio_step(x_in, y, mask, cfg), expected, atol=1e-12)


def test_zero_iterations_returns_start(rng):
    x = rng.random((4, 4))
    y = forward_intensities(x, 8)
    res = hio.solve_hio(y, 4, hio.HioConfig(iterations=0, rng_seed=3))
    start = np.fft.ifft2(np.sqrt(y) * np.exp(1j * np.random.default_rng(3).uniform(-np.pi, np.pi, y.shape)))
    mask = autocorrelation_support(y, 0.04)
    expected, _ = hio.crop_max_energy(start, mask, 4)
    np.testing.assert_array_equal(res.image, expected)
    assert len(res.trace) == 1
    assert res.trace[0][1] == pytest.approx(np.sum((np.abs(np.fft.fft2(start)) ** 2 - y) ** 2))


def test_crop_picks_max_energy_window():
    m, n = 8, 3
    frame = np.zeros((m, m), dtype=complex)
    frame[5:8, 6:8] = 1.0
    frame[5:8, 0] = 1.0  # wraps across the column edge
    frame[0, 0] = 0.5
    window, corner = hio.crop_max_energy(frame, np.ones((m, m), dtype=bool), n)
    assert corner == (5, 6)
    assert np.sum(np.abs(window) ** 2) == 9.0


def test_solve_is_deterministic():
    x = np.zeros((8, 8))
    x[2:5, 1:6] = 1.0
    y = forward_intensities(x, 16)
    cfg = hio.HioConfig(iterations=50, real=True, nonneg=True, rng_seed=1)
    a = hio.solve_hio(y, 8, cfg)
    b = hio.solve_hio(y, 8, cfg)
    assert a.image.tobytes() == b.image.tobytes()
    assert [t[1] for t in a.trace] == [t[1] for t in b.trace]


def test_exact_support_recovers_real_image():
    rng = np.random.default_rng(2)
    x = np.zeros((8, 8))
    x[1:6, 2:7] = rng.random((5, 5)) + 0.2
    y = forward_intensities(x, 16)
    mask = np.zeros((16, 16), dtype=bool)
    mask[:8, :8] = x > 0
    res = hio.solve_hio(y, 8, hio.HioConfig(iterations=500, real=True, nonneg=True), support=mask)
    assert best_symmetry_alignment(x, res.image).rel_error < 1e-3


def test_config_validation():
    with pytest.raises(ValidationError):
        hio.HioConfig(beta=1.5)
    with pytest.raises(ValidationError):
        hio.HioConfig(tau=0.0)
    with pytest.raises(DimensionError):
        hio.solve_hio(np.ones((8, 8)), 8)
