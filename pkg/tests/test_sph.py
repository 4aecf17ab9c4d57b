import math

import numpy as np
import pytest
from scipy.special import sph_harm_y

from cnocs import sph


def scipy_real_basis(theta, phi, degree):
    """Real basis from scipy's complex harmonics (Condon-Shortley absorbed)."""
    out = np.empty(theta.shape + ((degree + 1) ** 2,))
    for l in range(degree + 1):
        for m in range(-l, l + 1):
            y = sph_harm_y(l, abs(m), theta, phi)
            if m == 0:
                v = y.real
            elif m > 0:
                v = math.sqrt(2.0) * (-1) ** m * y.real
            else:
                v = math.sqrt(2.0) * (-1) ** m * y.imag
            out[..., l * l + l + m] = v
    return out


def test_matches_scipy(rng):
    theta = rng.uniform(1e-3, math.pi - 1e-3, 400)
    phi = rng.uniform(-math.pi, math.pi, 400)
    for degree in (0, 1, 3, 8):
        mine = sph.eval_basis(theta, phi, degree)
        ref = scipy_real_basis(theta, phi, degree)
        assert np.abs(mine - ref).max() < 1e-10


def test_low_degree_table_values():
    # spot-check against the standard real-harmonic constants
    theta = np.array([0.0])
    phi = np.array([0.0])
    basis = sph.eval_basis(theta, phi, 2)
    assert basis[0, 0] == pytest.approx(0.28209479177387814, abs=1e-14)  # Y00
    assert basis[0, 2] == pytest.approx(0.4886025119029199, abs=1e-14)  # Y10 at pole
    # Y1,1 = 0.4886 sin(theta) cos(phi) at theta=pi/2, phi=0
    eq = sph.eval_basis(np.array([math.pi / 2]), phi, 2)
    assert eq[0, 3] == pytest.approx(0.4886025119029199, abs=1e-12)
    # Y2,2 = 0.5462742 sin^2 cos(2 phi) peaks at the equator
    assert eq[0, 8] == pytest.approx(0.5462742152960396, abs=1e-12)


def test_amplitudes_are_channel_maxima(rng):
    degree = 4
    amp = sph.amplitudes(degree)
    theta = rng.uniform(0, math.pi, 200_000)
    phi = rng.uniform(-math.pi, math.pi, 200_000)
    basis = np.abs(sph.eval_basis(theta, phi, degree))
    observed = basis.max(axis=0)
    assert np.all(observed <= amp * (1 + 1e-6))
    assert np.all(observed >= amp * 0.98)  # dense sampling comes close


def test_scaled_range_and_degree_zero(rng):
    theta = rng.uniform(0, math.pi, 5000)
    phi = rng.uniform(-math.pi, math.pi, 5000)
    for degree in (0, 2, 5):
        scaled = sph.eval_scaled(theta, phi, degree)
        assert scaled.shape[-1] == sph.num_channels(degree)
        assert np.all(scaled >= -1.0) and np.all(scaled <= 1.0)
    assert np.all(sph.eval_scaled(theta, phi, 0) == 1.0)


def test_channel_count():
    assert sph.num_channels(0) == 1
    assert sph.num_channels(3) == 16


def test_negative_degree_rejected():
    with pytest.raises(ValueError):
        sph.eval_basis(np.zeros(1), np.zeros(1), -1)
