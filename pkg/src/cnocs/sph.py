"""Real spherical harmonics Y_l^m, vectorized, with per-channel amplitude scaling.

Evaluation uses the standard stable recurrence on associated Legendre
functions (no Condon-Shortley phase in the real basis):

  Y_{l,0}      = N(l,0)  P_l^0(cos theta)
  Y_{l,m>0}    = sqrt(2) N(l,m)  P_l^m(cos theta) cos(m phi)
  Y_{l,m<0}    = sqrt(2) N(l,|m|) P_l^|m|(cos theta) sin(|m| phi)

with N(l,m) = sqrt((2l+1)/(4 pi) * (l-m)!/(l+m)!). Channels are ordered
(l, m) = (0,0), (1,-1), (1,0), (1,1), (2,-2), ...
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["num_channels", "eval_basis", "amplitudes", "eval_scaled"]

_AMP_CACHE: dict[int, np.ndarray] = {}
_AMP_SAMPLES = 20001


def num_channels(degree: int) -> int:
    return (degree + 1) ** 2


def eval_basis(theta: np.ndarray, phi: np.ndarray, degree: int) -> np.ndarray:
    """Evaluate all real Y_l^m for 0 <= l <= degree at (theta, phi).

    theta is the polar angle from +z in [0, pi], phi the azimuthal angle.
    Returns shape (*theta.shape, (degree+1)**2).
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    x = np.cos(theta)
    s = np.sin(theta)
    n = num_channels(degree)
    out = np.empty(theta.shape + (n,), dtype=np.float64)

    # P[m][l] built on the fly: pmm along the diagonal, then upward in l.
    inv4pi = 1.0 / (4.0 * math.pi)
    for m in range(degree + 1):
        if m == 0:
            pmm = np.ones_like(x)
        else:
            # P_m^m = (2m-1)!! sin^m(theta)  (positive convention)
            pmm = pmm * (2 * m - 1) * s  # noqa: F821  (carried from previous m)
        if m > 0:
            cosm = np.cos(m * phi)
            sinm = np.sin(m * phi)
        p_prev = pmm  # P_m^m
        p_curr = None
        for l in range(m, degree + 1):
            if l == m:
                p = p_prev
            elif l == m + 1:
                p = (2 * m + 1) * x * p_prev
                p_curr = p
            else:
                p = ((2 * l - 1) * x * p_curr - (l + m - 1) * p_prev) / (l - m)
                p_prev, p_curr = p_curr, p
            norm = math.sqrt(
                (2 * l + 1) * inv4pi * math.exp(math.lgamma(l - m + 1) - math.lgamma(l + m + 1))
            )
            base = l * l + l  # channel index of (l, 0)
            if m == 0:
                out[..., base] = norm * p
            else:
                v = math.sqrt(2.0) * norm * p
                out[..., base + m] = v * cosm
                out[..., base - m] = v * sinm
    return out


def amplitudes(degree: int) -> np.ndarray:
    """Max |Y_l^m| over the sphere, one value per channel.

    The phi factor peaks at 1, so the maximum is taken over a dense theta
    grid; the peak is smooth, making the sampled maximum accurate to well
    below 1e-6 relative for desk-scale degrees.
    """
    if degree not in _AMP_CACHE:
        theta = np.linspace(0.0, math.pi, _AMP_SAMPLES)
        phi = np.zeros_like(theta)
        basis = eval_basis(theta, phi, degree)  # cos(m*0) = 1 isolates the theta part
        amp = np.abs(basis).max(axis=0)
        # sin(m phi) channels share the theta profile of their cos partners
        for l in range(degree + 1):
            base = l * l + l
            for m in range(1, l + 1):
                amp[base - m] = amp[base + m]
        _AMP_CACHE[degree] = amp
    return _AMP_CACHE[degree]


def eval_scaled(theta: np.ndarray, phi: np.ndarray, degree: int) -> np.ndarray:
    """Amplitude-normalized basis: every channel lies in [-1, 1]."""
    basis = eval_basis(theta, phi, degree)
    scaled = basis / amplitudes(degree)
    return np.clip(scaled, -1.0, 1.0)
