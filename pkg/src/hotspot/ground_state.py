"""The ground state w(y) = sqrt(2) sech(y) and the multi-spike ansatz.

w is the even positive homoclinic solution of w'' - w + w^3 = 0 and is the
inner profile of every spike.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate

from .model import ModelParams, SpikePattern

SQRT2 = np.sqrt(2.0)

# Analytic moments: (int w, int w^2, int w^3) over the real line.
W_MOMENTS = (SQRT2 * np.pi, 4.0, SQRT2 * np.pi)

QUAD_HALF_WIDTH = 40.0


def _sech(y):
    # 2 e^{-|y|} / (1 + e^{-2|y|}) never overflows
    e = np.exp(-np.abs(np.asarray(y, dtype=float)))
    return 2.0 * e / (1.0 + e * e)


def w(y):
    return SQRT2 * _sech(y)


def w_prime(y):
    return -SQRT2 * _sech(y) * np.tanh(y)


def w_second(y):
    s = _sech(y)
    return SQRT2 * s * (1.0 - 2.0 * s * s)


def w_moments(quadrature: bool = False):
    """Return (int w dy, int w^2 dy, int w^3 dy).

    With ``quadrature=True`` the integrals are evaluated numerically on
    [-40, 40], where the truncated tails are below 1e-16.
    """
    if not quadrature:
        return W_MOMENTS
    out = []
    for power in (1, 2, 3):
        val, _ = integrate.quad(
            lambda y, k=power: w(y) ** k,
            -QUAD_HALF_WIDTH,
            QUAD_HALF_WIDTH,
            points=[0.0],
            epsabs=1e-13,
            epsrel=1e-13,
            limit=200,
        )
        out.append(val)
    return tuple(out)


def cutoff(s):
    """C^2 cut-off: 1 on |s| <= 1, 0 on |s| >= 2, quintic smoothstep between."""
    u = np.clip(np.abs(np.asarray(s, dtype=float)) - 1.0, 0.0, 1.0)
    return np.clip(1.0 - u**3 * (10.0 - 15.0 * u + 6.0 * u * u), 0.0, 1.0)


def cutoff_derivatives(s):
    """(chi'(s), chi''(s)) for the cut-off above."""
    s = np.asarray(s, dtype=float)
    u = np.clip(np.abs(s) - 1.0, 0.0, 1.0)
    d1 = -30.0 * u**2 * (1.0 - u) ** 2 * np.sign(s)
    d2 = -60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
    return d1, d2


def cutoff_radius(pattern: SpikePattern, L: float) -> float:
    """r0 = one tenth of min(t_1 + L, L - t_K, half the smallest spike gap)."""
    return 0.1 * pattern.check_separation(L)


def build_ansatz(
    pattern: SpikePattern, p: ModelParams, *, use_cutoff: bool = True
) -> np.ndarray:
    """Nodal values of A_hat(x) = sum_j v_j^{-1/2} w((x - t_j)/eps) chi((x - t_j)/r0).

    ``use_cutoff=False`` drops the cut-off factor; this gives a seed that keeps
    the full spike profile when r0 is comparable to eps.
    """
    return _ansatz(pattern, p, use_cutoff, second=False)[0]


def build_ansatz_with_curvature(pattern: SpikePattern, p: ModelParams, *, use_cutoff=True):
    """(A_hat, A_hat_xx) at the nodes, both evaluated analytically."""
    return _ansatz(pattern, p, use_cutoff, second=True)


def _ansatz(pattern, p, use_cutoff, second):
    r0 = cutoff_radius(pattern, p.L)
    eps = p.epsilon
    x = p.x
    A_hat = np.zeros_like(x)
    A_xx = np.zeros_like(x) if second else None
    for t, v in zip(pattern.positions, pattern.v_amplitudes):
        y = (x - t) / eps
        scale = 1.0 / np.sqrt(v)
        if use_cutoff:
            s = (x - t) / r0
            chi = cutoff(s)
        else:
            chi = np.ones_like(x)
        A_hat += scale * w(y) * chi
        if second:
            term = w_second(y) * chi / eps**2
            if use_cutoff:
                d1, d2 = cutoff_derivatives(s)
                term += 2.0 * w_prime(y) * d1 / (eps * r0) + w(y) * d2 / r0**2
            A_xx += scale * term
    return A_hat, A_xx
