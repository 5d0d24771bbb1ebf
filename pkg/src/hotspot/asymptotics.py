"""Closed-form leading-order predictions for spike steady states.

Amplitudes are reported as v-amplitudes: the limit of v_hat at a spike
centre, where v = eps^2 v_hat.  Spike j then has height A_hat = w(0)/sqrt(v_j).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, ParameterError
from .model import ModelParams, SpikePattern

SQRT2PI = math.sqrt(2.0) * math.pi
IDENTITY_RTOL = 1e-9
CONDBC_VALUE = 2.0 / math.sqrt(5.0)
CONDBC_BAND = 1e-9


def _iso(p: ModelParams):
    """(A0, A_bar - A0, D_hat A0^2) for an isotropic configuration."""
    p.require_isotropic()
    a0 = p.A0.values[0]
    g = p.gamma.values[0]
    return a0, g, p.D_hat * a0 * a0


@dataclass(frozen=True)
class SymmetricPrediction:
    K: int
    v0: float
    positions: tuple
    pattern: SpikePattern


def symmetric_prediction(K: int, p: ModelParams) -> SymmetricPrediction:
    """K equal spikes at t_i = (2i - 1 - K) L / K with v0 = pi^2 K^2 / (2 (A_bar-A0)^2 L^2)."""
    if int(K) != K or K < 1:
        raise ParameterError("K must be an integer >= 1")
    _, g, _ = _iso(p)
    L = p.L
    v0 = math.pi**2 * K**2 / (2.0 * g**2 * L**2)
    t = tuple((2 * i - 1 - K) * L / K for i in range(1, K + 1))
    pattern = SpikePattern(t, (v0,) * K)
    check_mass_identity(pattern, p)
    return SymmetricPrediction(K, v0, t, pattern)


def mass_identity_residual(pattern: SpikePattern, p: ModelParams) -> float:
    """Relative residual of sum_j sqrt(2) pi / sqrt(v_j) = (A_bar - A0) 2L."""
    _, g, _ = _iso(p)
    lhs = sum(SQRT2PI / math.sqrt(v) for v in pattern.v_amplitudes)
    rhs = 2.0 * g * p.L
    return abs(lhs - rhs) / rhs


def check_mass_identity(pattern, p):
    r = mass_identity_residual(pattern, p)
    if r > IDENTITY_RTOL:
        raise ConsistencyError(f"amplitude mass identity violated: relative residual {r:.3e}")


def asymmetric_constant_C(k1: int, k2: int, p: ModelParams) -> float:
    """C = sqrt(pi) (D_hat A0^2)^{1/4} sqrt(k1 k2) / ((A_bar - A0)^{3/4} L)."""
    _, g, da = _iso(p)
    return math.sqrt(math.pi) * da**0.25 * math.sqrt(k1 * k2) / (g**0.75 * p.L)


@dataclass(frozen=True)
class AsymmetricBranch:
    """One root z of C (z + 1/z) = 1 and the amplitudes it determines."""

    z: float
    v_s: float
    v_l: float
    pattern: SpikePattern | None = None


@dataclass(frozen=True)
class AsymmetricSolution:
    k1: int
    k2: int
    C_value: float
    z_roots: tuple
    classification: str
    branches: tuple = ()
    degenerate_root: float | None = None

    @property
    def v_s(self):
        return self.branches[0].v_s if self.branches else None

    @property
    def v_l(self):
        return self.branches[0].v_l if self.branches else None

    @property
    def positions(self):
        b = self.branches[0] if self.branches else None
        return b.pattern.positions if b is not None and b.pattern is not None else None

    @property
    def pattern(self):
        return self.branches[0].pattern if self.branches else None


def _amplitudes_from_z(z, k1, k2, g, da):
    ratio = math.sqrt(k2 / k1)
    sqrt_2vs = z * math.sqrt(math.pi) / (da**0.25 * g**0.25 * ratio)
    v_s = 0.5 * sqrt_2vs**2
    v_l = math.pi**2 / (4.0 * da * g) / v_s
    return v_s, v_l


def solve_asymmetric(
    k1: int, k2: int, p: ModelParams, *, small_first: bool = True
) -> AsymmetricSolution:
    """Solve for k1 small (v_s) and k2 large (v_l) v-amplitudes.

    Only roots with z strictly below sqrt(k2/k1), i.e. v_s < v_l, are kept.
    A root sitting on sqrt(k2/k1) is the symmetric branch point and is
    reported in ``degenerate_root`` instead.  For k1 = k2 = 1 each branch also
    carries the two-spike pattern, ordered (v_s, v_l) unless ``small_first``
    is False.
    """
    if min(k1, k2) < 1 or int(k1) != k1 or int(k2) != k2:
        raise ParameterError("k1 and k2 must be integers >= 1")
    _, g, da = _iso(p)
    C = asymmetric_constant_C(k1, k2, p)
    zmax = math.sqrt(k2 / k1)

    disc = 1.0 / C**2 - 4.0
    if disc < 0:
        roots = ()
    else:
        sq = math.sqrt(disc)
        lo = 0.5 * (1.0 / C - sq)
        # product of the roots is 1
        roots = (lo, 1.0 / lo) if sq > 0 else (lo,)

    degenerate = None
    accepted = []
    for z in roots:
        if abs(z - zmax) <= 1e-12 * zmax:
            degenerate = z
        elif z < zmax:
            accepted.append(z)

    branches = []
    for z in accepted:
        if abs(C * (z + 1.0 / z) - 1.0) > 1e-12:
            raise ConsistencyError(f"root z={z!r} does not satisfy C(z + 1/z) = 1")
        v_s, v_l = _amplitudes_from_z(z, k1, k2, g, da)
        _check_asymmetric_identities(v_s, v_l, k1, k2, p, g, da)
        pattern = None
        if k1 == 1 and k2 == 1:
            amps = (v_s, v_l) if small_first else (v_l, v_s)
            pattern = SpikePattern(positions_from_amplitudes(amps, p), amps)
        branches.append(AsymmetricBranch(z, v_s, v_l, pattern))

    classification = {0: "no-solution", 1: "unique-solution", 2: "two-solutions"}[len(branches)]
    return AsymmetricSolution(
        k1=k1,
        k2=k2,
        C_value=C,
        z_roots=tuple(roots),
        classification=classification,
        branches=tuple(branches),
        degenerate_root=degenerate,
    )


def _check_asymmetric_identities(v_s, v_l, k1, k2, p, g, da):
    mass = SQRT2PI * (k1 / math.sqrt(v_s) + k2 / math.sqrt(v_l))
    if abs(mass - 2.0 * g * p.L) > IDENTITY_RTOL * 2.0 * g * p.L:
        raise ConsistencyError("amplitude mass identity violated")
    prod = (math.pi / (math.sqrt(2.0) * da)) * (p.L / 2.0) / (
        k1 / math.sqrt(v_s) + k2 / math.sqrt(v_l)
    )
    if abs(v_s * v_l - prod) > IDENTITY_RTOL * prod:
        raise ConsistencyError("amplitude product identity violated")


def positions_from_amplitudes(v, p: ModelParams) -> tuple:
    """Positions solving the balance F = 0 for the given amplitude list.

    t_i = L (sum_{j<i} v_j^{-1/2} - sum_{j>i} v_j^{-1/2}) / sum_j v_j^{-1/2}
    """
    q = np.asarray(v, dtype=float) ** -0.5
    total = q.sum()
    left = np.concatenate(([0.0], np.cumsum(q)[:-1]))
    right = total - left - q
    return tuple(p.L * (left - right) / total)


def check_F_zero(pattern: SpikePattern, p: ModelParams) -> np.ndarray:
    """F_i = m_i/2 + sum_{j<i} m_j - (sum_j m_j)(t_i + L)/(2L), m_j = sqrt(2) pi / sqrt(v_j)."""
    t = np.asarray(pattern.positions)
    m = SQRT2PI / np.sqrt(np.asarray(pattern.v_amplitudes))
    left = np.concatenate(([0.0], np.cumsum(m)[:-1]))
    return 0.5 * m + left - m.sum() * (t + p.L) / (2.0 * p.L)


def consecutive_amplitude_residuals(pattern: SpikePattern, p: ModelParams) -> np.ndarray:
    """Residuals of v_{i+1} - v_i = c (t_{i+1} - t_i) (v_i^{-1/2} - v_{i+1}^{-1/2}) / 2."""
    _, _, da = _iso(p)
    c = math.pi / (math.sqrt(2.0) * da)
    t = np.asarray(pattern.positions)
    v = np.asarray(pattern.v_amplitudes)
    lhs = np.diff(v)
    rhs = c * np.diff(t) * 0.5 * (v[:-1] ** -0.5 - v[1:] ** -0.5)
    return lhs - rhs


@dataclass(frozen=True)
class AnisotropicPrediction:
    t0: float
    v0: float
    pattern: SpikePattern


def anisotropic_prediction(p: ModelParams) -> AnisotropicPrediction:
    """Single spike where the gamma-mass to its left equals the mass to its right.

    The location does not depend on A0 at leading order.
    """
    L = p.L
    total = p.gamma.integrate(-L, L)
    if not total > 0:
        raise ParameterError("gamma must have positive integral")

    def G(t):
        return p.gamma.integrate(-L, t) - 0.5 * total

    # G is strictly increasing because gamma > 0
    lo, hi = -L, L
    t0 = 0.0
    for _ in range(200):
        t0 = 0.5 * (lo + hi)
        g_mid = G(t0)
        if abs(g_mid) <= 1e-12 * total and hi - lo <= 1e-12 * L:
            break
        if g_mid > 0:
            hi = t0
        else:
            lo = t0
    v0 = 2.0 * math.pi**2 / total**2
    return AnisotropicPrediction(t0, v0, SpikePattern((t0,), (v0,)))


def condition_expression(p: ModelParams) -> float:
    """2 sqrt(pi) (D_hat A0^2)^{1/4} / ((A_bar - A0)^{3/4} L), i.e. 2C for k1 = k2 = 1."""
    _, g, da = _iso(p)
    return 2.0 * math.sqrt(math.pi) * da**0.25 / (g**0.75 * p.L)


def check_condc(p: ModelParams) -> bool:
    """Existence bound: the condition expression is at most 1."""
    return condition_expression(p) <= 1.0


def check_condbc(p: ModelParams) -> bool:
    """Nondegeneracy: the condition expression stays off 2/sqrt(5) (relative band 1e-9)."""
    return abs(condition_expression(p) - CONDBC_VALUE) > CONDBC_BAND * CONDBC_VALUE


def D_hat_for_condition(value: float, p: ModelParams) -> float:
    """The D_hat that makes condition_expression(p) equal ``value``."""
    _, g, _ = _iso(p)
    a0 = p.A0.values[0]
    da = (value * g**0.75 * p.L / (2.0 * math.sqrt(math.pi))) ** 4
    return da / a0**2
