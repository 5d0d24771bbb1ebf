"""Finite nondegeneracy checks for asymmetric two-spike states.

Two quantities decide whether an asymmetric pair (v_s, v_l) is nondegenerate:
the eigenvalue e_m1 of E^{-1} = B C^{-1} + I, which must differ from 3/2,
and the determinant of the position Jacobian of F(t, v(t)), which must not
vanish.  Both are computed from closed forms and cross-checked numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .asymptotics import IDENTITY_RTOL, SQRT2PI, _iso, positions_from_amplitudes
from .errors import ConsistencyError, ParameterError
from .model import ModelParams

EM1_CRITICAL = 1.5
EM1_RTOL = 1e-9
FD_REL_STEP = 1e-6
POLE_ALPHAS = ((3.0 - math.sqrt(5.0)) / 2.0, (3.0 + math.sqrt(5.0)) / 2.0)
GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True, eq=False)
class NlepMatrices:
    B: np.ndarray
    Cmat: np.ndarray
    Einv: np.ndarray
    E: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    d2: float

    @property
    def e_m1(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def e_m2(self) -> float:
        return float(self.eigenvalues[1])


def build_matrices(v_s: float, v_l: float, d2: float, p: ModelParams) -> NlepMatrices:
    """B, C, E^{-1} = B C^{-1} + I and its eigenpairs, ordered (e_m1, e_m2).

    e_m1 belongs to the antisymmetric eigenvector (1, -1)/sqrt(2); e_m2 = 1.
    """
    if not (v_s > 0 and v_l > 0 and d2 > 0):
        raise ParameterError("v_s, v_l and d2 must be positive")
    _, _, da = _iso(p)
    B = np.array([[1.0, -1.0], [-1.0, 1.0]]) / d2
    Cmat = (SQRT2PI / da) * np.diag([v_s**-1.5, v_l**-1.5])
    Einv = B @ np.linalg.inv(Cmat) + np.eye(2)
    E = np.linalg.inv(Einv)
    vals, vecs = np.linalg.eig(Einv)
    vals = vals.real
    vecs = vecs.real
    # the antisymmetric mode has the larger eigenvalue (the other is exactly 1)
    order = np.argsort(-vals)
    vals, vecs = vals[order], vecs[:, order]
    v1 = vecs[:, 0]
    v1 = v1 / np.linalg.norm(v1)
    if v1[0] < 0:
        v1 = -v1
    vecs[:, 0] = v1
    return NlepMatrices(B, Cmat, Einv, E, vals, vecs, float(d2))


def em1_formula(v_s, v_l, d2, p: ModelParams) -> float:
    """(D_hat A0^2 / (sqrt(2) pi d2)) (v_s^{3/2} + v_l^{3/2}) + 1."""
    _, _, da = _iso(p)
    return da / (SQRT2PI * d2) * (v_s**1.5 + v_l**1.5) + 1.0


def em1_parameter_form(p: ModelParams) -> float:
    """e_m1 expressed in the parameters alone: (A_bar-A0)^{3/2} L^2 / (4 pi sqrt(D_hat A0^2)) + 1/4.

    Valid on the asymmetric solution, where it equals 1/(4 C^2) + 1/4.
    """
    _, g, da = _iso(p)
    return g**1.5 * p.L**2 / (4.0 * math.pi * math.sqrt(da)) - 0.75 + 1.0


def _is_asymmetric_solution(v_s, v_l, d2, p) -> bool:
    _, g, da = _iso(p)
    mass = SQRT2PI * (1.0 / math.sqrt(v_s) + 1.0 / math.sqrt(v_l))
    prod = (math.pi / (math.sqrt(2.0) * da)) * (p.L / 2.0) / (v_s**-0.5 + v_l**-0.5)
    t = positions_from_amplitudes((v_s, v_l), p)
    return (
        abs(mass - 2.0 * g * p.L) <= IDENTITY_RTOL * 2.0 * g * p.L
        and abs(v_s * v_l - prod) <= IDENTITY_RTOL * prod
        and abs((t[1] - t[0]) - d2) <= IDENTITY_RTOL * d2
    )


@dataclass(frozen=True)
class Em1Check:
    nondegenerate: bool
    e_m1: float
    e_m1_formula: float
    e_m1_parameter_form: float | None


def nondegeneracy_em1(v_s, v_l, d2, p: ModelParams, *, parameter_form: bool | None = None) -> Em1Check:
    """Test e_m1 != 3/2 with three independent evaluations that must agree.

    The parameter-only form is compared only when the inputs are an
    asymmetric solution (detected from the amplitude identities unless
    ``parameter_form`` forces it on or off).
    """
    m = build_matrices(v_s, v_l, d2, p)
    direct = em1_formula(v_s, v_l, d2, p)
    if abs(m.e_m1 - direct) > EM1_RTOL * abs(direct):
        raise ConsistencyError(f"eigenvalue e_m1={m.e_m1!r} disagrees with formula {direct!r}")
    if parameter_form is None:
        parameter_form = _is_asymmetric_solution(v_s, v_l, d2, p)
    closed = None
    if parameter_form:
        closed = em1_parameter_form(p)
        if abs(closed - direct) > EM1_RTOL * abs(direct):
            raise ConsistencyError(f"e_m1 parameter form {closed!r} disagrees with {direct!r}")
    ok = abs(m.e_m1 - EM1_CRITICAL) > EM1_RTOL * EM1_CRITICAL
    return Em1Check(ok, m.e_m1, direct, closed)


# ---------------------------------------------------------------------------
# position Jacobian
# ---------------------------------------------------------------------------


def F_positions(t, v, p: ModelParams) -> np.ndarray:
    """F_i = m_i/2 + sum_{j<i} m_j - (sum_j m_j)(t_i + L)/(2L) with m_j = sqrt(2) pi / sqrt(v_j)."""
    t = np.asarray(t, dtype=float)
    m = SQRT2PI / np.sqrt(np.asarray(v, dtype=float))
    left = np.concatenate(([0.0], np.cumsum(m)[:-1]))
    return 0.5 * m + left - m.sum() * (t + p.L) / (2.0 * p.L)


def _amplitude_equations(v, t, p):
    # mass balance, and the difference between spikes 2 and 1 of the
    # outer v-profile sum_j m_j |t_i - t_j| / 2 - M t_i^2 / (4L)
    _, g, da = _iso(p)
    m = SQRT2PI / np.sqrt(v)
    M = m.sum()
    mass = M - 2.0 * g * p.L
    gap = t[1] - t[0]
    profile = (0.5 * (m[0] - m[1]) * gap - M * (t[1] ** 2 - t[0] ** 2) / (4.0 * p.L)) / da
    return np.array([mass, (v[1] - v[0]) - profile])


def amplitudes_at(t, v_guess, p: ModelParams, *, tol=1e-14, max_iter=50) -> np.ndarray:
    """v(t) for two spikes at positions t, by Newton from ``v_guess``."""
    t = np.asarray(t, dtype=float)
    v = np.array(v_guess, dtype=float)
    for _ in range(max_iter):
        r = _amplitude_equations(v, t, p)
        J = np.empty((2, 2))
        for k in range(2):
            dv = np.zeros(2)
            dv[k] = 1e-7 * v[k]
            J[:, k] = (_amplitude_equations(v + dv, t, p) - _amplitude_equations(v - dv, t, p)) / (
                2.0 * dv[k]
            )
        step = np.linalg.solve(J, -r)
        lam = 1.0
        while np.any(v + lam * step <= 0):
            lam *= 0.5
            if lam < 1e-8:
                raise ConsistencyError("amplitude system left the positive quadrant")
        v = v + lam * step
        if np.max(np.abs(step) / v) < tol:
            return v
    raise ConsistencyError("amplitude system did not converge")


def detF_closed_form(v1, v2, p: ModelParams) -> float:
    """pi^4/(16 (D_hat A0^2)^2) / (v1^2 v2^2) (a^3-a^2-a+1)/(a^3-2a^2-2a+1), a = sqrt(v2/v1)."""
    _, _, da = _iso(p)
    a = math.sqrt(v2 / v1)
    num = a**3 - a**2 - a + 1.0
    den = a**3 - 2.0 * a**2 - 2.0 * a + 1.0
    pref = math.pi**4 / (16.0 * da**2) / (v1**2 * v2**2)
    if den == 0.0:
        return math.copysign(math.inf, pref * num) if num else math.nan
    return pref * num / den + 0.0


@dataclass(frozen=True)
class DetFResult:
    closed_form: float
    oracle: float
    alpha: float
    denominator: float
    at_pole: bool
    flags: tuple = ()

    @property
    def relative_gap(self) -> float:
        if self.oracle == 0:
            return abs(self.closed_form)
        return abs(self.closed_form - self.oracle) / abs(self.oracle)


def _detF_oracle(t0, v0, p) -> float:
    step = FD_REL_STEP * p.L
    J = np.empty((2, 2))
    for k in range(2):
        dt = np.zeros(2)
        dt[k] = step
        fp = F_positions(t0 + dt, amplitudes_at(t0 + dt, v0, p), p)
        fm = F_positions(t0 - dt, amplitudes_at(t0 - dt, v0, p), p)
        J[:, k] = (fp - fm) / (2.0 * step)
    return float(np.linalg.det(J))


def detF_gradient(v_s: float, v_l: float, p: ModelParams) -> DetFResult:
    """Closed-form det grad F and a centred finite-difference oracle.

    The oracle differentiates t -> F(t, v(t)) where v(t) keeps the mass
    balance and the outer v-profile difference between the two spikes.
    Differences use the step 1e-6 L around the positions solving F = 0.
    """
    v0 = np.array([v_s, v_l], dtype=float)
    t0 = np.asarray(positions_from_amplitudes(v0, p))
    a = math.sqrt(v_l / v_s)
    den = a**3 - 2.0 * a**2 - 2.0 * a + 1.0
    flags = []
    at_pole = abs(den) <= 1e-12 * max(1.0, a**3)
    if at_pole:
        flags.append("pole")
    if abs(a - GOLDEN) <= 1e-9 * GOLDEN:
        # the quoted determinant does not vanish at the golden ratio
        flags.append("golden-ratio-nonvanishing")
    closed = math.inf if at_pole else detF_closed_form(v_s, v_l, p)

    try:
        oracle = _detF_oracle(t0, v0, p)
    except (ConsistencyError, np.linalg.LinAlgError):
        # v(t) is not locally unique, so the oracle has nothing to differentiate
        oracle = math.nan
        flags.append("oracle-undefined")
    scale = math.pi**4 / (16.0 * _iso(p)[2] ** 2) / (v_s**2 * v_l**2)
    if (
        not at_pole
        and math.isfinite(oracle)
        and (abs(closed) <= 1e-9 * scale) != (abs(oracle) <= 1e-6 * scale)
    ):
        flags.append("vanishing-disagreement")
    return DetFResult(closed, oracle, a, den, at_pole, tuple(flags))
