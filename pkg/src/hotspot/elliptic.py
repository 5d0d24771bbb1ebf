"""The v-equation for frozen A_hat and its Schnakenberg comparison problem.

For a given spike profile A_hat, ``solve_T`` returns v_hat = T[A_hat], the
solution of

    D_hat ((A0 + A_hat/eps)^2 v_x)_x - (1/eps) v (eps A0 + A_hat)^3 + gamma = 0

with v_x = 0 at both ends.  ``solve_schnakenberg_v0`` solves the same problem
with the diffusion coefficient replaced by A0^2.

Discretization: vertex-centred finite volumes on the grid nodes.  Node i owns
the control volume of width h (h/2 at the two ends), face coefficients are
arithmetic means of the nodal coefficient, and boundary fluxes are zero.
Multiplying each row by its control volume gives a symmetric positive
definite tridiagonal matrix, solved directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg

from .errors import ParameterError, SingularSystemError
from .model import Grid1D, ModelParams


def face_average(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values[:-1] + values[1:])


def face_gradient(u: np.ndarray, h: float) -> np.ndarray:
    return np.diff(u) / h


def divergence(face_flux: np.ndarray, grid: Grid1D) -> np.ndarray:
    """(F_{i+1/2} - F_{i-1/2}) / vol_i with zero flux through both ends."""
    padded = np.concatenate(([0.0], face_flux, [0.0]))
    return np.diff(padded) / grid.volumes


def div_a_grad(a_face: np.ndarray, u: np.ndarray, grid: Grid1D) -> np.ndarray:
    return divergence(a_face * face_gradient(u, grid.h), grid)


def neumann_laplacian(u: np.ndarray, grid: Grid1D) -> np.ndarray:
    return div_a_grad(np.ones(len(u) - 1), u, grid)


@dataclass(frozen=True, eq=False)
class EllipticSolve:
    v_hat: np.ndarray
    flux: np.ndarray
    balance_residual: float


def _quasilinear_coefficient(A_hat, p: ModelParams):
    return (p.A0(p.x) + A_hat / p.epsilon) ** 2


def _reaction_coefficient(A_hat, p: ModelParams):
    """(1/eps) (eps A0 + A_hat)^3 at every node."""
    return (p.epsilon * p.A0(p.x) + A_hat) ** 3 / p.epsilon


def _checked(A_hat, p: ModelParams) -> np.ndarray:
    A_hat = np.asarray(A_hat, dtype=float)
    if A_hat.shape != (p.grid_n + 1,):
        raise ParameterError(f"A_hat must have {p.grid_n + 1} nodal values")
    if np.any(A_hat < 0):
        raise ParameterError("A_hat must be nonnegative")
    return A_hat


def _solve(a_nodes, A_hat, p: ModelParams) -> EllipticSolve:
    grid = p.grid
    h = grid.h
    vol = grid.volumes
    a_f = face_average(a_nodes)
    c = _reaction_coefficient(A_hat, p)
    gamma = p.gamma(p.x)

    # symmetric banded storage, upper form: row 0 super-diagonal, row 1 diagonal
    diag = vol * c
    diag[:-1] += p.D_hat * a_f / h
    diag[1:] += p.D_hat * a_f / h
    ab = np.zeros((2, grid.n + 1))
    ab[0, 1:] = -p.D_hat * a_f / h
    ab[1] = diag
    if not np.all(diag > 0) or not np.any(vol * c > 0):
        raise SingularSystemError("v-equation is singular: no zero-order term")
    try:
        v = linalg.solveh_banded(ab, vol * gamma)
    except linalg.LinAlgError as exc:
        raise SingularSystemError(f"v-equation could not be factorized: {exc}") from exc

    face_flux = a_f * face_gradient(v, h)
    flux = np.zeros_like(v)
    flux[1:-1] = 0.5 * (face_flux[:-1] + face_flux[1:])
    balance = float(np.dot(vol, c * v - gamma))
    v.flags.writeable = False
    return EllipticSolve(v_hat=v, flux=flux, balance_residual=balance)


def solve_T(A_hat, p: ModelParams) -> EllipticSolve:
    """v_hat = T[A_hat] with diffusion coefficient (A0 + A_hat/eps)^2."""
    A_hat = _checked(A_hat, p)
    return _solve(_quasilinear_coefficient(A_hat, p), A_hat, p)


def solve_schnakenberg_v0(A_hat, p: ModelParams) -> EllipticSolve:
    """Same problem as ``solve_T`` with diffusion coefficient A0^2."""
    return _solve(p.A0(p.x) ** 2, _checked(A_hat, p), p)


def approximation_gap(A_hat, p: ModelParams) -> float:
    """max |T[A_hat] - v0| over the grid."""
    return float(np.max(np.abs(solve_T(A_hat, p).v_hat - solve_schnakenberg_v0(A_hat, p).v_hat)))


def kernel_K_a(a, x: float, s: float) -> float:
    """K_a(x, s) = integral from s to x of 1/a(t) dt.

    ``a`` is either a callable (e.g. a CoefficientField) or a pair
    ``(nodes, values)``; in the second case a is the piecewise-linear
    interpolant of the values and 1/a is integrated adaptively.
    """
    if callable(a):
        f = a
        lo, hi = min(x, s), max(x, s)
        probe = np.linspace(lo, hi, 65)
        breaks = None
    else:
        nodes, values = (np.asarray(z, dtype=float) for z in a)

        def f(t):
            return np.interp(t, nodes, values)

        lo, hi = min(x, s), max(x, s)
        inside = nodes[(nodes > lo) & (nodes < hi)]
        probe = np.concatenate(([lo], inside, [hi]))
        breaks = inside if 0 < inside.size <= 2000 else None
    if np.any(~(np.asarray(f(probe)) > 0)):
        raise ParameterError("kernel coefficient a must be positive on the interval")
    if x == s:
        return 0.0
    if breaks is not None and breaks.size:
        # integrate exactly piece by piece between breakpoints
        pts = np.concatenate(([lo], breaks, [hi]))
        total = 0.0
        for u, w in zip(pts[:-1], pts[1:]):
            total += integrate.quad(lambda t: 1.0 / f(t), u, w, epsabs=0, epsrel=1e-13)[0]
    else:
        total = integrate.quad(lambda t: 1.0 / f(t), lo, hi, epsabs=0, epsrel=1e-13, limit=500)[0]
    return total if x > s else -total
