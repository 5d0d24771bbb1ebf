"""Parameters, coefficient fields, the 1D grid and the PDE state.

The model is the one-dimensional crime hotspot system

    A_t   = eps^2 A_xx - A + rho A + A0(x)
    rho_t = D (rho_x - 2 (rho/A) A_x)_x - rho A + gamma(x)

on (-L, L) with homogeneous Neumann conditions and ``D = D_hat / eps^2``.
State is always stored as ``(A, rho)``; ``v = rho / A^2`` is a derived view.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ParameterError, PositivityError, SeparationError

COEFFICIENT_KINDS = ("constant", "affine", "piecewise", "sampled")

# Minimum cells per spike width; validated against the grid spacing.
CELLS_PER_EPSILON = 8


@dataclass(frozen=True)
class CoefficientField:
    """A spatially varying positive coefficient such as A0(x) or gamma(x).

    ``values`` depends on ``kind``:

    * constant: ``(c,)``
    * affine: ``(a, b)`` for ``a + b x``
    * piecewise: ``(x_0, y_0, x_1, y_1, ...)`` with strictly increasing x_k;
      constant extrapolation outside ``[x_0, x_last]``
    * sampled: ``(x_0, y_0, ...)`` as for piecewise, but integrated with the
      trapezoidal rule and differentiated twice by central differences.
    """

    kind: str
    values: tuple

    def __post_init__(self):
        if self.kind not in COEFFICIENT_KINDS:
            raise ParameterError(f"unknown coefficient kind {self.kind!r}")
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        need = {"constant": 1, "affine": 2}
        if self.kind in need and len(vals) != need[self.kind]:
            raise ParameterError(
                f"{self.kind} field needs {need[self.kind]} parameter(s), got {len(vals)}"
            )
        if self.kind in ("piecewise", "sampled"):
            if len(vals) < 4 or len(vals) % 2:
                raise ParameterError(
                    f"{self.kind} field needs an even number (>= 4) of x, y parameters"
                )
            xs = np.asarray(vals[0::2])
            if np.any(np.diff(xs) <= 0):
                raise ParameterError(f"{self.kind} breakpoints must be strictly increasing")

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, c: float) -> "CoefficientField":
        return cls("constant", (c,))

    @classmethod
    def affine(cls, a: float, b: float) -> "CoefficientField":
        return cls("affine", (a, b))

    @classmethod
    def piecewise_linear(cls, xs: Sequence[float], ys: Sequence[float]) -> "CoefficientField":
        return cls("piecewise", _interleave(xs, ys))

    @classmethod
    def sampled_on(cls, L: float, ys: Sequence[float]) -> "CoefficientField":
        """Samples at equally spaced points spanning [-L, L]."""
        xs = np.linspace(-L, L, len(ys))
        return cls("sampled", _interleave(xs, ys))

    # -- queries ------------------------------------------------------------
    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    @property
    def breakpoints(self) -> np.ndarray:
        if self.kind in ("piecewise", "sampled"):
            return np.asarray(self.values[0::2])
        return np.empty(0)

    def _xy(self):
        return np.asarray(self.values[0::2]), np.asarray(self.values[1::2])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.values[0])
        if self.kind == "affine":
            a, b = self.values
            return a + b * x
        xs, ys = self._xy()
        return np.interp(x, xs, ys)

    evaluate = __call__

    def second_derivative(self, x):
        """Pointwise second derivative (zero away from kinks for exact kinds)."""
        x = np.asarray(x, dtype=float)
        if self.kind != "sampled":
            return np.zeros_like(x)
        xs, ys = self._xy()
        d2 = np.zeros_like(ys)
        if len(xs) >= 3:
            hl = xs[1:-1] - xs[:-2]
            hr = xs[2:] - xs[1:-1]
            d2[1:-1] = 2.0 * (
                (ys[2:] - ys[1:-1]) / hr - (ys[1:-1] - ys[:-2]) / hl
            ) / (hl + hr)
        return np.interp(x, xs, d2)

    def integrate(self, a: float, b: float) -> float:
        """Integral over [a, b] (signed; a > b gives the negative)."""
        a = float(a)
        b = float(b)
        if a == b:
            return 0.0
        if a > b:
            return -self.integrate(b, a)
        if self.kind == "constant":
            return self.values[0] * (b - a)
        if self.kind == "affine":
            c0, c1 = self.values
            return c0 * (b - a) + 0.5 * c1 * (b * b - a * a)
        # piecewise-linear interpolant: the trapezoid rule over the breakpoints
        # inside [a, b] plus the two endpoints is exact.
        xs, _ = self._xy()
        inner = xs[(xs > a) & (xs < b)]
        pts = np.concatenate(([a], inner, [b]))
        return float(np.trapezoid(self(pts), pts))


def _interleave(xs, ys):
    xs = list(xs)
    ys = list(ys)
    if len(xs) != len(ys):
        raise ParameterError("x and y lists differ in length")
    out = []
    for x, y in zip(xs, ys):
        out.extend((float(x), float(y)))
    return tuple(out)


@dataclass(frozen=True)
class Grid1D:
    """Uniform nodes x_0 = -L, ..., x_N = L."""

    L: float
    n: int

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def nodes(self) -> np.ndarray:
        x = np.linspace(-self.L, self.L, self.n + 1)
        x.flags.writeable = False
        return x

    @property
    def volumes(self) -> np.ndarray:
        """Control-volume widths: h in the interior, h/2 at the two ends."""
        w = np.full(self.n + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def integrate(self, f) -> float:
        """Trapezoidal integral of nodal values; the discrete mass of the scheme."""
        return float(np.dot(self.volumes, f))


@dataclass(frozen=True)
class ModelParams:
    """All physical and numerical parameters of one configuration."""

    L: float
    epsilon: float
    D_hat: float
    A0: CoefficientField
    gamma: CoefficientField
    grid_n: int

    @property
    def grid(self) -> Grid1D:
        return Grid1D(self.L, int(self.grid_n))

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def D(self) -> float:
        """Criminal diffusivity of the unscaled system."""
        return self.D_hat / self.epsilon**2

    @property
    def isotropic(self) -> bool:
        return self.A0.is_constant and self.gamma.is_constant

    @property
    def A0_value(self) -> float:
        self.require_isotropic()
        return self.A0.values[0]

    @property
    def A_bar(self) -> float:
        """A0 + gamma in the isotropic configuration (gamma = A_bar - A0)."""
        self.require_isotropic()
        return self.A0.values[0] + self.gamma.values[0]

    def require_isotropic(self):
        if not self.isotropic:
            raise ParameterError("operation requires constant A0 and gamma (isotropic configuration)")

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def with_resolution(self, cells_per_epsilon: float = CELLS_PER_EPSILON) -> "ModelParams":
        """Same parameters on the coarsest grid with h <= epsilon / cells_per_epsilon."""
        n = int(np.ceil(2.0 * self.L * cells_per_epsilon / self.epsilon - 1e-9))
        return self.with_(grid_n=max(n, 16))


def isotropic_params(
    L=1.0, epsilon=0.05, D_hat=1.0, A0=1.0, A_bar=2.0, grid_n=None
) -> ModelParams:
    """Convenience constructor for constant A0 and gamma = A_bar - A0."""
    p = ModelParams(
        L=L,
        epsilon=epsilon,
        D_hat=D_hat,
        A0=CoefficientField.constant(A0),
        gamma=CoefficientField.constant(A_bar - A0),
        grid_n=16 if grid_n is None else grid_n,
    )
    return p.with_resolution() if grid_n is None else p


def validate_params(p: ModelParams) -> list[str]:
    """Return every violated ModelParams invariant; an empty list means ok."""
    problems = []
    if not p.epsilon > 0:
        problems.append("epsilon must be positive")
    if not p.D_hat > 0:
        problems.append("D_hat must be positive")
    if not p.L > 0:
        problems.append("L must be positive")
    if int(p.grid_n) != p.grid_n or p.grid_n < 16:
        problems.append("grid_n must be an integer >= 16")
    if problems:
        # remaining checks need a usable domain and grid
        if p.L > 0 and int(p.grid_n) == p.grid_n and p.grid_n >= 1:
            problems.extend(_field_problems(p))
        return problems
    problems.extend(_field_problems(p))
    h = 2.0 * p.L / p.grid_n
    if h > p.epsilon / CELLS_PER_EPSILON * (1 + 1e-12):
        problems.append(
            f"grid does not resolve epsilon: h={h:.6g} > epsilon/{CELLS_PER_EPSILON}"
            f"={p.epsilon / CELLS_PER_EPSILON:.6g}"
        )
    return problems


def _field_problems(p: ModelParams) -> list[str]:
    out = []
    x = np.linspace(-p.L, p.L, int(p.grid_n) + 1)
    for name, fld in (("A0", p.A0), ("gamma", p.gamma)):
        bp = fld.breakpoints
        pts = np.unique(np.concatenate((x, bp[(bp >= -p.L) & (bp <= p.L)])))
        vals = fld(pts)
        bad = np.nonzero(~(vals > 0))[0]
        if bad.size:
            out.append(f"{name} non-positive at x={pts[bad[0]]:g}")
    return out


def check_params(p: ModelParams) -> ModelParams:
    problems = validate_params(p)
    if problems:
        raise ParameterError(problems)
    return p


@dataclass(frozen=True, eq=False)
class FieldState:
    """Discretized (A, rho) pair on the grid at time t."""

    A: np.ndarray
    rho: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        rho = np.array(self.rho, dtype=float)
        if A.shape != rho.shape or A.ndim != 1:
            raise ValueError("A and rho must be 1D arrays of equal length")
        _require_positive("A", A)
        _require_positive("rho", rho)
        A.flags.writeable = False
        rho.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "rho", rho)

    @property
    def v(self) -> np.ndarray:
        return to_v(self)

    @classmethod
    def from_A_v(cls, A, v, t=0.0) -> "FieldState":
        A = np.asarray(A, dtype=float)
        return cls(A, np.asarray(v, dtype=float) * A**2, t)

    @classmethod
    def from_rescaled(cls, A_hat, v_hat, p: ModelParams, t=0.0) -> "FieldState":
        """Undo A = A0 + A_hat/eps, v = eps^2 v_hat."""
        A = p.A0(p.x) + np.asarray(A_hat) / p.epsilon
        return cls.from_A_v(A, p.epsilon**2 * np.asarray(v_hat), t)

    def rescaled(self, p: ModelParams):
        """(A_hat, v_hat) with A = A0 + A_hat/eps and v = eps^2 v_hat."""
        A_hat = p.epsilon * (self.A - p.A0(p.x))
        return A_hat, self.v / p.epsilon**2


def _require_positive(name, arr):
    bad = np.nonzero(~(arr > 0))[0]
    if bad.size:
        i = int(bad[0])
        raise PositivityError(f"{name} must be positive at every node; {name}[{i}]={arr[i]!r}")


def to_v(state: FieldState) -> np.ndarray:
    """v = rho / A^2 node by node."""
    A = np.asarray(state.A, dtype=float)
    _require_positive("A", A)
    return np.asarray(state.rho) / A**2


def uniform_steady_state(p: ModelParams) -> FieldState:
    """The spatially constant state (A, rho) = (gamma + A0, gamma / (gamma + A0))."""
    p.require_isotropic()
    a0 = p.A0.values[0]
    g = p.gamma.values[0]
    if not (a0 > 0 and g > 0):
        raise ParameterError("A0 and gamma must be positive")
    n = p.grid_n + 1
    return FieldState(np.full(n, g + a0), np.full(n, g / (g + a0)))


@dataclass(frozen=True)
class SpikePattern:
    """Ordered spike positions with their v-amplitudes."""

    positions: tuple
    v_amplitudes: tuple
    flags: tuple = field(default=(), compare=False)

    def __post_init__(self):
        t = tuple(float(x) for x in self.positions)
        v = tuple(float(x) for x in self.v_amplitudes)
        if len(t) != len(v):
            raise ValueError("positions and v_amplitudes differ in length")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise SeparationError("spike positions must be strictly increasing")
        if any(not a > 0 for a in v):
            raise ValueError("v-amplitudes must be positive")
        object.__setattr__(self, "positions", t)
        object.__setattr__(self, "v_amplitudes", v)

    def __len__(self):
        return len(self.positions)

    @property
    def K(self) -> int:
        return len(self.positions)

    def separation(self, L: float) -> float:
        """min(t_1 + L, L - t_K, half the smallest gap); positive iff admissible."""
        if not self.positions:
            return float(L)
        t = np.asarray(self.positions)
        cands = [t[0] + L, L - t[-1]]
        if len(t) > 1:
            cands.append(0.5 * np.min(np.diff(t)))
        return float(min(cands))

    def check_separation(self, L: float) -> float:
        s = self.separation(L)
        if not s > 0:
            raise SeparationError(
                f"spike pattern not separated inside (-{L}, {L}): separation={s:g}"
            )
        return s

    def reflected(self) -> "SpikePattern":
        return SpikePattern(
            tuple(-x for x in reversed(self.positions)), tuple(reversed(self.v_amplitudes))
        )

    def as_dict(self) -> dict:
        return {"positions": list(self.positions), "v_amplitudes": list(self.v_amplitudes)}
