"""Time stepping, the Newton steady-state solver and spike diagnostics.

Two formulations are used.  Time stepping works on (A, rho), which keeps the
criminal mass balance exact.  Newton works on the rescaled pair
(A_hat, v_hat) with A = A0 + A_hat/eps and v = eps^2 v_hat, where the steady
equations read

    R1 = eps^2 A_hat_xx - A_hat + v_hat (eps A0 + A_hat)^3 + eps^3 A0_xx = 0
    R2 = D_hat ((A0 + A_hat/eps)^2 v_hat_x)_x - v_hat (eps A0 + A_hat)^3 / eps + gamma = 0

Both share the vertex-centred finite-volume operators of ``elliptic``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from .elliptic import div_a_grad, face_average, face_gradient, neumann_laplacian, solve_T
from .errors import DivergenceError, PositivityError, SingularSystemError
from .ground_state import build_ansatz, build_ansatz_with_curvature, w_prime
from .model import FieldState, ModelParams, SpikePattern, uniform_steady_state

DT_SAFETY = 0.2
MAX_HALVINGS = 40
BLOWUP = 1e12
ARMIJO_FLOOR = 2.0**-20
DEFAULT_THRESHOLD = 0.25
# spikes with a twentieth of the tallest height still count when checking a located state
PRESENCE_THRESHOLD = 0.05


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def _sup_weight(pattern: SpikePattern | None, p: ModelParams) -> np.ndarray:
    """max(exp(-|y - t_i/eps|/2) for the nearest spike, sqrt(eps)) at every node."""
    x = p.x
    floor = math.sqrt(p.epsilon)
    if pattern is None or len(pattern) == 0:
        return np.full_like(x, floor)
    dist = np.min(np.abs(x[:, None] - np.asarray(pattern.positions)[None, :]), axis=1)
    return np.maximum(np.exp(-0.5 * dist / p.epsilon), floor)


def _weighted_sup(f, pattern, p):
    return float(np.max(np.abs(f) / _sup_weight(pattern, p)))


def norm_star_star(f, pattern: SpikePattern | None, p: ModelParams) -> float:
    """L^2 norm in the inner variable y = x/eps plus the weighted sup norm."""
    f = np.asarray(f, dtype=float)
    l2 = math.sqrt(float(np.dot(p.grid.volumes, f * f)) / p.epsilon)
    return l2 + _weighted_sup(f, pattern, p)


def norm_star(phi, pattern: SpikePattern | None, p: ModelParams) -> float:
    """H^2 norm in y = x/eps (derivatives by finite differences) plus the weighted sup."""
    phi = np.asarray(phi, dtype=float)
    h, eps = p.grid.h, p.epsilon
    phi_y = eps * np.gradient(phi, h)
    phi_yy = eps * np.gradient(phi_y, h)
    dens = phi * phi + phi_y * phi_y + phi_yy * phi_yy
    h2 = math.sqrt(float(np.dot(p.grid.volumes, dens)) / eps)
    return h2 + _weighted_sup(phi, pattern, p)


# ---------------------------------------------------------------------------
# steady residual and Newton
# ---------------------------------------------------------------------------


def _a0_curvature(p: ModelParams) -> np.ndarray:
    # discrete Neumann Laplacian of A0: keeps A_x = 0 at the ends, as in the
    # time stepper; identically zero for constant A0
    if p.A0.is_constant:
        return np.zeros(p.grid_n + 1)
    return neumann_laplacian(p.A0(p.x), p.grid)


def steady_residual(A_hat, v_hat, p: ModelParams):
    """(R1, R2) of the rescaled steady system at every node."""
    eps = p.epsilon
    grid = p.grid
    a0 = p.A0(p.x)
    base = eps * a0 + A_hat
    cube = base**3
    r1 = eps**2 * neumann_laplacian(A_hat, grid) - A_hat + v_hat * cube + eps**3 * _a0_curvature(p)
    coef = face_average((a0 + A_hat / eps) ** 2)
    r2 = p.D_hat * div_a_grad(coef, v_hat, grid) - v_hat * cube / eps + p.gamma(p.x)
    return r1, r2


def _tridiag(lower, diag, upper):
    return sparse.diags([lower, diag, upper], [-1, 0, 1], format="csc")


def steady_jacobian(A_hat, v_hat, p: ModelParams):
    """Sparse Jacobian of (R1, R2) with respect to (A_hat, v_hat), block ordered."""
    eps = p.epsilon
    grid = p.grid
    h = grid.h
    vol = grid.volumes
    a0 = p.A0(p.x)
    base = eps * a0 + A_hat
    sq = base**2
    cube = sq * base

    lap_off = 1.0 / (h * vol)
    j11 = _tridiag(
        eps**2 / (h * vol[1:]),
        -eps**2 * (np.r_[0.0, np.full(grid.n, 1.0 / h)] + np.r_[np.full(grid.n, 1.0 / h), 0.0]) / vol
        - 1.0
        + 3.0 * v_hat * sq,
        eps**2 * lap_off[:-1],
    )
    j12 = sparse.diags(cube, format="csc")

    b = a0 + A_hat / eps
    coef = face_average(b * b)
    g = face_gradient(v_hat, h)
    db = 2.0 * b / eps
    gl = np.r_[0.0, g]  # gradient on the face left of each node
    gr = np.r_[g, 0.0]
    d = p.D_hat
    j21 = _tridiag(
        -d * 0.5 * db[:-1] * g / vol[1:],
        d * 0.5 * db * (gr - gl) / vol - 3.0 * v_hat * sq / eps,
        d * 0.5 * db[1:] * g / vol[:-1],
    )
    cl = np.r_[0.0, coef]
    cr = np.r_[coef, 0.0]
    j22 = _tridiag(
        d * coef / (h * vol[1:]),
        -d * (cl + cr) / (h * vol) - cube / eps,
        d * coef / (h * vol[:-1]),
    )
    return sparse.bmat([[j11, j12], [j21, j22]], format="csc")


@dataclass(frozen=True, eq=False)
class SteadyResult:
    state: FieldState | None
    A_hat: np.ndarray
    v_hat: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    condition: float = float("nan")
    message: str = ""

    @property
    def newton_iterations(self) -> int:
        return self.iterations


def ansatz_seed(pattern: SpikePattern, p: ModelParams, *, use_cutoff: bool = True):
    """(A_hat, T[A_hat]) for a spike pattern: the standard Newton seed."""
    A_hat = build_ansatz(pattern, p, use_cutoff=use_cutoff)
    return A_hat, np.array(solve_T(A_hat, p).v_hat)


def _merit(r1, r2, eps):
    return math.sqrt(float(np.dot(r1, r1)) + eps * eps * float(np.dot(r2, r2)))


def _residual_measure(r1, r2, pattern, p):
    # R2 carries a 1/eps reaction scale; eps R2 is commensurate with R1
    return max(norm_star_star(r1, pattern, p), norm_star_star(p.epsilon * r2, pattern, p))


def _admissible(A_hat, v_hat, p):
    return (
        np.all(np.isfinite(A_hat))
        and np.all(np.isfinite(v_hat))
        and np.all(v_hat > 0)
        and np.all(p.A0(p.x) + A_hat / p.epsilon > 0)
    )


def _condition_estimate(J, lu) -> float:
    n = J.shape[0]
    inv = splinalg.LinearOperator(
        (n, n),
        matvec=lambda b: lu.solve(np.asarray(b, dtype=float).ravel()),
        rmatvec=lambda b: lu.solve(np.asarray(b, dtype=float).ravel(), trans="T"),
        dtype=float,
    )
    return float(splinalg.onenormest(J) * splinalg.onenormest(inv))


def newton_steady(
    seed,
    p: ModelParams,
    tol: float = 1e-8,
    *,
    max_iter: int = 50,
    pattern: SpikePattern | None = None,
) -> SteadyResult:
    """Damped Newton for the rescaled steady system starting from ``seed = (A_hat, v_hat)``.

    The residual is measured as max(||R1||**, ||eps R2||**) with the sup
    weight centred on ``pattern`` (the seed's spikes when omitted).  Steps are
    halved until the Euclidean merit decreases (Armijo, floor 2^-20) and the
    iterate keeps A > 0 and v_hat > 0.
    """
    A_hat = np.array(seed[0], dtype=float)
    v_hat = np.array(seed[1], dtype=float)
    n = p.grid_n + 1
    if A_hat.shape != (n,) or v_hat.shape != (n,):
        raise ValueError(f"seed arrays must have {n} nodal values")
    if not _admissible(A_hat, v_hat, p):
        raise PositivityError("seed must have A > 0 and v_hat > 0 at every node")
    eps = p.epsilon
    if pattern is None:
        state = FieldState.from_rescaled(A_hat, v_hat, p)
        pattern = measure_spikes(state, p).pattern

    r1, r2 = steady_residual(A_hat, v_hat, p)
    res = _residual_measure(r1, r2, pattern, p)
    merit = _merit(r1, r2, eps)
    cond = float("nan")
    it = 0
    message = ""
    while res > tol and it < max_iter:
        J = steady_jacobian(A_hat, v_hat, p)
        try:
            lu = splinalg.splu(J)
        except RuntimeError as exc:
            raise SingularSystemError(
                f"steady Jacobian is singular ({exc}); the spike configuration may be degenerate"
            ) from exc
        step = lu.solve(-np.concatenate((r1, r2)))
        if not np.all(np.isfinite(step)):
            raise SingularSystemError("steady Jacobian solve produced non-finite values")
        cond = _condition_estimate(J, lu)
        dA, dv = step[:n], step[n:]
        lam = 1.0
        while True:
            A_try = A_hat + lam * dA
            v_try = v_hat + lam * dv
            if _admissible(A_try, v_try, p):
                t1, t2 = steady_residual(A_try, v_try, p)
                m_try = _merit(t1, t2, eps)
                if m_try <= (1.0 - 1e-4 * lam) * merit:
                    break
            lam *= 0.5
            if lam < ARMIJO_FLOOR:
                message = "line search failed: no descent direction"
                break
        if message:
            break
        A_hat, v_hat, r1, r2, merit = A_try, v_try, t1, t2, m_try
        res = _residual_measure(r1, r2, pattern, p)
        it += 1

    converged = res <= tol
    if not converged and not message:
        message = f"no convergence after {it} iterations"
    if np.isnan(cond):
        J = steady_jacobian(A_hat, v_hat, p)
        try:
            cond = _condition_estimate(J, splinalg.splu(J))
        except RuntimeError:
            cond = float("inf")
    state = FieldState.from_rescaled(A_hat, v_hat, p) if _admissible(A_hat, v_hat, p) else None
    A_hat.flags.writeable = False
    v_hat.flags.writeable = False
    return SteadyResult(state, A_hat, v_hat, res, it, converged, cond, message)


def _translation_modes(positions, p: ModelParams) -> np.ndarray:
    return np.stack([w_prime((p.x - t) / p.epsilon) for t in positions], axis=1)


@dataclass(frozen=True, eq=False)
class PinnedSolve:
    """Steady state with spike centres held fixed by multipliers ``beta``."""

    positions: tuple
    A_hat: np.ndarray
    v_hat: np.ndarray
    beta: np.ndarray
    iterations: int


def pinned_steady(positions, seed, p: ModelParams, *, tol=1e-11, max_iter=40) -> PinnedSolve:
    """Solve R1 + sum_k beta_k w'((x - t_k)/eps) = 0, R2 = 0 with each spike centred at t_k.

    Centring means <A_hat, w'((x - t_k)/eps)> = 0.  Freezing the positions
    removes the nearly neutral translation directions, so this bordered
    Newton iteration converges from seeds that plain Newton cannot handle.
    """
    A_hat = np.array(seed[0], dtype=float)
    v_hat = np.array(seed[1], dtype=float)
    beta = np.zeros(len(positions)) if len(seed) < 3 else np.array(seed[2], dtype=float)
    n = p.grid_n + 1
    K = len(positions)
    phi = _translation_modes(positions, p)
    vol = p.grid.volumes
    border_col = sparse.csc_matrix(np.vstack((phi, np.zeros((n, K)))))
    border_row = sparse.csc_matrix(np.hstack(((phi * vol[:, None]).T, np.zeros((K, n)))))
    for it in range(1, max_iter + 1):
        r1, r2 = steady_residual(A_hat, v_hat, p)
        rhs = -np.concatenate((r1 + phi @ beta, r2, phi.T @ (vol * A_hat)))
        M = sparse.bmat(
            [[steady_jacobian(A_hat, v_hat, p), border_col], [border_row, None]], format="csc"
        )
        try:
            d = splinalg.splu(M).solve(rhs)
        except RuntimeError as exc:
            raise SingularSystemError(f"pinned steady system is singular: {exc}") from exc
        lam = 1.0
        while not _admissible(A_hat + lam * d[:n], v_hat + lam * d[n : 2 * n], p):
            lam *= 0.5
            if lam < ARMIJO_FLOOR:
                raise SingularSystemError("pinned Newton step cannot keep the fields positive")
        A_hat += lam * d[:n]
        v_hat += lam * d[n : 2 * n]
        beta += lam * d[2 * n :]
        if lam == 1.0 and np.max(np.abs(d[:n])) <= tol * max(1.0, np.max(np.abs(A_hat))):
            return PinnedSolve(tuple(positions), A_hat, v_hat, beta, it)
    raise SingularSystemError("pinned steady solve did not converge")


def locate_steady(
    pattern: SpikePattern,
    p: ModelParams,
    tol: float = 1e-8,
    *,
    use_cutoff: bool = True,
    max_outer: int = 40,
    seed=None,
) -> SteadyResult:
    """Steady state found by moving pinned spikes until every multiplier vanishes.

    The outer iteration is Newton on beta(t) = 0 with a finite-difference
    Jacobian and position updates capped at eps/4; the final state is
    polished by ``newton_steady`` so the reported residual is that of the
    unconstrained system.
    """
    eps = p.epsilon
    t = np.array(pattern.positions, dtype=float)
    if seed is None:
        seed = ansatz_seed(pattern, p, use_cutoff=use_cutoff)
    try:
        sol = pinned_steady(t, seed, p)
        delta = 1e-3 * eps
        for _ in range(max_outer):
            jac = np.empty((len(t), len(t)))
            for k in range(len(t)):
                tk = t.copy()
                tk[k] += delta
                jac[:, k] = (pinned_steady(tk, (sol.A_hat, sol.v_hat, sol.beta), p).beta - sol.beta) / delta
            move = -np.linalg.solve(jac, sol.beta)
            big = np.max(np.abs(move))
            if big > 0.25 * eps:
                move *= 0.25 * eps / big
            t = t + move
            SpikePattern(t, np.ones(len(t))).check_separation(p.L)
            sol = pinned_steady(t, (sol.A_hat, sol.v_hat, sol.beta), p)
            if big <= 1e-10 * p.L:
                break
    except (SingularSystemError, np.linalg.LinAlgError, ValueError) as exc:
        return SteadyResult(None, np.asarray(seed[0]), np.asarray(seed[1]), math.inf, 0, False,
                            message=f"position search failed: {exc}")
    where = SpikePattern(t, pattern.v_amplitudes)
    result = newton_steady((sol.A_hat, sol.v_hat), p, tol, pattern=where)
    if result.state is not None:
        found = measure_spikes(result.state, p, threshold=PRESENCE_THRESHOLD).pattern
        if len(found) != len(pattern):
            return replace(
                result,
                converged=False,
                message=f"position search ended on a {len(found)}-spike state, not {len(pattern)}",
            )
    return result


def steady_from_pattern(
    pattern: SpikePattern, p: ModelParams, tol: float = 1e-8, *, use_cutoff: bool = True, max_iter=50
) -> SteadyResult:
    """Newton from the ansatz of ``pattern``; falls back to ``locate_steady`` when it stalls."""
    seed = ansatz_seed(pattern, p, use_cutoff=use_cutoff)
    result = newton_steady(seed, p, tol, max_iter=max_iter, pattern=pattern)
    if result.converged:
        return result
    located = locate_steady(pattern, p, tol, seed=seed)
    return located if located.converged else result


def residual_of_ansatz(pattern: SpikePattern, p: ModelParams, *, use_cutoff: bool = True) -> float:
    """||eps^2 A_hat_xx - A_hat + T[A_hat](eps A0 + A_hat)^3||** for the spike ansatz."""
    A_hat, A_xx = build_ansatz_with_curvature(pattern, p, use_cutoff=use_cutoff)
    v_hat = solve_T(A_hat, p).v_hat
    S = p.epsilon**2 * A_xx - A_hat + v_hat * (p.epsilon * p.A0(p.x) + A_hat) ** 3
    return norm_star_star(S, pattern, p)


# ---------------------------------------------------------------------------
# spike measurement
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MeasuredSpikes:
    pattern: SpikePattern
    indices: tuple = ()
    threshold: float = DEFAULT_THRESHOLD

    @property
    def boundary_flags(self) -> tuple:
        return tuple(f == "boundary" for f in self.pattern.flags)


def _plateau_maxima(f: np.ndarray) -> list[int]:
    """Leftmost index of every local maximum run (plateaus count once)."""
    n = len(f)
    out = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and f[j + 1] == f[i]:
            j += 1
        left_ok = i == 0 or f[i - 1] < f[i]
        right_ok = j == n - 1 or f[j + 1] < f[i]
        if left_ok and right_ok and not (i == 0 and j == n - 1):
            out.append(i)
        i = j + 1
    return out


def measure_spikes(
    state: FieldState, p: ModelParams, *, threshold: float = DEFAULT_THRESHOLD
) -> MeasuredSpikes:
    """Locate spikes as local maxima of A - A0(x) and read off v/eps^2 there.

    A maximum counts when its height above the minimum of A - A0 is at least
    ``threshold`` times the largest such height.  Interior positions are
    refined by the vertex of the parabola through three nodes; a maximum on an
    end node is moved to its interior neighbour and flagged ``"boundary"``.
    """
    x = p.x
    h = p.grid.h
    excess = np.asarray(state.A) - p.A0(x)
    v = np.asarray(state.v)
    top = float(np.max(excess))
    floor = float(np.min(excess))
    span = top - floor
    if not span > 1e-12 * max(abs(top), 1.0):
        return MeasuredSpikes(SpikePattern((), ()), (), threshold)

    positions, amps, flags, idx = [], [], [], []
    last = len(x) - 1
    for i in _plateau_maxima(excess):
        if excess[i] - floor < threshold * span:
            continue
        if i in (0, last):
            k = 1 if i == 0 else last - 1
            positions.append(float(x[k]))
            amps.append(float(v[i]) / p.epsilon**2)
            flags.append("boundary")
            idx.append(i)
            continue
        fl, fc, fr = excess[i - 1], excess[i], excess[i + 1]
        curv = fl - 2.0 * fc + fr
        delta = 0.0 if curv >= 0 else float(np.clip(0.5 * (fl - fr) / curv, -0.5, 0.5))
        # quadratic interpolation of v through the same three nodes
        vl, vc, vr = v[i - 1], v[i], v[i + 1]
        v_at = vc + 0.5 * delta * (vr - vl) + 0.5 * delta * delta * (vr - 2.0 * vc + vl)
        positions.append(float(x[i] + delta * h))
        amps.append(float(v_at) / p.epsilon**2)
        flags.append("")
        idx.append(i)
    return MeasuredSpikes(SpikePattern(positions, amps, tuple(flags)), tuple(idx), threshold)


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------


def stable_dt(state: FieldState) -> float:
    """0.2 min(1, 1/max|3 v A^2|): the explicit-reaction step limit."""
    peak = float(np.max(np.abs(3.0 * np.asarray(state.rho))))
    return DT_SAFETY * min(1.0, 1.0 / peak) if peak > 0 else DT_SAFETY


def _banded(lower, diag, upper):
    ab = np.zeros((3, len(diag)))
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    return ab


def _try_step(state: FieldState, dt: float, p: ModelParams):
    grid = p.grid
    h = grid.h
    vol = grid.volumes
    A, rho = np.asarray(state.A), np.asarray(state.rho)
    a0 = p.A0(p.x)
    gamma = p.gamma(p.x)

    # A: implicit diffusion and decay, explicit source rho A + A0
    k = dt * p.epsilon**2 / h
    off = np.full(grid.n, -k)
    diag = vol * (1.0 + dt)
    diag[:-1] += k
    diag[1:] += k
    A_new = linalg.solve_banded((1, 1), _banded(off, diag, off), vol * (A + dt * (rho * A + a0)))

    # rho: conservative flux D A^2 v_x with A frozen at A_new, loss rho A implicit
    if not np.all(A_new > 0):
        return A_new, None
    s = 1.0 / A_new**2
    kf = dt * p.D * face_average(A_new**2) / h
    diag = vol * (1.0 + dt * A_new)
    diag[:-1] += kf * s[:-1]
    diag[1:] += kf * s[1:]
    lower = -kf * s[:-1]  # row i+1, column i
    upper = -kf * s[1:]  # row i, column i+1
    rho_new = linalg.solve_banded((1, 1), _banded(lower, diag, upper), vol * (rho + dt * gamma))
    return A_new, rho_new


def step(state: FieldState, dt: float, p: ModelParams) -> FieldState:
    """One implicit-explicit step of at most ``dt``.

    The step is capped by ``stable_dt`` and halved until both fields stay
    positive; the returned state's ``t`` records the step actually taken.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    dt = min(dt, stable_dt(state))
    bad = "?"
    for _ in range(MAX_HALVINGS):
        A_new, rho_new = _try_step(state, dt, p)
        ok_A = np.all(np.isfinite(A_new)) and np.all(A_new > 0)
        if ok_A and rho_new is not None and np.all(np.isfinite(rho_new)) and np.all(rho_new > 0):
            return FieldState(A_new, rho_new, state.t + dt)
        if not ok_A:
            bad = f"A at node {int(np.argmin(np.where(np.isfinite(A_new), A_new, -np.inf)))}"
        else:
            bad = f"rho at node {int(np.argmin(np.where(np.isfinite(rho_new), rho_new, -np.inf)))}"
        dt *= 0.5
    raise DivergenceError(f"time step underflow: positivity lost for {bad}")


@dataclass(eq=False)
class SteppedRun:
    states: list
    dt_history: list = field(default_factory=list)
    convergence_metric: float = float("inf")
    converged: bool = False
    reason: str = ""

    @property
    def final(self) -> FieldState:
        return self.states[-1]

    @property
    def steps(self) -> int:
        return len(self.dt_history)


def run_to_steady(
    initial: FieldState,
    p: ModelParams,
    t_max: float,
    tol: float,
    *,
    dt0: float = 1e-3,
    dt_growth: float = 1.2,
    snap_every: int = 0,
    max_steps: int = 1_000_000,
    on_snapshot=None,
) -> SteppedRun:
    """Step until max|state change|/dt <= tol or the time reaches ``t_max``.

    ``snap_every > 0`` keeps every that many accepted states in addition to the
    first and last; ``on_snapshot`` is called with each kept state as it is
    taken.  A DivergenceError carries the last accepted state as ``last_state``.
    """
    run = SteppedRun([initial])
    keep = on_snapshot if on_snapshot is not None else (lambda s: None)
    keep(initial)
    if math.isinf(tol) and tol > 0:
        run.converged, run.reason = True, "tolerance is infinite"
        return run
    if t_max <= initial.t:
        run.reason = "t_max reached"
        return run
    state = initial
    dt = dt0
    while len(run.dt_history) < max_steps:
        dt = min(dt, t_max - state.t)
        try:
            new = step(state, dt, p)
        except DivergenceError as exc:
            exc.last_state = state
            raise
        taken = new.t - state.t
        metric = max(
            float(np.max(np.abs(new.A - state.A))), float(np.max(np.abs(new.rho - state.rho)))
        ) / taken
        if not (np.max(new.A) < BLOWUP and np.max(new.rho) < BLOWUP):
            exc = DivergenceError(f"solution exceeded {BLOWUP:g} at t={new.t:g}")
            exc.last_state = state
            raise exc
        run.dt_history.append(taken)
        run.convergence_metric = metric
        state = new
        if snap_every and len(run.dt_history) % snap_every == 0:
            run.states.append(state)
            keep(state)
        if metric <= tol:
            run.converged, run.reason = True, "converged"
            break
        if state.t >= t_max * (1 - 1e-14):
            run.reason = "t_max reached"
            break
        dt = taken * dt_growth
    else:
        run.reason = "step limit reached"
    if run.states[-1] is not state:
        run.states.append(state)
        keep(state)
    return run


def perturbed_uniform(p: ModelParams, K: int = 1, amplitude: float = 0.05) -> FieldState:
    """Uniform steady state with A multiplied by 1 + amplitude cos(pi K x / L)."""
    base = uniform_steady_state(p)
    A = base.A * (1.0 + amplitude * np.cos(math.pi * K * p.x / p.L))
    return FieldState(A, base.rho)
