import math

import numpy as np
import pytest

from hotspot import DivergenceError, FieldState, PositivityError, SpikePattern, isotropic_params
from hotspot.asymptotics import symmetric_prediction
from hotspot.model import uniform_steady_state
from hotspot.pde import (
    ansatz_seed,
    measure_spikes,
    newton_steady,
    norm_star,
    norm_star_star,
    perturbed_uniform,
    residual_of_ansatz,
    run_to_steady,
    stable_dt,
    steady_from_pattern,
    steady_residual,
    step,
)


@pytest.fixture(scope="module")
def single_spike():
    """Converged single spike at eps=0.05 with its parameters."""
    p = isotropic_params(epsilon=0.05)
    pred = symmetric_prediction(1, p)
    return p, pred, newton_steady(ansatz_seed(pred.pattern, p), p, pattern=pred.pattern)


class TestNewton:
    def test_converges_quickly(self, single_spike):
        _, _, res = single_spike
        assert res.converged
        assert res.iterations <= 15
        assert res.residual_norm <= 1e-8

    def test_converged_state_is_discrete_root(self, single_spike):
        p, _, res = single_spike
        r1, r2 = steady_residual(res.A_hat, res.v_hat, p)
        assert np.max(np.abs(r1)) < 1e-8
        assert np.max(np.abs(p.epsilon * r2)) < 1e-7

    def test_exact_seed_needs_no_iterations(self, single_spike):
        p, pred, res = single_spike
        again = newton_steady((res.A_hat, res.v_hat), p, pattern=pred.pattern)
        assert again.converged and again.iterations <= 1

    def test_condition_reported(self, single_spike):
        _, _, res = single_spike
        assert math.isfinite(res.condition) and res.condition >= 1.0

    def test_integral_balance(self, single_spike):
        """Total source equals total loss at a steady state."""
        p, _, res = single_spike
        loss = res.v_hat * (p.epsilon * p.A0(p.x) + res.A_hat) ** 3 / p.epsilon
        source = p.grid.integrate(p.gamma(p.x))
        assert p.grid.integrate(loss) == pytest.approx(source, rel=1e-6)

    def test_positive_state(self, single_spike):
        _, _, res = single_spike
        assert np.all(res.state.A > 0) and np.all(res.state.rho > 0)

    def test_rejects_bad_seed(self, sym_params):
        p = sym_params
        n = p.grid_n + 1
        with pytest.raises(ValueError):
            newton_steady((np.zeros(n - 1), np.ones(n - 1)), p)
        with pytest.raises(PositivityError):
            newton_steady((np.zeros(n), -np.ones(n)), p)

    def test_result_is_read_only(self, single_spike):
        _, _, res = single_spike
        with pytest.raises(ValueError):
            res.A_hat[0] = 1.0

    def test_amplitude_near_prediction(self, single_spike):
        p, pred, res = single_spike
        m = measure_spikes(res.state, p).pattern
        assert m.positions[0] == pytest.approx(0.0, abs=p.grid.h)
        assert m.v_amplitudes[0] == pytest.approx(pred.v0, rel=0.25)

    def test_two_spike_steady(self, sym_params):
        p = sym_params
        pred = symmetric_prediction(2, p)
        res = steady_from_pattern(pred.pattern, p)
        assert res.converged
        m = measure_spikes(res.state, p).pattern
        np.testing.assert_allclose(m.positions, (-0.5, 0.5), atol=2 * p.grid.h)


class TestMeasureSpikes:
    def test_two_spikes(self, sym_params):
        p = sym_params
        pat = SpikePattern((-0.5, 0.5), (4.0, 4.0))
        A_hat, v_hat = ansatz_seed(pat, p)
        m = measure_spikes(FieldState.from_rescaled(A_hat, v_hat, p), p)
        assert len(m.pattern) == 2
        np.testing.assert_allclose(m.pattern.positions, (-0.5, 0.5), atol=p.grid.h)
        assert m.boundary_flags == (False, False)

    def test_off_grid_position_refined(self, sym_params):
        p = sym_params
        t = 0.37 * p.grid.h
        A_hat, v_hat = ansatz_seed(SpikePattern((t,), (4.0,)), p)
        m = measure_spikes(FieldState.from_rescaled(A_hat, v_hat, p), p)
        assert m.pattern.positions[0] == pytest.approx(t, abs=0.1 * p.grid.h)

    def test_uniform_has_no_spikes(self, sym_params):
        m = measure_spikes(uniform_steady_state(sym_params), sym_params)
        assert len(m.pattern) == 0

    def test_boundary_peak_flagged(self, sym_params):
        p = sym_params
        A = 2.0 + np.exp(-((p.x + p.L) / 0.1) ** 2)
        m = measure_spikes(FieldState(A, np.ones_like(A)), p)
        assert len(m.pattern) == 1
        assert m.boundary_flags == (True,)
        assert m.pattern.positions[0] == pytest.approx(p.x[1])

    def test_small_bumps_ignored(self, sym_params):
        p = sym_params
        A = 2.0 + np.exp(-((p.x / 0.05) ** 2)) + 0.01 * np.exp(-(((p.x - 0.6) / 0.05) ** 2))
        m = measure_spikes(FieldState(A, np.ones_like(A)), p)
        assert len(m.pattern) == 1


class TestAnsatzResidual:
    def test_decreases_with_epsilon(self):
        res = [
            residual_of_ansatz(symmetric_prediction(1, p).pattern, p, use_cutoff=False)
            for p in (isotropic_params(epsilon=e) for e in (0.1, 0.05, 0.025))
        ]
        ratios = [res[1] / res[0], res[2] / res[1]]
        assert all(0.4 <= r <= 0.65 for r in ratios)

    def test_wrong_amplitude_is_worse(self):
        p = isotropic_params(epsilon=0.025)
        pat = symmetric_prediction(1, p).pattern
        good = residual_of_ansatz(pat, p, use_cutoff=False)
        for f in (0.5, 2.0):
            bad = SpikePattern(pat.positions, (f * pat.v_amplitudes[0],))
            assert residual_of_ansatz(bad, p, use_cutoff=False) > 3 * good

    def test_reflection_invariant(self, sym_params):
        p = sym_params
        pat = SpikePattern((-0.2,), (symmetric_prediction(1, p).v0,))
        assert residual_of_ansatz(pat, p) == pytest.approx(residual_of_ansatz(pat.reflected(), p), rel=1e-8)


class TestNorms:
    def test_zero(self, sym_params):
        z = np.zeros(sym_params.grid_n + 1)
        assert norm_star_star(z, None, sym_params) == 0.0
        assert norm_star(z, None, sym_params) == 0.0

    def test_sup_part_far_from_spikes(self, sym_params):
        """Away from spikes the weight is sqrt(eps), so sqrt(eps) c scores c."""
        p = sym_params
        f = math.sqrt(p.epsilon) * 0.7 * np.ones(p.grid_n + 1)
        l2 = math.sqrt(p.grid.integrate(f * f) / p.epsilon)
        assert norm_star_star(f, None, p) - l2 == pytest.approx(0.7, rel=1e-12)

    def test_homogeneous(self, sym_params):
        p = sym_params
        f = np.sin(3 * p.x)
        pat = SpikePattern((0.0,), (1.0,))
        assert norm_star_star(-2.5 * f, pat, p) == pytest.approx(2.5 * norm_star_star(f, pat, p))
        assert norm_star(-2.5 * f, pat, p) == pytest.approx(2.5 * norm_star(f, pat, p))

    def test_spike_weight_relaxes_sup(self, sym_params):
        p = sym_params
        f = np.where(np.abs(p.x) < 1e-12, 1.0, 0.0)
        pat = SpikePattern((0.0,), (1.0,))
        assert norm_star_star(f, pat, p) < norm_star_star(f, None, p)


class TestStep:
    def test_uniform_is_fixed(self, sym_params):
        u = uniform_steady_state(sym_params)
        new = step(u, 0.1, sym_params)
        np.testing.assert_allclose(new.A, u.A, rtol=1e-9)
        np.testing.assert_allclose(new.rho, u.rho, rtol=1e-9)

    def test_rho_mass_balance(self, sym_params):
        """d/dt of total rho equals total gamma minus total rho A, discretely."""
        p = sym_params
        s = perturbed_uniform(p, K=2, amplitude=0.3)
        new = step(s, 0.05, p)
        dt = new.t - s.t
        g = p.grid
        lhs = g.integrate(new.rho) - g.integrate(s.rho)
        rhs = dt * (g.integrate(p.gamma(p.x)) - g.integrate(new.rho * new.A))
        assert lhs == pytest.approx(rhs, rel=1e-8)

    def test_reflection(self, sym_params):
        p = sym_params
        A_hat, v_hat = ansatz_seed(SpikePattern((0.3,), (4.0,)), p)
        s = FieldState.from_rescaled(A_hat, v_hat, p)
        r = FieldState(s.A[::-1], s.rho[::-1])
        a, b = step(s, 0.01, p), step(r, 0.01, p)
        np.testing.assert_allclose(a.A[::-1], b.A, rtol=1e-11)
        np.testing.assert_allclose(a.rho[::-1], b.rho, rtol=1e-11)

    def test_step_capped(self, sym_params):
        s = perturbed_uniform(sym_params)
        new = step(s, 10.0, sym_params)
        assert new.t == pytest.approx(stable_dt(s))

    def test_rejects_nonpositive_dt(self, sym_params):
        with pytest.raises(ValueError):
            step(uniform_steady_state(sym_params), 0.0, sym_params)


class TestRunToSteady:
    def test_infinite_tolerance(self, sym_params):
        s = perturbed_uniform(sym_params)
        run = run_to_steady(s, sym_params, t_max=10.0, tol=math.inf)
        assert run.converged and run.steps == 0 and run.final is s

    def test_zero_horizon(self, sym_params):
        s = perturbed_uniform(sym_params)
        run = run_to_steady(s, sym_params, t_max=0.0, tol=1e-8)
        assert not run.converged and run.steps == 0 and run.reason == "t_max reached"

    def test_snapshots_and_callback(self, sym_params):
        seen = []
        run = run_to_steady(
            perturbed_uniform(sym_params), sym_params, t_max=0.5, tol=1e-12, snap_every=5,
            on_snapshot=seen.append,
        )
        assert seen == run.states
        assert run.final.t == pytest.approx(0.5)

    def test_uniform_start_forms_spike(self, single_spike):
        """A perturbed uniform state settles onto the Newton single spike."""
        p, _, res = single_spike
        run = run_to_steady(perturbed_uniform(p), p, t_max=1e4, tol=1e-8)
        assert run.converged
        m = measure_spikes(run.final, p).pattern
        newton = measure_spikes(res.state, p).pattern
        assert len(m) == 1
        assert m.positions[0] == pytest.approx(newton.positions[0], abs=p.grid.h)
        assert m.v_amplitudes[0] == pytest.approx(newton.v_amplitudes[0], rel=1e-3)

    def test_divergence_carries_last_state(self, sym_params, monkeypatch):
        import hotspot.pde as pde

        def boom(state, dt, p):
            raise DivergenceError("forced")

        monkeypatch.setattr(pde, "step", boom)
        s = perturbed_uniform(sym_params)
        with pytest.raises(DivergenceError) as info:
            pde.run_to_steady(s, sym_params, t_max=1.0, tol=1e-8)
        assert info.value.last_state is s
