import numpy as np
import pytest

from nlcsim.dynamics import SolverConfig, SpectralState, solve_skeleton
from nlcsim.ldp import (
    RateProblem,
    StudyError,
    brute_force_rate,
    convolution_scaling_study,
    importance_weights,
    mc_small_noise_study,
    optimize_control,
    plain_mc_probability,
    rate_objective,
    rate_objective_parts,
    study_rows_csv,
    sup_velocity_indicator,
)
from nlcsim.noise import Control, JumpCoefficientSpec, MarkSpace, cost_LT
from nlcsim.spectral import (
    ScalarField,
    TorusGrid,
    VectorField,
    field_from_function,
    leray_project,
    random_divergence_free_field,
    random_vector_field,
)

ELL2 = 0.3862943611198906


def one_mark_setup(grid, shape_amp=0.15, gain=0.0, weight=1.0):
    shape = shape_amp * leray_project(
        VectorField(field_from_function(grid, lambda x1, x2: np.sin(x2)), ScalarField.zeros(grid))
    )
    ms = MarkSpace(weights=(weight,))
    spec = JumpCoefficientSpec(shapes=(shape,), gains=(gain,))
    return ms, spec


def small_problem(rng, horizon=0.25, dt=0.0125, penalty=100.0, target_tilt=None):
    grid = TorusGrid(8)
    ms, spec = one_mark_setup(grid)
    cfg = SolverConfig(
        grid=grid,
        dt=dt,
        t_final=horizon,
        mark_space=ms,
        jump_spec=spec,
        snapshot_stride=1000,
        diag_stride=1000,
        energy_diagnostics=False,
    )
    init = SpectralState(
        random_divergence_free_field(grid, rng, kmax=2, amplitude=0.3, decay=0.3),
        random_vector_field(grid, rng, kmax=2, amplitude=0.4, decay=0.3),
    )
    g_target = Control.constant(horizon, target_tilt) if target_tilt else Control.unit(horizon)
    target = solve_skeleton(init, g_target, cfg).final_state()
    return RateProblem(init=init, target=target, cfg=cfg, penalty_weight=penalty)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


class TestRateObjective:
    def test_unit_target_zero(self, rng):
        prob = small_problem(rng)
        assert rate_objective(prob.unit_control(), prob) == pytest.approx(0.0, abs=1e-24)

    def test_cost_only_when_target_matched(self, rng):
        prob = small_problem(rng, horizon=1.0, dt=0.025, target_tilt=2.0)
        g2 = Control.constant(1.0, 2.0)
        obj, cost, mis = rate_objective_parts(g2, prob)
        assert mis == pytest.approx(0.0, abs=1e-24)
        assert obj == pytest.approx(ELL2, abs=1e-12)

    def test_recomputation_oracle(self, rng):
        prob = small_problem(rng)
        g = Control(prob.cfg.t_final, np.array([[1.37]]))
        obj = rate_objective(g, prob)
        cost = cost_LT(g, prob.cfg.mark_space)
        traj = solve_skeleton(prob.init, g, prob.cfg)
        from nlcsim.dynamics import state_distance_sq_split

        mis = state_distance_sq_split(traj.final_state(), prob.target)
        assert obj == pytest.approx(cost + prob.penalty_weight * mis, rel=1e-14)


class TestOptimizer:
    def test_unit_target_recovered(self, rng):
        prob = small_problem(rng)
        sol = optimize_control(prob)
        assert sol.cost <= 1e-6
        assert sol.objective <= rate_objective(prob.unit_control(), prob) + 1e-15

    def test_matches_brute_force_1d(self, rng):
        prob = small_problem(rng, target_tilt=1.7, penalty=200.0)
        grid_vals = np.linspace(0.2, 3.0, 15)
        oracle = brute_force_rate(prob, grid_vals)
        sol = optimize_control(prob)
        assert sol.objective <= oracle.objective + 1e-3

    def test_monotone_history(self, rng):
        prob = small_problem(rng, target_tilt=1.5)
        sol = optimize_control(prob)
        objs = [h[1] for h in sol.history]
        assert all(a >= b - 1e-15 for a, b in zip(objs, objs[1:]))

    def test_penalty_increase_reduces_mismatch(self, rng):
        prob_lo = small_problem(rng, target_tilt=1.6, penalty=50.0)
        sol_lo = optimize_control(prob_lo)
        prob_hi = RateProblem(
            init=prob_lo.init,
            target=prob_lo.target,
            cfg=prob_lo.cfg,
            penalty_weight=100.0,
        )
        sol_hi = optimize_control(prob_hi)
        assert sol_hi.mismatch <= sol_lo.mismatch + 1e-8

    def test_fd_gradient_richardson(self, rng):
        prob = small_problem(rng, target_tilt=1.4)
        base = np.array([0.2])  # w = log g around g ~ 1.22
        direction = np.array([1.0])

        def f(w):
            return rate_objective(prob.control_from_flat(np.exp(w)), prob)

        vals = {}
        for h in (0.2, 0.1, 0.05):
            vals[h] = (f(base + h * direction) - f(base - h * direction)) / (2 * h)
        num = abs(vals[0.2] - vals[0.1])
        den = abs(vals[0.1] - vals[0.05])
        assert 3.0 <= num / den <= 5.0  # second-order centered stencil


class TestBruteForce:
    def test_contains_unit(self, rng):
        prob = small_problem(rng)
        sol = brute_force_rate(prob, [0.5, 1.0, 2.0])
        assert sol.g_star.values[0, 0] == 1.0
        assert sol.objective == pytest.approx(0.0, abs=1e-20)

    def test_singleton_grid(self, rng):
        prob = small_problem(rng)
        sol = brute_force_rate(prob, [0.7])
        assert sol.g_star.values[0, 0] == 0.7

    def test_dimension_guard(self, rng):
        prob = small_problem(rng)
        prob_big = RateProblem(
            init=prob.init, target=prob.target, cfg=prob.cfg, n_cells=3
        )
        with pytest.raises(ValueError):
            brute_force_rate(prob_big, [1.0])


class TestSmallNoiseStudy:
    def _study_cfg(self, rng, shape_amp=0.15, gain=0.05):
        grid = TorusGrid(8)
        ms, spec = one_mark_setup(grid, shape_amp=shape_amp, gain=gain)
        cfg = SolverConfig(
            grid=grid,
            dt=1e-2,
            t_final=0.3,
            mark_space=ms,
            jump_spec=spec,
            diag_stride=1000,
            energy_diagnostics=False,
        )
        init = SpectralState(
            random_divergence_free_field(grid, rng, kmax=2, amplitude=0.3, decay=0.3),
            random_vector_field(grid, rng, kmax=2, amplitude=0.4, decay=0.3),
        )
        return cfg, init

    def test_zero_noise_zero_distance(self, rng):
        grid = TorusGrid(8)
        ms, spec = one_mark_setup(grid, shape_amp=0.0, gain=0.0)
        cfg = SolverConfig(
            grid=grid,
            dt=1e-2,
            t_final=0.2,
            mark_space=ms,
            jump_spec=spec,
            diag_stride=1000,
            energy_diagnostics=False,
        )
        init = SpectralState.zero(grid)
        rows = mc_small_noise_study([0.4, 0.2], 8, cfg, init, seed=1)
        assert all(r["median"] == 0.0 for r in rows)

    def test_medians_decrease(self, rng):
        cfg, init = self._study_cfg(rng)
        rows = mc_small_noise_study([0.4, 0.05], 12, cfg, init, seed=7)
        assert rows[0]["median"] > rows[1]["median"]

    def test_validation(self, rng):
        cfg, init = self._study_cfg(rng)
        with pytest.raises(StudyError):
            mc_small_noise_study([0.1, 0.4], 8, cfg, init, seed=1)
        with pytest.raises(StudyError):
            mc_small_noise_study([0.4, 0.1], 4, cfg, init, seed=1)

    def test_csv(self, rng):
        cfg, init = self._study_cfg(rng)
        rows = mc_small_noise_study([0.4, 0.2], 8, cfg, init, seed=3)
        text = study_rows_csv(rows, header_lines=("seed=3",))
        lines = [l for l in text.splitlines() if not l.startswith("#")]
        assert lines[0] == "eps,median,q25,q75,n_diverged"
        assert len(lines) == 3

    def test_threaded_study_matches_sequential(self, rng):
        # per-path seeds are independent of scheduling, so fan-out is exact
        cfg, init = self._study_cfg(rng)
        seq = mc_small_noise_study([0.4, 0.2], 8, cfg, init, seed=9, threads=1)
        par = mc_small_noise_study([0.4, 0.2], 8, cfg, init, seed=9, threads=4)
        assert seq == par

    def test_convolution_study_decreasing(self, rng):
        # jump mass large enough that many jumps land per path: the sup is
        # martingale-dominated and shrinks with the noise size
        grid = TorusGrid(8)
        shape = 0.2 * leray_project(
            VectorField(field_from_function(grid, lambda x1, x2: np.sin(x2)), ScalarField.zeros(grid))
        )
        ms = MarkSpace(weights=(3.0,))
        spec = JumpCoefficientSpec(shapes=(shape,), gains=(0.05,))
        cfg = SolverConfig(
            grid=grid,
            dt=1e-2,
            t_final=0.5,
            mark_space=ms,
            jump_spec=spec,
            diag_stride=1000,
            energy_diagnostics=False,
        )
        init = SpectralState.zero(grid)
        rows = convolution_scaling_study([0.4, 0.05], 12, cfg, init, seed=5)
        assert rows[0]["mean_sup_sq"] > rows[1]["mean_sup_sq"]


class TestImportance:
    def _is_cfg(self, rng):
        grid = TorusGrid(8)
        ms, spec = one_mark_setup(grid, shape_amp=0.2, gain=0.0)
        cfg = SolverConfig(
            grid=grid,
            dt=1e-2,
            t_final=0.5,
            mark_space=ms,
            jump_spec=spec,
            snapshot_stride=1000,
            energy_diagnostics=False,
        )
        init = SpectralState.zero(grid)
        return cfg, init

    def test_indicator_one_mean_one(self, rng):
        cfg, init = self._is_cfg(rng)
        phi = Control.constant(cfg.t_final, 1.5)
        out = importance_weights(lambda traj: 1.0, phi, 0.5, 400, cfg, init, seed=11)
        assert abs(out["estimate"] - 1.0) <= 3 * out["std_error"]

    def test_unit_tilt_weights_one(self, rng):
        cfg, init = self._is_cfg(rng)
        phi = Control.unit(cfg.t_final)
        out = importance_weights(lambda traj: 1.0, phi, 0.5, 50, cfg, init, seed=13)
        assert out["estimate"] == pytest.approx(1.0, abs=1e-14)
        assert out["std_error"] == pytest.approx(0.0, abs=1e-14)

    def test_positive_tilt_required(self, rng):
        cfg, init = self._is_cfg(rng)
        phi = Control(cfg.t_final, np.array([[0.0]]))
        with pytest.raises(ValueError):
            importance_weights(lambda traj: 1.0, phi, 0.5, 10, cfg, init, seed=1)

    def test_agrees_with_plain_mc(self, rng):
        cfg, init = self._is_cfg(rng)
        threshold = 0.35
        indicator = sup_velocity_indicator(threshold)
        plain = plain_mc_probability(indicator, 0.25, 600, cfg, init, seed=17)
        tilted = importance_weights(indicator, Control.constant(cfg.t_final, 2.0), 0.25, 600, cfg, init, seed=19)
        se = np.hypot(plain["std_error"], tilted["std_error"])
        assert abs(plain["estimate"] - tilted["estimate"]) <= 3.5 * se

    def test_variance_reduction_for_exceedance_event(self, rng):
        # a tilt aimed at the event beats plain MC at the same budget
        cfg, init = self._is_cfg(rng)
        indicator = sup_velocity_indicator(0.55)
        n = 400
        plain = plain_mc_probability(indicator, 0.25, n, cfg, init, seed=23)
        tilted = importance_weights(indicator, Control.constant(cfg.t_final, 2.0), 0.25, n, cfg, init, seed=29)
        assert tilted["sample_variance"] <= plain["sample_variance"]
