import numpy as np
import pytest

from nlcsim.cli import main
from nlcsim.config import (
    ConfigError,
    ExperimentConfig,
    config_hash,
    director_shape,
    parse_config,
    parse_config_text,
    serialize_config,
    velocity_shape,
)
from nlcsim.spectral import TorusGrid, divergence_residual, l2_norm

MINIMAL = "seed = 7\n"

FULL = """
# full experiment file
seed = 11
grid.modes = 16
grid.dealias_factor = 1.5
nonlinearity.coefficients = 1.0, 1.0
solver.dt = 0.01
solver.t_final = 0.2
init.u = taylor_green:0.2
init.theta = stripe_x:0.4:1
noise.weights = 1.0, 0.5
noise.shapes = shear_x:0.05, shear_y:0.05
noise.gains = 0.0, 0.1
control.cells = 2
control.values = 1.0, 1.0, 1.5, 0.5
experiment.eps_list = 0.4, 0.2
experiment.n_paths = 8
simulate.eps = 0.25
"""


class TestShapes:
    def test_velocity_vocabulary_divergence_free(self):
        grid = TorusGrid(16)
        for token in ("zero", "shear_x:0.3", "shear_y:0.5:2", "taylor_green:0.2", "mode:0.1:1:1"):
            f = velocity_shape(grid, token)
            if token != "zero":
                assert divergence_residual(f) <= 1e-12
        combo = velocity_shape(grid, "taylor_green:0.2+mode:0.1:2:1")
        assert l2_norm(combo) > 0

    def test_director_vocabulary(self):
        grid = TorusGrid(16)
        c = director_shape(grid, "constant:0.5:-0.25")
        assert np.allclose(c.c1.values, 0.5)
        assert np.allclose(c.c2.values, -0.25)
        s = director_shape(grid, "stripe_x:0.4:2+mode:0.1:1:1:2")
        assert l2_norm(s) > 0

    def test_unknown_shape_rejected(self):
        grid = TorusGrid(16)
        with pytest.raises(ConfigError):
            velocity_shape(grid, "vortex_sheet:1.0")
        with pytest.raises(ConfigError):
            director_shape(grid, "spiral:1.0")


class TestParsing:
    def test_minimal_defaults(self):
        cfg = parse_config_text(MINIMAL)
        assert cfg.seed == 7
        assert cfg.grid_modes == 16
        assert cfg.nonlinearity_coefficients == (1.0, 1.0)
        assert cfg.experiment_n_paths == 32

    def test_missing_seed(self):
        with pytest.raises(ConfigError, match="seed"):
            parse_config_text("grid.modes = 16\n")

    def test_unknown_key_line_number(self):
        with pytest.raises(ConfigError, match=":3:"):
            parse_config_text("seed = 1\n# fine\nbogus.key = 2\n")

    def test_negative_coefficient_rejected(self):
        text = "seed = 1\nnonlinearity.coefficients = 1.0, -1.0\n"
        with pytest.raises(ConfigError, match="coefficients must all be > 0"):
            parse_config_text(text)

    def test_odd_modes_rejected(self):
        with pytest.raises(ConfigError, match="even"):
            parse_config_text("seed = 1\ngrid.modes = 17\n")

    def test_bad_dt_rejected(self):
        with pytest.raises(ConfigError, match="dt"):
            parse_config_text("seed = 1\nsolver.dt = -0.5\n")

    def test_negative_weight_rejected(self):
        text = "seed = 1\nnoise.weights = 1.0, -2.0\nnoise.shapes = zero, zero\nnoise.gains = 0, 0\n"
        with pytest.raises(ConfigError, match="positive"):
            parse_config_text(text)

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("seed = 1\nseed = 2\n")

    def test_mismatched_noise_lengths(self):
        text = "seed = 1\nnoise.weights = 1.0, 1.0\nnoise.shapes = zero\nnoise.gains = 0, 0\n"
        with pytest.raises(ConfigError, match="match"):
            parse_config_text(text)

    def test_roundtrip(self):
        cfg = parse_config_text(FULL)
        again = parse_config_text(serialize_config(cfg))
        assert cfg == again
        assert config_hash(cfg) == config_hash(again)

    def test_builders(self):
        cfg = parse_config_text(FULL)
        grid = cfg.build_grid()
        init = cfg.build_init(grid)
        assert init.u.grid.n == 16
        control = cfg.build_control()
        assert control.values.shape == (2, 2)
        sc = cfg.build_solver_config()
        assert sc.mark_space.size == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            parse_config(str(tmp_path / "absent.ini"))


class TestCli:
    def _write_cfg(self, tmp_path, text):
        p = tmp_path / "exp.ini"
        p.write_text(text)
        return str(p)

    def test_skeleton_writes_artifacts(self, tmp_path, capsys):
        cfg_path = self._write_cfg(tmp_path, FULL)
        out = tmp_path / "out"
        rc = main(["skeleton", "--config", cfg_path, "--out", str(out)])
        assert rc == 0
        traj = (out / "skeleton_trajectory.csv").read_text()
        assert traj.startswith("# config_hash=")
        assert "t,u_l2,u_h1,theta_l2,theta_h1,psi,dissipation,energy_residual" in traj
        assert (out / "final_state.txt").exists()
        assert (out / "config_echo.ini").exists()

    def test_simulate_deterministic(self, tmp_path):
        cfg_path = self._write_cfg(tmp_path, FULL)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert main(["simulate", "--config", cfg_path, "--out", str(out1)]) == 0
        assert main(["simulate", "--config", cfg_path, "--out", str(out2)]) == 0
        assert (out1 / "sde_trajectory.csv").read_bytes() == (out2 / "sde_trajectory.csv").read_bytes()

    def test_seed_override_changes_output(self, tmp_path):
        cfg_path = self._write_cfg(tmp_path, FULL)
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        assert main(["simulate", "--config", cfg_path, "--out", str(out1)]) == 0
        assert main(["simulate", "--config", cfg_path, "--out", str(out2), "--seed", "999"]) == 0
        assert (out1 / "jumps.txt").read_text() != (out2 / "jumps.txt").read_text()

    def test_bad_config_exit_code(self, tmp_path, capsys):
        cfg_path = self._write_cfg(tmp_path, "grid.modes = 16\n")
        rc = main(["skeleton", "--config", cfg_path, "--out", str(tmp_path / "o")])
        assert rc == 1
        err = capsys.readouterr().err
        assert '"error"' in err and "seed" in err

    def test_convolution_runs(self, tmp_path):
        cfg_path = self._write_cfg(tmp_path, FULL)
        out = tmp_path / "conv"
        assert main(["convolution", "--config", cfg_path, "--out", str(out)]) == 0
        assert (out / "convolution_trajectory.csv").exists()

    def test_rate_subcommand(self, tmp_path):
        text = FULL.replace("grid.modes = 16", "grid.modes = 8")
        text += "rate.max_iters = 5\nrate.target_tilt = 1.3\n"
        cfg_path = self._write_cfg(tmp_path, text)
        out = tmp_path / "rate"
        assert main(["rate", "--config", cfg_path, "--out", str(out)]) == 0
        hist = (out / "rate_history.csv").read_text()
        assert "iteration,objective,cost,mismatch" in hist
        assert (out / "g_star.csv").exists()

    def test_mc_ldp_subcommand(self, tmp_path):
        text = FULL.replace("grid.modes = 16", "grid.modes = 8")
        cfg_path = self._write_cfg(tmp_path, text)
        out = tmp_path / "mc"
        assert main(["mc-ldp", "--config", cfg_path, "--out", str(out)]) == 0
        table = (out / "mc_ldp.csv").read_text()
        assert "eps,median,q25,q75,n_diverged" in table
        assert (out / "convolution_scaling.csv").exists()

    def test_importance_subcommand(self, tmp_path):
        text = FULL.replace("grid.modes = 16", "grid.modes = 8") + "importance.n_paths = 40\n"
        cfg_path = self._write_cfg(tmp_path, text)
        out = tmp_path / "imp"
        assert main(["importance", "--config", cfg_path, "--out", str(out)]) == 0
        table = (out / "importance.csv").read_text()
        assert "method,estimate,std_error,n_paths,n_diverged,sample_variance" in table
        assert "tilted," in table and "plain," in table

    def test_verify_subcommand_passes(self, tmp_path, capsys):
        cfg_path = self._write_cfg(tmp_path, MINIMAL)
        out = tmp_path / "verify"
        rc = main(["verify", "--config", cfg_path, "--out", str(out)])
        captured = capsys.readouterr().out
        assert rc == 0
        assert "checks passed" in captured
        assert "FAIL" not in captured
        assert (out / "verify_report.csv").exists()

    def test_zero_init_skeleton_zero_csv(self, tmp_path):
        text = FULL.replace("init.u = taylor_green:0.2", "init.u = zero").replace(
            "init.theta = stripe_x:0.4:1", "init.theta = zero"
        ).replace("control.values = 1.0, 1.0, 1.5, 0.5", "control.values = 1.0")
        cfg_path = self._write_cfg(tmp_path, text)
        out = tmp_path / "zero"
        assert main(["skeleton", "--config", cfg_path, "--out", str(out)]) == 0
        rows = [
            line
            for line in (out / "skeleton_trajectory.csv").read_text().splitlines()
            if line and not line.startswith("#") and not line.startswith("t,")
        ]
        for row in rows:
            values = [float(v) for v in row.split(",")[1:]]
            assert all(v == 0.0 for v in values)
