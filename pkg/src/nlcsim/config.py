"""Experiment configuration: parsing, validation, and field vocabulary.

Configs are flat ``key = value`` text files with ``#`` comments and dotted
key names (documented in the README).  Every diagnostic carries the line
number it came from; unknown keys are rejected.  Only ``seed`` is
required -- everything else has a documented default.

Shape fields are described by a small vocabulary of named analytic fields
(amplitude-scaled, optionally Leray-projected low Fourier modes) rather
than raw coefficient dumps, so a config stays human-auditable.  Terms can
be summed with ``+``.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, fields

import numpy as np

from .dynamics import SolverConfig, SpectralState
from .noise import Control, JumpCoefficientSpec, MarkSpace
from .operators import PolynomialNonlinearity
from .spectral import (
    DivergenceFreeField,
    ScalarField,
    TorusGrid,
    VectorField,
    field_from_function,
    leray_project,
)


class ConfigError(ValueError):
    """Config file rejected; message carries file and line when known."""

    def __init__(self, message: str, path: str = "<config>", line: int | None = None):
        loc = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(loc + message)
        self.path = path
        self.line = line


# ---------------------------------------------------------------------------
# field vocabulary


def velocity_shape(grid: TorusGrid, token: str) -> DivergenceFreeField:
    """Divergence-free field from a ``name:amp[:args]`` descriptor.

    zero | shear_x:amp[:k] | shear_y:amp[:k] | taylor_green:amp[:k]
    | mode:amp:k1:k2 ('+'-separated terms are summed).
    """
    total = None
    for term in token.split("+"):
        parts = term.strip().split(":")
        name = parts[0]
        args = [float(p) for p in parts[1:]]
        if name == "zero":
            f = DivergenceFreeField(ScalarField.zeros(grid), ScalarField.zeros(grid))
        elif name == "shear_x":
            amp, k = args[0], int(args[1]) if len(args) > 1 else 1
            f = leray_project(
                VectorField(
                    field_from_function(grid, lambda x1, x2: amp * np.sin(k * x2)),
                    ScalarField.zeros(grid),
                )
            )
        elif name == "shear_y":
            amp, k = args[0], int(args[1]) if len(args) > 1 else 1
            f = leray_project(
                VectorField(
                    ScalarField.zeros(grid),
                    field_from_function(grid, lambda x1, x2: amp * np.sin(k * x1)),
                )
            )
        elif name == "taylor_green":
            amp, k = args[0], int(args[1]) if len(args) > 1 else 1
            f = leray_project(
                VectorField(
                    field_from_function(grid, lambda x1, x2: amp * np.sin(k * x1) * np.cos(k * x2)),
                    field_from_function(grid, lambda x1, x2: -amp * np.cos(k * x1) * np.sin(k * x2)),
                )
            )
        elif name == "mode":
            if len(args) != 3:
                raise ConfigError(f"mode shape needs amp:k1:k2, got '{term}'")
            amp, k1, k2 = args[0], int(args[1]), int(args[2])
            f = amp * leray_project(
                VectorField(
                    field_from_function(grid, lambda x1, x2: np.cos(k1 * x1 + k2 * x2)),
                    field_from_function(grid, lambda x1, x2: np.sin(k1 * x1 + k2 * x2)),
                )
            )
        else:
            raise ConfigError(f"unknown velocity shape '{name}'")
        total = f if total is None else total + f
    return total


def director_shape(grid: TorusGrid, token: str) -> VectorField:
    """Director field from a descriptor.

    zero | constant:a:b | stripe_x:amp[:k] | stripe_y:amp[:k]
    | mode:amp:k1:k2:comp ('+'-separated terms are summed).
    """
    total = None
    for term in token.split("+"):
        parts = term.strip().split(":")
        name = parts[0]
        args = [float(p) for p in parts[1:]]
        if name == "zero":
            f = VectorField.zeros(grid)
        elif name == "constant":
            if len(args) != 2:
                raise ConfigError(f"constant director needs a:b, got '{term}'")
            a, b = args
            f = VectorField.from_values(
                grid, np.full((grid.n, grid.n), a), np.full((grid.n, grid.n), b)
            )
        elif name == "stripe_x":
            amp, k = args[0], int(args[1]) if len(args) > 1 else 1
            f = VectorField(
                field_from_function(grid, lambda x1, x2: amp * np.sin(k * x1)),
                ScalarField.zeros(grid),
            )
        elif name == "stripe_y":
            amp, k = args[0], int(args[1]) if len(args) > 1 else 1
            f = VectorField(
                ScalarField.zeros(grid),
                field_from_function(grid, lambda x1, x2: amp * np.sin(k * x2)),
            )
        elif name == "mode":
            if len(args) != 4:
                raise ConfigError(f"mode director needs amp:k1:k2:comp, got '{term}'")
            amp, k1, k2, comp = args[0], int(args[1]), int(args[2]), int(args[3])
            scalar = field_from_function(grid, lambda x1, x2: amp * np.cos(k1 * x1 + k2 * x2))
            f = (
                VectorField(scalar, ScalarField.zeros(grid))
                if comp == 1
                else VectorField(ScalarField.zeros(grid), scalar)
            )
        else:
            raise ConfigError(f"unknown director shape '{name}'")
        total = f if total is None else total + f
    return total


# ---------------------------------------------------------------------------
# schema


@dataclass
class ExperimentConfig:
    """Validated free constants of an experiment; builders materialize objects."""

    seed: int
    grid_modes: int = 16
    grid_dealias_factor: float = 1.5
    nonlinearity_coefficients: tuple[float, ...] = (1.0, 1.0)
    solver_dt: float = 0.01
    solver_t_final: float = 0.5
    solver_snapshot_stride: int = 1
    solver_diag_stride: int = 0  # 0 = automatic
    solver_cutoff_level: float = 0.0  # 0 = disabled
    init_u: str = "taylor_green:0.3"
    init_theta: str = "stripe_x:0.5:1"
    noise_weights: tuple[float, ...] = (1.0, 0.5, 0.5, 0.25)
    noise_shapes: tuple[str, ...] = (
        "shear_x:0.05",
        "shear_y:0.05",
        "taylor_green:0.03",
        "mode:0.03:1:1",
    )
    noise_gains: tuple[float, ...] = (0.0, 0.0, 0.05, 0.05)
    control_cells: int = 1
    control_values: tuple[float, ...] = (1.0,)
    experiment_eps_list: tuple[float, ...] = (0.4, 0.2, 0.1, 0.05)
    experiment_n_paths: int = 32
    simulate_eps: float = 0.25
    rate_penalty: float = 100.0
    rate_cells: int = 1
    rate_max_iters: int = 40
    rate_step_size: float = 0.5
    rate_tolerance: float = 1e-6
    rate_target_tilt: float = 1.5
    importance_eps: float = 0.25
    importance_phi: float = 1.5
    importance_threshold: float = 0.3
    importance_n_paths: int = 400

    # ------------------------------------------------------------------
    # builders

    def build_grid(self) -> TorusGrid:
        return TorusGrid(self.grid_modes, self.grid_dealias_factor)

    def build_nonlinearity(self) -> PolynomialNonlinearity:
        return PolynomialNonlinearity(self.nonlinearity_coefficients)

    def build_mark_space(self) -> MarkSpace:
        return MarkSpace(weights=self.noise_weights)

    def build_jump_spec(self, grid: TorusGrid) -> JumpCoefficientSpec:
        shapes = tuple(velocity_shape(grid, token) for token in self.noise_shapes)
        return JumpCoefficientSpec(shapes=shapes, gains=self.noise_gains)

    def build_solver_config(self, energy_diagnostics: bool = True) -> SolverConfig:
        grid = self.build_grid()
        return SolverConfig(
            grid=grid,
            dt=self.solver_dt,
            t_final=self.solver_t_final,
            nonlinearity=self.build_nonlinearity(),
            mark_space=self.build_mark_space(),
            jump_spec=self.build_jump_spec(grid),
            cutoff_level=self.solver_cutoff_level if self.solver_cutoff_level > 0 else None,
            snapshot_stride=self.solver_snapshot_stride,
            diag_stride=self.solver_diag_stride if self.solver_diag_stride > 0 else None,
            energy_diagnostics=energy_diagnostics,
        )

    def build_init(self, grid: TorusGrid) -> SpectralState:
        return SpectralState(
            velocity_shape(grid, self.init_u), director_shape(grid, self.init_theta), 0.0
        )

    def build_control(self) -> Control:
        k, m = self.control_cells, len(self.noise_weights)
        vals = self.control_values
        if len(vals) == 1:
            matrix = np.full((k, m), vals[0])
        elif len(vals) == k * m:
            matrix = np.asarray(vals).reshape(k, m)
        else:
            raise ConfigError(
                f"control.values needs 1 or cells*marks={k * m} entries, got {len(vals)}"
            )
        return Control(self.solver_t_final, matrix)

    def build_importance_phi(self) -> Control:
        m = len(self.noise_weights)
        return Control.constant(self.solver_t_final, self.importance_phi, 1, m)


_KEYMAP = {
    "seed": ("seed", int),
    "grid.modes": ("grid_modes", int),
    "grid.dealias_factor": ("grid_dealias_factor", float),
    "nonlinearity.coefficients": ("nonlinearity_coefficients", "floats"),
    "solver.dt": ("solver_dt", float),
    "solver.t_final": ("solver_t_final", float),
    "solver.snapshot_stride": ("solver_snapshot_stride", int),
    "solver.diag_stride": ("solver_diag_stride", int),
    "solver.cutoff_level": ("solver_cutoff_level", float),
    "init.u": ("init_u", str),
    "init.theta": ("init_theta", str),
    "noise.weights": ("noise_weights", "floats"),
    "noise.shapes": ("noise_shapes", "strs"),
    "noise.gains": ("noise_gains", "floats"),
    "control.cells": ("control_cells", int),
    "control.values": ("control_values", "floats"),
    "experiment.eps_list": ("experiment_eps_list", "floats"),
    "experiment.n_paths": ("experiment_n_paths", int),
    "simulate.eps": ("simulate_eps", float),
    "rate.penalty": ("rate_penalty", float),
    "rate.cells": ("rate_cells", int),
    "rate.max_iters": ("rate_max_iters", int),
    "rate.step_size": ("rate_step_size", float),
    "rate.tolerance": ("rate_tolerance", float),
    "rate.target_tilt": ("rate_target_tilt", float),
    "importance.eps": ("importance_eps", float),
    "importance.phi": ("importance_phi", float),
    "importance.threshold": ("importance_threshold", float),
    "importance.n_paths": ("importance_n_paths", int),
}

_ATTR_TO_KEY = {attr: key for key, (attr, _) in _KEYMAP.items()}


def _convert(raw: str, kind, key: str, path: str, line: int):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        if kind == "floats":
            return tuple(float(p.strip()) for p in raw.split(",") if p.strip())
        if kind == "strs":
            return tuple(p.strip() for p in raw.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse value for '{key}': {exc}", path, line) from exc
    raise ConfigError(f"internal: unhandled kind for '{key}'", path, line)


def _validate(cfg: ExperimentConfig, lines: dict[str, int], path: str):
    def fail(key: str, message: str):
        raise ConfigError(message, path, lines.get(key))

    if cfg.seed < 0:
        fail("seed", "seed must be a nonnegative integer")
    if cfg.grid_modes % 2 != 0 or cfg.grid_modes < 8:
        fail("grid.modes", f"grid.modes must be even and >= 8, got {cfg.grid_modes}")
    if cfg.grid_dealias_factor < 1.0:
        fail("grid.dealias_factor", "dealias factor must be >= 1")
    if any(b <= 0 for b in cfg.nonlinearity_coefficients):
        fail(
            "nonlinearity.coefficients",
            f"polynomial coefficients must all be > 0, got {cfg.nonlinearity_coefficients}",
        )
    if len(cfg.nonlinearity_coefficients) > 4:
        fail("nonlinearity.coefficients", "polynomial degree limited to 3")
    if cfg.solver_dt <= 0:
        fail("solver.dt", f"solver.dt must be > 0, got {cfg.solver_dt}")
    if cfg.solver_t_final <= 0:
        fail("solver.t_final", "solver.t_final must be > 0")
    steps = cfg.solver_t_final / cfg.solver_dt
    if abs(steps - round(steps)) > 1e-6:
        fail("solver.dt", f"t_final/dt = {steps} is not integral within rounding")
    if any(w <= 0 for w in cfg.noise_weights):
        fail("noise.weights", f"mark weights must be positive, got {cfg.noise_weights}")
    m = len(cfg.noise_weights)
    if len(cfg.noise_shapes) != m or len(cfg.noise_gains) != m:
        fail(
            "noise.shapes",
            f"noise.shapes and noise.gains must match noise.weights length {m}",
        )
    if any(v < 0 for v in cfg.control_values):
        fail("control.values", "control values must be >= 0")
    if cfg.control_cells < 1:
        fail("control.cells", "control.cells must be >= 1")
    if any(e <= 0 for e in cfg.experiment_eps_list) or any(
        a <= b for a, b in zip(cfg.experiment_eps_list, cfg.experiment_eps_list[1:])
    ):
        fail("experiment.eps_list", "eps list must be positive and strictly decreasing")
    if cfg.experiment_n_paths < 8:
        fail("experiment.n_paths", "experiment.n_paths must be >= 8")
    if cfg.simulate_eps <= 0 or cfg.importance_eps <= 0:
        fail("simulate.eps", "noise sizes must be > 0")
    if cfg.importance_phi <= 0:
        fail("importance.phi", "importance tilt must be > 0")
    if cfg.rate_penalty <= 0:
        fail("rate.penalty", "rate.penalty must be > 0")
    # vocabulary check: build on a throwaway grid so bad descriptors fail here
    grid = cfg.build_grid()
    try:
        cfg.build_init(grid)
    except (ConfigError, ValueError, IndexError) as exc:
        raise ConfigError(f"bad init descriptor: {exc}", path, lines.get("init.u")) from exc
    try:
        cfg.build_jump_spec(grid)
    except (ConfigError, ValueError, IndexError) as exc:
        raise ConfigError(f"bad noise shape: {exc}", path, lines.get("noise.shapes")) from exc


def parse_config_text(text: str, path: str = "<config>") -> ExperimentConfig:
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    seen_seed = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got '{line}'", path, lineno)
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.split("#", 1)[0].strip()
        if key not in _KEYMAP:
            raise ConfigError(f"unknown key '{key}'", path, lineno)
        if key in lines:
            raise ConfigError(f"duplicate key '{key}' (first at line {lines[key]})", path, lineno)
        attr, kind = _KEYMAP[key]
        values[attr] = _convert(raw_value, kind, key, path, lineno)
        lines[key] = lineno
        if key == "seed":
            seen_seed = True
    if not seen_seed:
        raise ConfigError("missing required key 'seed'", path)
    cfg = ExperimentConfig(**values)
    _validate(cfg, lines, path)
    return cfg


def parse_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    return parse_config_text(text, path=str(path))


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parsing it returns an equal config."""
    buf = io.StringIO()
    buf.write("# experiment configuration (canonical form)\n")
    for f in fields(ExperimentConfig):
        key = _ATTR_TO_KEY[f.name]
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            rendered = ", ".join(str(v) for v in value)
        else:
            rendered = str(value)
        buf.write(f"{key} = {rendered}\n")
    return buf.getvalue()


def config_hash(cfg: ExperimentConfig) -> str:
    """Stable short hash of the canonical serialization."""
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()[:12]
