"""Preset cases, the end-to-end run pipeline, control comparison and convergence tables."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .errors import MaxIterReached, WentzellError
from .hum import HumConfig, HumResult, hum_cg
from .moment import ExpFamily, MomentResult, moment_control, verify_null_modes
from .pde import default_n_t, discretization, dual_pairing, inner_H, norm_H
from .spectral import (WentzellParams, expand, free_terminal_norm, normalized_state,
                       spectral_solution, spectrum)
from .state import Control, Grid, State

log = logging.getLogger(__name__)

# case id -> (a, b, d, alpha)
PRESETS = {
    "sub": (1.0, 1.0, 3.0, 0.0),
    "crit": (1.0, 1.0, 1.0, -1.0),
    "super": (1.0, 3.0, 1.0, 0.0),
}
CASES = (*PRESETS, "custom")
METHODS = ("hum", "moment", "both")
REPRODUCTION = dict(n_x=25, T=1.0, eps=1e-3, max_iter=7)
ACCURACY = dict(n_x=200, n_t=2000)
ORACLE_MODES = 40
# trajectory CSVs keep at most this many time levels
MAX_SAVED_LEVELS = 200


def default_alpha(params: WentzellParams) -> float:
    """0 unless 0 is an eigenvalue (critical ratio), then -1."""
    return -1.0 if params.regime().value == "crit" else 0.0


def initial_state(grid: Grid) -> State:
    return State.from_function(grid, lambda x: math.sqrt(2.0) * np.sin(math.pi * x), boundary=0.0)


@dataclass(frozen=True)
class CaseConfig:
    case_id: str = "sub"
    params: WentzellParams = WentzellParams(1.0, 1.0, 3.0)
    n_x: int = ACCURACY["n_x"]
    n_t: int | None = None
    T_horizon: float = 1.0
    eps: float = 1e-3
    alpha: float = 0.0
    tol: float = 1e-3
    max_iter: int = 5000
    n_modes: int = 6
    method: str = "both"
    out_dir: Path | None = None
    reproduce: bool = False
    theta: float = 0.5
    closure: str = "symmetric"

    def __post_init__(self):
        if self.case_id not in CASES:
            raise ValueError(f"case must be one of {CASES}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.case_id in PRESETS:
            a, b, d, alpha = PRESETS[self.case_id]
            if (self.params.a, self.params.b, self.params.d, self.alpha) != (a, b, d, alpha):
                raise ValueError(f"preset {self.case_id!r} pins a={a}, b={b}, d={d}, alpha={alpha}")
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        Grid(self.n_x)
        if self.n_t is None:
            object.__setattr__(self, "n_t", default_n_t(self.n_x, self.T_horizon))
        if self.out_dir is not None:
            object.__setattr__(self, "out_dir", Path(self.out_dir))
        # validates eps, tol, max_iter, n_x, T
        self.hum_config()

    @classmethod
    def preset(cls, case_id: str, **overrides) -> "CaseConfig":
        if case_id not in PRESETS:
            raise ValueError(f"unknown preset {case_id!r}")
        a, b, d, alpha = PRESETS[case_id]
        return cls(case_id=case_id, params=WentzellParams(a, b, d), alpha=alpha, **overrides)

    @property
    def resolution_mode(self) -> str:
        return "reproduction" if self.reproduce else "accuracy"

    def hum_config(self) -> HumConfig:
        return HumConfig(eps=self.eps, alpha=self.alpha, tol=self.tol, max_iter=self.max_iter,
                         n_x=self.n_x, n_t=self.n_t, T=self.T_horizon, theta=self.theta,
                         closure=self.closure)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["params"] = {"a": self.params.a, "b": self.params.b, "d": self.params.d}
        d["resolution_mode"] = self.resolution_mode
        return d


@dataclass
class RunReport:
    config: dict
    uncontrolled: dict = field(default_factory=dict)
    hum: dict | None = None
    moment: dict | None = None
    controls: dict = field(default_factory=dict)
    cross_validation: dict | None = None
    timings: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _trajectory(cfg: CaseConfig, U0: State, f: Control) -> np.ndarray:
    mol = discretization(cfg.params, cfg.n_x, cfg.T_horizon, cfg.n_t, cfg.theta, cfg.closure)
    return mol.forward(U0.values, f.resample(cfg.n_t).samples, full=True)


def _mode_coefficients(state: State, cfg: CaseConfig, pairs) -> list[float]:
    return [inner_H(state, normalized_state(p, state.grid), cfg.params) for p in pairs]


def _signed_sqrt(x: float) -> float:
    return math.copysign(math.sqrt(abs(x)), x)


def _negative_run(f: Control) -> float:
    """Length of the time set where the control is negative (trapezoid estimate)."""
    return float(np.sum(f.weights() * (f.samples < 0)))


def _control_summary(f: Control) -> dict:
    k = int(np.argmin(f.samples))
    return {"l2_norm": f.l2_norm(), "min": float(f.samples[k]), "argmin_t": float(f.times[k]),
            "negative_measure": _negative_run(f)}


def run_hum(cfg: CaseConfig, U0: State) -> HumResult:
    with warnings.catch_warnings():
        if cfg.reproduce:
            # the reproduction run stops on a fixed iteration count by design
            warnings.simplefilter("ignore", MaxIterReached)
        return hum_cg(U0, cfg.hum_config(), cfg.params)


def run_moment(cfg: CaseConfig, U0: State) -> MomentResult:
    pairs = spectrum(cfg.params, cfg.n_modes)
    fam = ExpFamily.from_pairs(pairs, cfg.T_horizon)
    return moment_control(U0, fam, pairs, cfg.params, cfg.n_t)


def run_case(cfg: CaseConfig) -> RunReport:
    """Uncontrolled, HUM-controlled and moment-controlled runs plus their reports.

    Solver failures in one method are recorded under ``errors`` and the
    other method still runs.
    """
    report = RunReport(config=cfg.to_dict())
    grid = Grid(cfg.n_x)
    U0 = initial_state(grid)
    out = cfg.out_dir
    stride = max(1, cfg.n_t // MAX_SAVED_LEVELS)
    mol = discretization(cfg.params, cfg.n_x, cfg.T_horizon, cfg.n_t, cfg.theta, cfg.closure)

    t0 = time.perf_counter()
    free = _trajectory(cfg, U0, Control.zeros(cfg.T_horizon, cfg.n_t))
    free_T = State(grid, free[-1])
    oracle = expand(initial_state(Grid(max(cfg.n_x, 2000))), spectrum(cfg.params, ORACLE_MODES),
                    cfg.params, cfg.T_horizon)
    report.uncontrolled = {
        "terminal_norm_H": norm_H(free_T, cfg.params),
        "terminal_norm_H_oracle": free_terminal_norm(oracle),
        "terminal_norm_Hminus1_signed": _signed_sqrt(dual_pairing(free_T, cfg.alpha, cfg.params)),
    }
    report.timings["uncontrolled"] = time.perf_counter() - t0
    if out is not None:
        report.files["uncontrolled_trajectory"] = str(
            io.write_trajectory_csv(out / "uncontrolled.csv", mol.times, grid, free, stride))

    controls: dict[str, Control] = {}
    if cfg.method in ("hum", "both"):
        t0 = time.perf_counter()
        try:
            res = run_hum(cfg, U0)
        except WentzellError as exc:
            report.errors["hum"] = f"{type(exc).__name__}: {exc}"
        else:
            controls["hum"] = res.control
            report.hum = {
                "iterations": res.iterations,
                "converged": res.converged,
                "final_residual": float(res.residuals[-1]),
                "terminal_norm_H": res.terminal_norm_H,
                "terminal_norm_Hminus1_signed": _signed_sqrt(res.terminal_pairing),
                "j_eps": res.j_eps,
            }
            if out is not None:
                report.files["hum_control"] = str(io.write_control_csv(out / "hum_control.csv", res.control))
                report.files["hum_residuals"] = str(
                    io.write_residuals_csv(out / "hum_residuals.csv", res.residuals))
                report.files["hum_trajectory"] = str(io.write_trajectory_csv(
                    out / "hum_controlled.csv", mol.times, grid, _trajectory(cfg, U0, res.control), stride))
                report.files["hum_terminal"] = str(
                    io.write_state_json(out / "hum_terminal.json", res.terminal, cfg.T_horizon))
        report.timings["hum"] = time.perf_counter() - t0

    if cfg.method in ("moment", "both"):
        t0 = time.perf_counter()
        try:
            mres = run_moment(cfg, U0)
        except WentzellError as exc:
            report.errors["moment"] = f"{type(exc).__name__}: {exc}"
        else:
            controls["moment"] = mres.control
            traj = _trajectory(cfg, U0, mres.control)
            terminal = State(grid, traj[-1])
            pairs = spectrum(cfg.params, cfg.n_modes)
            report.moment = {
                "n_modes": mres.n_modes,
                "shift": mres.shift,
                "gram_condition": mres.gram_condition,
                "moment_residuals": mres.residuals,
                "terminal_norm_H": norm_H(terminal, cfg.params),
                "terminal_mode_coefficients": np.abs(_mode_coefficients(terminal, cfg, pairs)),
            }
            if out is not None:
                report.files["moment_control"] = str(
                    io.write_control_csv(out / "moment_control.csv", mres.control))
                report.files["moment_trajectory"] = str(io.write_trajectory_csv(
                    out / "moment_controlled.csv", mol.times, grid, traj, stride))
                report.files["moment_terminal"] = str(
                    io.write_state_json(out / "moment_terminal.json", terminal, cfg.T_horizon))
        report.timings["moment"] = time.perf_counter() - t0

    report.controls = {k: _control_summary(f) for k, f in controls.items()}
    if len(controls) == 2:
        report.cross_validation = {
            "l2_distance": (controls["hum"] + controls["moment"] * -1.0).l2_norm(),
            "terminal_norm_H": {"hum": report.hum["terminal_norm_H"],
                                "moment": report.moment["terminal_norm_H"]},
        }
    if out is not None:
        report.files["report"] = str(out / "report.json")
        io.write_json(out / "report.json", report.to_dict())
    return report


def compare_controls(cfg: CaseConfig, U0: State | None = None) -> dict:
    """Side-by-side HUM and moment controls: L2 distance, terminal norms and mode coefficients."""
    grid = Grid(cfg.n_x)
    U0 = initial_state(grid) if U0 is None else U0
    hres = run_hum(cfg, U0)
    mres = run_moment(cfg, U0)
    pairs = spectrum(cfg.params, cfg.n_modes)
    m_terminal = State(grid, _trajectory(cfg, U0, mres.control)[-1])
    free_T = State(grid, _trajectory(cfg, U0, Control.zeros(cfg.T_horizon, cfg.n_t))[-1])
    return {
        "l2_distance": (hres.control + mres.control * -1.0).l2_norm(),
        "control_l2": {"hum": hres.control.l2_norm(), "moment": mres.control.l2_norm()},
        "terminal_norm_H": {"uncontrolled": norm_H(free_T, cfg.params),
                            "hum": hres.terminal_norm_H,
                            "moment": norm_H(m_terminal, cfg.params)},
        "mode_coefficients": {
            "n": [p.n for p in pairs],
            "uncontrolled": _mode_coefficients(free_T, cfg, pairs),
            "hum": _mode_coefficients(hres.terminal, cfg, pairs),
            "moment": _mode_coefficients(m_terminal, cfg, pairs),
        },
        "hum_converged": hres.converged,
    }


@dataclass
class ConvergenceTable:
    rows: list[dict]
    order: float | None

    def write_csv(self, path) -> Path:
        keys = ("n_x", "n_t", "error_H", "mode0_drift")
        return io._write_rows(path, keys, ([r[k] for k in keys] for r in self.rows))


def convergence_study(cfg: CaseConfig, levels) -> ConvergenceTable:
    """Relative terminal H-error of the free solve against the spectral series.

    ``n_t = 10 n_x`` at each level; the order is the negated log-log slope
    (omitted for a single level).  ``mode0_drift`` compares the lowest mode
    coefficient at T with its exact free decay.
    """
    levels = [int(n) for n in levels]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must increase")
    pairs = spectrum(cfg.params, ORACLE_MODES)
    oracle = expand(initial_state(Grid(4000)), pairs, cfg.params, cfg.T_horizon)
    rows = []
    for n_x in levels:
        grid = Grid(n_x)
        n_t = default_n_t(n_x, cfg.T_horizon)
        mol = discretization(cfg.params, n_x, cfg.T_horizon, n_t, cfg.theta, cfg.closure)
        uT = State(grid, mol.forward(initial_state(grid).values, np.zeros(n_t + 1), full=False))
        exact = spectral_solution(oracle, cfg.T_horizon, grid=grid)
        err = norm_H(uT - exact, cfg.params) / norm_H(exact, cfg.params)
        c0 = inner_H(uT, normalized_state(pairs[0], grid), cfg.params)
        drift = abs(c0 - oracle.coeffs[0] * math.exp(-pairs[0].lam * cfg.T_horizon))
        rows.append({"n_x": n_x, "n_t": n_t, "error_H": err, "mode0_drift": drift})
    order = None
    if len(rows) > 1:
        slope = np.polyfit(np.log([r["n_x"] for r in rows]), np.log([r["error_H"] for r in rows]), 1)[0]
        order = float(-slope)
    return ConvergenceTable(rows, order)
