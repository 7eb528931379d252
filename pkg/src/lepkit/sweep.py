"""Parameter sweeps driven by a YAML configuration, and tabular output.

A configuration looks like::

    model_kind: three_level
    fixed_params: {omega: 1.0}
    sweep_axes:
      - {name: gamma, start: 0.1, stop: 6.0, count: 60}
    outputs: [gap]
    floquet: {omega_mod: 1.0, fraction: 0.4}
    integration: {dt: 0.05, t_final: 20.0, method: expm}
    seed: 0

An axis either spans ``linspace(start, stop, count)`` or lists explicit
``values``.  Rows come out in axis-major order (first axis slowest); outputs
that are time series or cluster lists contribute several rows per grid
point, with any scalar outputs repeated on each.
"""

from __future__ import annotations

import copy
import csv
import io
import itertools
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from . import cooling, dynamics, floquet, liouville
from .errors import LepkitError
from .qops import random_density_matrix

MODEL_KINDS = ("three_level", "sideband", "eit_reduced")

PARAMS = {
    "three_level": {"gamma", "omega", "initial", "omega_mod", "fraction", "tau"},
    "sideband": {"nu", "delta_detuning", "omega_g", "eta", "gamma", "n_cut", "omega_over_gamma",
                 "delta_over_nu", "point", "nbar"},
    "eit_reduced": {"gamma_e", "omega_r", "delta_r", "omega_g", "delta_g", "eta", "nu", "n_cut", "nbar"},
}

OUTPUTS = {
    "three_level": ("spectrum", "gap", "mu", "floquet_gap", "trajectory", "decay_rate", "ep_report"),
    "sideband": ("spectrum", "gap", "analytic_gap", "subsystem_spectrum", "lep_condition",
                 "mean_phonon", "cooling_limit", "ep_report"),
    "eit_reduced": ("spectrum", "gap", "analytic_gap", "optimal_detuning", "mean_phonon",
                    "cooling_limit", "ep_report"),
}

# outputs producing several rows per grid point; at most one per config
MULTI_ROW = {"trajectory", "mean_phonon", "ep_report"}
FLOQUET_OUTPUTS = {"mu", "floquet_gap"}
INITIAL_STATES = ("b", "random", "random_bc")


class ConfigError(ValueError):
    """The configuration is malformed or names unknown parameters."""


@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple


@dataclass
class SweepConfig:
    model_kind: str
    fixed_params: dict[str, Any] = field(default_factory=dict)
    sweep_axes: list[dict[str, Any]] = field(default_factory=list)
    outputs: list[str] = field(default_factory=lambda: ["gap"])
    floquet: dict[str, float] | None = None
    integration: dict[str, Any] = field(default_factory=lambda: {"dt": 0.05, "t_final": 20.0})
    seed: int = 0
    ep: dict[str, float] | None = None  # detect_ep tolerance / cluster_tol overrides

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "SweepConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("configuration must be a mapping")
        known = {"model_kind", "fixed_params", "sweep_axes", "outputs", "floquet", "integration", "seed", "ep"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        if "model_kind" not in data:
            raise ConfigError("model_kind is required")
        kwargs = {k: copy.deepcopy(v) for k, v in data.items() if v is not None or k in ("floquet", "ep")}
        return cls(**kwargs)

    def to_mapping(self) -> dict[str, Any]:
        return asdict(self)

    def validate(self):
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        valid = PARAMS[self.model_kind]
        if not isinstance(self.fixed_params, dict):
            raise ConfigError("fixed_params must be a mapping")
        bad = set(self.fixed_params) - valid
        if bad:
            raise ConfigError(f"invalid parameters for {self.model_kind}: {sorted(bad)}")
        if not isinstance(self.sweep_axes, list) or len(self.sweep_axes) > 2:
            raise ConfigError("sweep_axes must be a list of at most two axes")
        names = [a.get("name") if isinstance(a, dict) else None for a in self.sweep_axes]
        for ax in self.axes():
            if ax.name not in valid:
                raise ConfigError(f"cannot sweep {ax.name!r} for {self.model_kind}")
        if len(set(names)) != len(names):
            raise ConfigError("sweep axes must have distinct names")
        self._check_required(set(self.fixed_params) | {a.name for a in self.axes()})
        if not self.outputs or not isinstance(self.outputs, list):
            raise ConfigError("outputs must be a nonempty list")
        allowed = OUTPUTS[self.model_kind]
        for out in self.outputs:
            if out not in allowed:
                raise ConfigError(f"output {out!r} not available for {self.model_kind}; choose from {allowed}")
        if len(set(self.outputs)) != len(self.outputs):
            raise ConfigError("outputs must not repeat")
        if len(MULTI_ROW & set(self.outputs)) > 1:
            raise ConfigError(f"at most one of {sorted(MULTI_ROW)} per configuration")
        if FLOQUET_OUTPUTS & set(self.outputs) and self.floquet is None:
            raise ConfigError("mu and floquet_gap need a floquet section")
        if self.floquet is not None:
            if not isinstance(self.floquet, dict):
                raise ConfigError("floquet must be a mapping")
            bad = set(self.floquet) - {"omega_mod", "fraction", "tau"}
            if bad:
                raise ConfigError(f"unknown floquet fields: {sorted(bad)}")
            if "fraction" in self.floquet and "tau" in self.floquet:
                raise ConfigError("give either floquet.fraction or floquet.tau, not both")
        integ = self.integration or {}
        bad = set(integ) - {"dt", "t_final", "method"}
        if bad:
            raise ConfigError(f"unknown integration fields: {sorted(bad)}")
        for key in ("dt", "t_final"):
            if key in integ and not (_is_number(integ[key]) and integ[key] > 0):
                raise ConfigError(f"integration.{key} must be a positive number")
        if integ.get("method", "expm") not in ("expm", "rk4"):
            raise ConfigError("integration.method must be expm or rk4")
        if self.ep is not None:
            if not isinstance(self.ep, dict):
                raise ConfigError("ep must be a mapping")
            bad = set(self.ep) - {"tolerance", "cluster_tol"}
            if bad:
                raise ConfigError(f"unknown ep fields: {sorted(bad)}")
            for key, v in self.ep.items():
                if not (_is_number(v) and v > 0):
                    raise ConfigError(f"ep.{key} must be a positive number")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")

    def _check_required(self, given: set[str]):
        if self.model_kind == "three_level":
            missing = {"gamma"} - given
        elif self.model_kind == "eit_reduced":
            missing = {"gamma_e", "omega_r", "delta_r", "omega_g", "delta_g", "eta", "nu"} - given
        else:
            options = [{"point"}, {"omega_over_gamma", "delta_over_nu"}, {"delta_detuning", "omega_g"}]
            if any(o <= given for o in options):
                return
            raise ConfigError("sideband needs point, omega_over_gamma + delta_over_nu, "
                              "or delta_detuning + omega_g")
        if missing:
            raise ConfigError(f"{self.model_kind} needs {sorted(missing)}")

    def axes(self) -> list[Axis]:
        out = []
        for spec in self.sweep_axes:
            if not isinstance(spec, dict) or "name" not in spec:
                raise ConfigError("each axis needs a name")
            if "values" in spec:
                extra = set(spec) - {"name", "values"}
                if extra:
                    raise ConfigError(f"axis {spec['name']!r}: 'values' excludes {sorted(extra)}")
                vals = spec["values"]
                if not isinstance(vals, list) or not vals:
                    raise ConfigError(f"axis {spec['name']!r}: values must be a nonempty list")
                out.append(Axis(spec["name"], tuple(vals)))
                continue
            try:
                start, stop, count = spec["start"], spec["stop"], spec["count"]
            except KeyError as exc:
                raise ConfigError(f"axis {spec['name']!r} lacks {exc.args[0]!r}") from None
            if not (_is_number(start) and _is_number(stop)) or not start < stop:
                raise ConfigError(f"axis {spec['name']!r}: need numeric start < stop")
            if not isinstance(count, int) or count < 2:
                raise ConfigError(f"axis {spec['name']!r}: count must be an integer >= 2")
            out.append(Axis(spec["name"], tuple(float(x) for x in np.linspace(start, stop, count))))
        return out

    def points(self) -> list[dict[str, Any]]:
        """Parameter dictionaries in axis-major order."""
        axes = self.axes()
        grid = itertools.product(*(a.values for a in axes)) if axes else [()]
        return [{**self.fixed_params, **dict(zip((a.name for a in axes), combo))} for combo in grid]


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def load_config(path: str | os.PathLike) -> SweepConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML: {exc}") from None
    return SweepConfig.from_mapping(data)


# ---------------------------------------------------------------------------
# per-point evaluation

def _three_level(p):
    return liouville.three_level_model(float(p["gamma"]), float(p.get("omega", 1.0)))


def _protocol(p, floquet_cfg, gamma) -> floquet.FloquetProtocol:
    merged = {**(floquet_cfg or {}), **{k: p[k] for k in ("omega_mod", "fraction", "tau") if k in p}}
    omega_mod = float(merged.get("omega_mod", 1.0))
    if "tau" in merged:
        return floquet.FloquetProtocol(omega_mod, float(merged["tau"]), gamma)
    return floquet.FloquetProtocol.from_fraction(omega_mod, float(merged.get("fraction", 0.4)), gamma)


def _sideband_params(kind, p) -> cooling.SidebandParams:
    n_cut = int(p.get("n_cut", 5))
    if kind == "eit_reduced":
        eit = cooling.EITParams(**{k: float(p[k]) for k in
                                   ("gamma_e", "omega_r", "delta_r", "omega_g", "delta_g", "eta", "nu")})
        return cooling.eit_reduce(eit, n_cut=n_cut)
    gamma, eta, nu = float(p.get("gamma", 0.032)), float(p.get("eta", 0.1)), float(p.get("nu", 1.0))
    if "point" in p:
        w, d = cooling.REFERENCE_POINTS[str(p["point"])]
        return cooling.SidebandParams.from_ratios(w, d, gamma=gamma, eta=eta, nu=nu, n_cut=n_cut)
    if "omega_over_gamma" in p or "delta_over_nu" in p:
        return cooling.SidebandParams.from_ratios(float(p["omega_over_gamma"]), float(p["delta_over_nu"]),
                                                  gamma=gamma, eta=eta, nu=nu, n_cut=n_cut)
    return cooling.SidebandParams(nu, float(p["delta_detuning"]), float(p["omega_g"]), eta, gamma, n_cut)


def _initial_three_level(p, seed):
    kind = p.get("initial", "b")
    space = liouville.three_level_space()
    if kind == "b":
        r = np.zeros((3, 3), dtype=complex)
        r[liouville.B, liouville.B] = 1.0
        return r
    rng = np.random.default_rng(seed)
    if kind == "random":
        return random_density_matrix(space, rng).matrix
    if kind == "random_bc":
        return random_density_matrix(space, rng, support=[liouville.B, liouville.C]).matrix
    raise ValueError(f"initial must be one of {INITIAL_STATES}")


def _spectrum_columns(ev, prefix: str = "lambda") -> dict:
    return {f"{prefix}{i}": complex(v) for i, v in enumerate(ev)}


def _ep_rows(superop, ep_cfg=None) -> list[dict]:
    rep = liouville.detect_ep(superop, **(ep_cfg or {}))
    return [{"center": complex(c.center), "algebraic": c.algebraic, "geometric": c.geometric,
             "order": c.order, "blocks": "+".join(str(b) for b in c.blocks)} for c in rep.clusters]


def _times(integ) -> np.ndarray:
    dt, t_final = float(integ.get("dt", 0.05)), float(integ.get("t_final", 20.0))
    n = max(1, int(round(t_final / dt)))
    return np.linspace(0.0, t_final, n + 1)


def _eval_three_level(p, cfg) -> tuple[dict, list[dict]]:
    outputs, integ = cfg["outputs"], cfg["integration"] or {}
    model = _three_level(p)
    sup = liouville.build_superoperator(model)
    scalars: dict = {}
    rows: list[dict] = []
    if "spectrum" in outputs:
        scalars.update(_spectrum_columns(liouville.eigenvalues(sup)))
    if "gap" in outputs:
        scalars["gap"] = liouville.spectral_gap(liouville.eigenvalues(sup))
    if FLOQUET_OUTPUTS & set(outputs):
        mono = floquet.three_level_monodromy(float(p.get("omega", 1.0)),
                                             _protocol(p, cfg["floquet"], float(p["gamma"])))
        if "mu" in outputs:
            scalars["mu"] = floquet.mu_parameter(mono)
        if "floquet_gap" in outputs:
            scalars["floquet_gap"] = floquet.floquet_gap(mono)
    if "trajectory" in outputs or "decay_rate" in outputs:
        rho0 = _initial_three_level(p, cfg["seed"])
        times = _times(integ)
        if cfg["floquet"] is not None and "trajectory" in outputs:
            traj = floquet.evolve_piecewise(model, model.without_dissipation(),
                                            _protocol(p, cfg["floquet"], float(p["gamma"])), rho0, times)
        elif integ.get("method", "expm") == "rk4":
            dt = float(integ.get("dt", 0.05))
            sub = max(1, math.ceil(dt / min(0.01, dynamics.max_stable_dt(model))))
            traj = dynamics.integrate(model, rho0, times[-1], dt / sub, sample_every=sub)
        else:
            traj = dynamics.evolve_expm(sup, rho0, times)
        rho_ss = liouville.steady_state(sup).matrix
        dist = np.array([dynamics.hs_distance(s, rho_ss) for s in traj.states])
        if "decay_rate" in outputs:
            scalars["decay_rate"] = dynamics.fit_asymptotic_rate(dist, traj.times)
            spec = liouville.spectrum(sup)
            if not spec.is_defective:
                coeffs = liouville.mode_decomposition(spec, rho0).coefficients
                re = spec.eigenvalues.real[1:]
                slowest = np.abs(re - re[0]) <= 1e-9 * max(1.0, abs(re[0]))
                scalars["slowest_mode_weight"] = float(np.max(np.abs(coeffs[slowest])))
        if "trajectory" in outputs:
            x, y, z = dynamics.three_level_xyz(traj.states)
            rows = [{"t": t, "x": xi, "y": yi, "z": zi, "hs_distance": di}
                    for t, xi, yi, zi, di in zip(traj.times, x, y, z, dist)]
    if "ep_report" in outputs:
        rows = _ep_rows(sup, cfg["ep"])
    return scalars, rows


def _eval_sideband(p, cfg, kind) -> tuple[dict, list[dict]]:
    outputs, integ = cfg["outputs"], cfg["integration"] or {}
    params = _sideband_params(kind, p)
    scalars: dict = {}
    rows: list[dict] = []
    need_full = {"spectrum", "gap", "ep_report"} & set(outputs)
    sup = liouville.build_superoperator(cooling.build_sideband_model(params)) if need_full else None
    if "spectrum" in outputs:
        scalars.update(_spectrum_columns(liouville.eigenvalues(sup)))
    if "gap" in outputs:
        scalars["gap"] = liouville.spectral_gap(liouville.eigenvalues(sup))
    if "analytic_gap" in outputs:
        scalars["analytic_gap"] = cooling.subsystem_gap(params)
    if "subsystem_spectrum" in outputs:
        scalars.update(_spectrum_columns(cooling.subsystem_spectrum(params).eigenvalues, "analytic_lambda"))
    if "lep_condition" in outputs:
        cond = cooling.lep_condition(params)
        scalars["lep_residual"] = cond.residual
        scalars["omega_g_star"] = cond.omega_g_star
    if "optimal_detuning" in outputs:
        eit = cooling.EITParams(**{k: float(p[k]) for k in
                                   ("gamma_e", "omega_r", "delta_r", "omega_g", "delta_g", "eta", "nu")})
        scalars["delta_g_star"] = cooling.eit_optimal_detuning(eit)
        scalars["sideband_residual"] = cooling.sideband_detuning(params)
    if "cooling_limit" in outputs:
        scalars["n_ss"] = cooling.cooling_limit(params)
    if "mean_phonon" in outputs:
        rho0 = cooling.thermal_initial_state(params, float(p.get("nbar", 1.0)))
        dt, t_final = float(integ.get("dt", 1.0)), float(integ.get("t_final", 1000.0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", cooling.TruncationWarning)
            traj = cooling.mean_phonon_trajectory(params, rho0, t_final=t_final, dt=dt, keep_states=False)
        rows = [{"t": t, "n": n} for t, n in zip(traj.times, traj.observables["n"])]
    if "ep_report" in outputs:
        rows = _ep_rows(sup, cfg["ep"])
    return scalars, rows


_HANDLED = (LepkitError, ValueError, ArithmeticError, np.linalg.LinAlgError, KeyError)


def _evaluate(task) -> list[dict]:
    point, cfg = task
    head = {k: point[k] for k in cfg["axis_names"]}
    try:
        if cfg["model_kind"] == "three_level":
            scalars, rows = _eval_three_level(point, cfg)
        else:
            scalars, rows = _eval_sideband(point, cfg, cfg["model_kind"])
    except ConfigError:
        raise
    except _HANDLED as exc:
        return [{**head, "error": f"{type(exc).__name__}: {exc}"}]
    if not rows:
        return [{**head, **scalars}]
    return [{**head, **scalars, **r} for r in rows]


@dataclass
class SweepResult:
    columns: list[str]
    rows: list[dict]
    config: dict

    @property
    def failures(self) -> int:
        return sum(1 for r in self.rows if r.get("error"))


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def run_sweep(config: SweepConfig, workers: int | None = None) -> SweepResult:
    """Evaluate every grid point; rows are assembled by grid index.

    Failures at single points (exceptional-point breakdowns, convergence
    errors) land in an ``error`` column and do not stop the sweep.
    """
    config.validate()
    cfg = {
        "model_kind": config.model_kind,
        "outputs": list(config.outputs),
        "floquet": config.floquet,
        "integration": dict(config.integration or {}),
        "seed": config.seed,
        "ep": config.ep,
        "axis_names": [a.name for a in config.axes()],
    }
    tasks = [(p, cfg) for p in config.points()]
    workers = default_workers() if workers is None else workers
    if workers < 1:
        raise ConfigError("workers must be positive")
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            chunks = list(pool.map(_evaluate, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        chunks = [_evaluate(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    columns: list[str] = []
    for r in rows:
        for k in r:
            if k not in columns and k != "error":
                columns.append(k)
    if any("error" in r for r in rows):
        columns.append("error")
    return SweepResult(columns, rows, config.to_mapping())


# ---------------------------------------------------------------------------
# output

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.12g" % x
    return str(x)


def _expand(columns: Sequence[str], rows: Sequence[dict]):
    """Split complex-valued columns into ``_re``/``_im`` pairs."""
    complex_cols = {c for c in columns if any(isinstance(r.get(c), (complex, np.complexfloating))
                                              for r in rows)}
    header: list[str] = []
    for c in columns:
        header.extend([f"{c}_re", f"{c}_im"] if c in complex_cols else [c])
    flat = []
    for r in rows:
        out = {}
        for c in columns:
            if c not in r:
                continue
            v = r[c]
            if c in complex_cols:
                v = complex(v)
                out[f"{c}_re"], out[f"{c}_im"] = v.real, v.imag
            else:
                out[c] = v
        flat.append(out)
    return header, flat


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def render_table(result: SweepResult, fmt: str = "csv") -> str:
    if not result.rows:
        raise ValueError("nothing to write: the sweep produced no rows")
    header, flat = _expand(result.columns, result.rows)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for r in flat:
            writer.writerow([_fmt(r[c]) if c in r else "" for c in header])
        return buf.getvalue()
    if fmt == "json":
        rows = [{c: _json_value(r[c]) for c in header if c in r} for r in flat]
        return json.dumps({"meta": result.config, "rows": rows}, indent=1, sort_keys=False) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit_table(result: SweepResult, fmt: str, path: str | os.PathLike | None) -> str:
    """Write the table to ``path`` (stdout when ``None``) and return the text."""
    text = render_table(result, fmt)
    if path is not None:
        Path(path).write_text(text)
    return text
