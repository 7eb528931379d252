"""Command-line entry point: ``lepkit <command> [--config FILE] [--out FILE] ...``.

Every command runs a sweep.  Without ``--config`` it uses one of its named
presets (``--preset``, default the first listed), which regenerate the data
behind the corresponding figure.  ``--print-config`` writes the chosen preset
as YAML so it can be edited and passed back with ``--config``.

Exit status: 0 on success, 1 for configuration errors, 2 when the numerics
failed (no grid point could be evaluated, or an unexpected solver error).
"""

from __future__ import annotations

import argparse
import copy
import sys

import yaml

from .errors import LepkitError
from .sweep import ConfigError, SweepConfig, emit_table, load_config, run_sweep

_SIDEBAND_FIXED = {"gamma": 0.032, "eta": 0.1, "nu": 1.0, "n_cut": 5}
_EIT_FIXED = {"gamma_e": 1e-3, "omega_r": 1.0, "delta_r": 1.0, "omega_g": 0.005, "eta": 0.1, "nu": 0.2}

PRESETS: dict[str, dict[str, dict]] = {
    "spectrum3": {
        "fig2c": {
            "model_kind": "three_level",
            "fixed_params": {"omega": 1.0},
            "sweep_axes": [{"name": "gamma", "start": 0.05, "stop": 6.0, "count": 120}],
            "outputs": ["spectrum", "gap"],
        },
    },
    "dynamics3": {
        "fig3": {
            "model_kind": "three_level",
            "fixed_params": {"omega": 1.0, "initial": "b"},
            "sweep_axes": [{"name": "gamma", "values": [0.2, 2.0, 10.0]}],
            "outputs": ["trajectory"],
            "integration": {"dt": 0.05, "t_final": 20.0, "method": "expm"},
        },
        "fig3-rk4": {
            "model_kind": "three_level",
            "fixed_params": {"omega": 1.0, "initial": "b"},
            "sweep_axes": [{"name": "gamma", "values": [0.2, 2.0, 10.0]}],
            "outputs": ["trajectory"],
            "integration": {"dt": 0.05, "t_final": 20.0, "method": "rk4"},
        },
    },
    "mpemba": {
        "fig4": {
            "model_kind": "three_level",
            "fixed_params": {"gamma": 3.0, "omega": 1.0},
            "sweep_axes": [{"name": "initial", "values": ["b", "random", "random_bc"]}],
            "outputs": ["decay_rate", "trajectory"],
            "integration": {"dt": 0.25, "t_final": 100.0, "method": "expm"},
            "seed": 7,
        },
    },
    "floquet-phase": {
        "fig5a": {
            "model_kind": "three_level",
            "fixed_params": {"omega": 1.0},
            "sweep_axes": [{"name": "omega_mod", "start": 0.05, "stop": 3.0, "count": 120},
                           {"name": "gamma", "start": 0.05, "stop": 6.0, "count": 120}],
            "outputs": ["mu", "floquet_gap"],
            "floquet": {"fraction": 0.4},
        },
    },
    "floquet-gap": {
        "fig5c": {
            "model_kind": "three_level",
            "fixed_params": {"omega": 1.0},
            "sweep_axes": [{"name": "gamma", "start": 0.1, "stop": 6.0, "count": 200}],
            "outputs": ["gap", "floquet_gap", "mu"],
            "floquet": {"omega_mod": 1.0, "fraction": 0.4},
        },
        "fig5d": {
            "model_kind": "three_level",
            "fixed_params": {"omega": 1.0, "initial": "b"},
            "sweep_axes": [{"name": "gamma", "values": [2.0, 5.0]}],
            "outputs": ["trajectory"],
            "floquet": {"omega_mod": 1.0, "fraction": 0.4},
            "integration": {"dt": 0.05, "t_final": 30.0},
        },
    },
    "cooling-gap-map": {
        "fig8a": {
            "model_kind": "sideband",
            "fixed_params": dict(_SIDEBAND_FIXED),
            "sweep_axes": [{"name": "omega_over_gamma", "start": 0.05, "stop": 1.5, "count": 30},
                           {"name": "delta_over_nu", "start": 0.9, "stop": 1.0, "count": 41}],
            "outputs": ["gap", "analytic_gap"],
        },
        "fig6": {
            "model_kind": "sideband",
            "fixed_params": {**_SIDEBAND_FIXED, "delta_over_nu": 0.987},
            "sweep_axes": [{"name": "omega_over_gamma", "start": 0.02, "stop": 1.5, "count": 75}],
            "outputs": ["gap", "analytic_gap", "lep_condition"],
        },
        "fig7": {
            "model_kind": "sideband",
            "fixed_params": dict(_SIDEBAND_FIXED),
            "sweep_axes": [{"name": "point", "values": ["A", "B", "C", "D"]}],
            "outputs": ["spectrum", "subsystem_spectrum"],
        },
    },
    "cooling-dynamics": {
        "fig8b": {
            "model_kind": "sideband",
            "fixed_params": {**_SIDEBAND_FIXED, "n_cut": 10, "nbar": 1.0},
            "sweep_axes": [{"name": "point", "values": ["A", "B", "C", "D"]}],
            "outputs": ["mean_phonon"],
            "integration": {"dt": 20.0, "t_final": 10000.0},
        },
    },
    "cooling-limit": {
        "fig8c": {
            "model_kind": "sideband",
            "fixed_params": dict(_SIDEBAND_FIXED),
            "sweep_axes": [{"name": "omega_over_gamma", "start": 0.1, "stop": 1.5, "count": 15},
                           {"name": "delta_over_nu", "start": 0.9, "stop": 1.0, "count": 21}],
            "outputs": ["cooling_limit"],
        },
        "fig8d": {
            "model_kind": "sideband",
            "fixed_params": dict(_SIDEBAND_FIXED),
            "sweep_axes": [{"name": "delta_over_nu", "values": [0.987, 0.95, 0.91]},
                           {"name": "omega_over_gamma", "start": 0.1, "stop": 1.5, "count": 29}],
            "outputs": ["cooling_limit"],
        },
    },
    "eit-condition": {
        "fig9": {
            "model_kind": "eit_reduced",
            "fixed_params": dict(_EIT_FIXED),
            "sweep_axes": [{"name": "delta_g", "start": 0.95, "stop": 1.06, "count": 111}],
            "outputs": ["gap", "analytic_gap", "optimal_detuning"],
        },
    },
    "ep-report": {
        "three-level": {
            "model_kind": "three_level",
            "fixed_params": {"omega": 1.0},
            "sweep_axes": [{"name": "gamma", "values": [2.0]}],
            "outputs": ["ep_report"],
        },
        # the truncated phonon ladder packs eigenvalues into narrow bands; a tight
        # cluster tolerance keeps neighbouring band members apart
        "sideband-B": {
            "model_kind": "sideband",
            "fixed_params": {**_SIDEBAND_FIXED, "point": "B"},
            "outputs": ["ep_report"],
            "ep": {"cluster_tol": 1e-6},
        },
    },
}

COMMAND_HELP = {
    "spectrum3": "three-level Liouvillian spectrum and gap against gamma",
    "dynamics3": "x, y, z trajectories from |b><b| in the three damping regimes",
    "mpemba": "relaxation distances and fitted rates for different initial states",
    "floquet-phase": "mu and Floquet gap over the (omega, gamma) plane",
    "floquet-gap": "Floquet gap against gamma, and populations under modulation",
    "cooling-gap-map": "full and analytic sideband-cooling gaps, and spectra at reference points",
    "cooling-dynamics": "mean phonon number against time at the reference points",
    "cooling-limit": "stationary phonon number over the (Omega/gamma, Delta/nu) plane",
    "eit-condition": "reduced EIT-model gap against probe detuning",
    "ep-report": "Jordan structure of degenerate eigenvalue clusters",
}


def preset_config(command: str, preset: str | None = None) -> dict:
    presets = PRESETS[command]
    name = preset or next(iter(presets))
    if name not in presets:
        raise ConfigError(f"unknown preset {name!r} for {command}; choose from {sorted(presets)}")
    return copy.deepcopy(presets[name])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lepkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for command, presets in PRESETS.items():
        p = sub.add_parser(command, help=COMMAND_HELP[command])
        p.add_argument("--config", help="YAML sweep configuration (overrides --preset)")
        p.add_argument("--preset", choices=sorted(presets), help=f"built-in configuration (default {next(iter(presets))})")
        p.add_argument("--out", help="output file (default: standard output)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--workers", type=int, default=None, help="worker processes (default: available CPUs)")
        p.add_argument("--print-config", action="store_true", help="print the configuration as YAML and exit")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            config = load_config(args.config)
        else:
            config = SweepConfig.from_mapping(preset_config(args.command, args.preset))
        if args.print_config:
            sys.stdout.write(yaml.safe_dump(config.to_mapping(), sort_keys=False))
            return 0
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be positive")
        result = run_sweep(config, workers=args.workers)
    except ConfigError as exc:
        print(f"lepkit: configuration error: {exc}", file=sys.stderr)
        return 1
    except (LepkitError, ArithmeticError) as exc:
        print(f"lepkit: numerical failure: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - anything unforeseen is reported, not traced
        print(f"lepkit: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2

    if result.failures:
        errors = [r["error"] for r in result.rows if r.get("error")]
        print(f"lepkit: {len(errors)} of {len(result.rows)} rows failed; first: {errors[0]}",
              file=sys.stderr)
    try:
        text = emit_table(result, args.format, args.out)
    except OSError as exc:
        print(f"lepkit: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
        return 1
    if args.out is None:
        sys.stdout.write(text)
    if result.failures == len(result.rows):
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
