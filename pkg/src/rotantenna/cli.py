"""
Command line entry point.

    rotantenna run CONFIG [--seed S] [--out PATH] [--threads T] [--taylor-mode MODE]
    rotantenna oracle CONFIG [--seed S]
    rotantenna presets
"""
import argparse
import dataclasses
import json
import sys
import warnings

import numpy as np

from .ao import SolverConfig, solve_maxmin
from .channel import (ScenarioTemplate, channel_from_pointing, path_coefficients,
                      sample_scenario, synthesize_channel)
from .closed_form import optimal_angles_single_user
from .experiments import (PRESETS, ConfigError, _geometry, _point_params, _template,
                          load_config, preset_defaults, run_experiment)
from .geometry import make_upa, pointing_matrix, random_angles
from .oracle import (GridSpec, finite_difference_gradient, grid_search_angles,
                     literal_channel)
from .sca import NegativeProjectionWarning, channel_gradients


def _apply_overrides(spec, args):
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        changes["output"] = args.out
    if getattr(args, "threads", None) is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        changes["threads"] = args.threads
    if getattr(args, "taylor_mode", None) is not None:
        solver = dict(spec.solver)
        solver["taylor_mode"] = args.taylor_mode.replace("-", "_")
        changes["solver"] = solver
    return dataclasses.replace(spec, **changes)


def oracle_checks(spec):
    """
    Cross-check the solver stack against the independent oracles.

    Returns a list of ``(name, passed, detail)``.
    """
    results = []
    if spec.preset in ("fig3_snr_vs_N", "fig4_snr_vs_azimuth"):
        n_bar, k, p_db = 3, 1, spec.scenario["transmit_snr_db"]
    else:
        n_bar, k, p_db = _point_params(spec, spec.sweep[0])
    n_bar = min(n_bar, 5)
    geom = _geometry(spec, n_bar)
    scen = sample_scenario(_template(spec, k, p_db), spec.seed)
    rng = np.random.default_rng([spec.seed, 3])
    angles = random_angles(geom.num_antennas, geom.theta_max, rng)
    coef = path_coefficients(geom, scen)
    H = synthesize_channel(coef, pointing_matrix(angles))
    L = literal_channel(geom, scen, angles)
    err = float(np.max(np.abs(H - L) / np.maximum(np.abs(L), 1e-300)))
    results.append(("channel_equivalence", err <= 1e-12, f"max relative error {err:.3e}"))

    F = pointing_matrix(angles)
    with warnings.catch_warnings():
        # random boresights may face away from some paths; the clamp makes that benign
        warnings.simplefilter("ignore", NegativeProjectionWarning)
        grads = channel_gradients(coef, F)
    worst = 0.0
    for n in range(geom.num_antennas):
        def entry(f, n=n):
            G = F.copy()
            G[n] = f
            return channel_from_pointing(coef, G)[n]
        fd = finite_difference_gradient(entry, F[n])
        worst = max(worst, float(np.max(np.abs(fd.T - grads[n]))
                                 / max(np.max(np.abs(grads[n])), 1e-300)))
    results.append(("gradient_vs_finite_difference", worst <= 1e-6,
                    f"max relative error {worst:.3e}"))

    one = make_upa(1, 1, None, geom.wavelength, geom.directivity, geom.theta_max)
    single = sample_scenario(ScenarioTemplate(1, 0, spec.scenario["radius"], p_db,
                                              (spec.scenario["user_azimuth"],)), spec.seed)
    _, eta_grid = grid_search_angles(one, single, "mmse", GridSpec(31, 61))
    closed = optimal_angles_single_user(one, single.user_positions[0])
    H1 = synthesize_channel(path_coefficients(one, single), pointing_matrix(closed))
    eta_closed = float(single.transmit_snr[0] * np.sum(np.abs(H1) ** 2))
    results.append(("closed_form_vs_grid", eta_closed >= eta_grid * (1 - 1e-12),
                    f"closed form {eta_closed:.6e}, grid {eta_grid:.6e}"))

    if k >= 2:
        scen2 = sample_scenario(ScenarioTemplate(2, 0, spec.scenario["radius"], p_db), spec.seed)
        _, eta_g = grid_search_angles(one, scen2, "mmse", GridSpec(31, 61))
        rep = solve_maxmin(one, scen2, SolverConfig(beamformer="mmse"))
        ratio = rep.final_eta / eta_g
        results.append(("ao_vs_grid_n1_k2", ratio >= 0.95,
                        f"ao {rep.final_eta:.6e}, grid {eta_g:.6e}, ratio {ratio:.4f}"))
    return results


def _cmd_run(args):
    spec = _apply_overrides(load_config(args.config), args)
    out = run_experiment(spec)
    print(f"wrote {out}")
    return 0


def _cmd_oracle(args):
    spec = _apply_overrides(load_config(args.config), args)
    failed = 0
    for name, ok, detail in oracle_checks(spec):
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed += not ok
    return 1 if failed else 0


def _cmd_presets(args):
    for name in PRESETS:
        print(name)
        print(json.dumps(preset_defaults(name), indent=2, sort_keys=True))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="rotantenna",
                                     description="Max-min SINR experiments for rotatable antenna arrays.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment and write its CSV")
    orc = sub.add_parser("oracle", help="run oracle cross-checks for a configuration")
    for p in (run, orc):
        p.add_argument("config", help="JSON configuration file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output CSV path")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--taylor-mode", choices=("exact", "paper-literal"), default=None)
    run.set_defaults(func=_cmd_run)
    orc.set_defaults(func=_cmd_oracle)
    pre = sub.add_parser("presets", help="list presets and their defaults")
    pre.set_defaults(func=_cmd_presets)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
