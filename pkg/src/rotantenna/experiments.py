"""
Experiment presets, JSON configuration and CSV/JSON output.

A configuration file is a JSON object. Only ``preset`` is required; every
other field falls back to the preset defaults listed by :func:`preset_defaults`.
Angles in the file (``array.theta_max``, ``scenario.user_azimuth`` and the
sweep of the azimuth preset) are read in the unit named by ``angle_unit``.

CSV columns per preset::

    fig3_snr_vs_N        n_bar, snr_optimal_db, snr_reference_db, snr_upper_bound_db
    fig4_snr_vs_azimuth  user_azimuth_deg, snr_optimal_db, snr_reference_db, snr_upper_bound_db
    fig5_sinr_vs_power   transmit_snr_db, then per receiver R in the configured order:
                         eta_optimal_R_db, eta_reference_R_db, eta_random_R_db, eta_isotropic_R_db
    fig6_sinr_vs_users   num_users, then the same per-receiver columns
    custom               <sweep_variable>, then the same per-receiver columns
"""
from concurrent.futures import ThreadPoolExecutor
import copy
import csv
from dataclasses import dataclass
import datetime
import io
import json
import math
from pathlib import Path
import subprocess
import time

import numpy as np

from . import __version__
from .ao import SolverConfig, evaluate_scheme, solve_maxmin
from .beamforming import sinr
from .channel import Scenario, ScenarioTemplate, path_coefficients, sample_scenario, synthesize_channel
from .closed_form import optimal_angles_single_user, snr_single_user, snr_upper_bound
from .geometry import ArrayGeometry, make_upa, pointing_matrix, random_angles

PRESETS = ("fig3_snr_vs_N", "fig4_snr_vs_azimuth", "fig5_sinr_vs_power",
           "fig6_sinr_vs_users", "custom")
SWEEP_VARIABLES = ("transmit_snr_db", "num_users", "n_bar")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


_ARRAY_DEFAULTS = {"n_bar": 11, "wavelength": 0.125, "directivity": 4,
                   "theta_max": math.pi / 6, "spacing": None}
_SCENARIO_DEFAULTS = {"num_users": 4, "num_scatterers": 3, "radius": 50.0,
                      "transmit_snr_db": 60.0, "user_azimuth": 0.0, "rcs_mean": 1.0,
                      "rcs_distribution": "exponential",
                      "scatterer_placement": "area_uniform"}
_SOLVER_DEFAULTS = {"beamformers": ["mmse", "zf"], "eps": 1e-3, "max_outer": 50,
                    "taylor_mode": "exact", "init": "reference_zero",
                    "zf_warm_start": True}

_PRESET_OVERRIDES = {
    "fig3_snr_vs_N": {"sweep": list(range(1, 302, 10)),
                      "scenario": {"num_users": 1, "num_scatterers": 0,
                                   "transmit_snr_db": 30.0}},
    "fig4_snr_vs_azimuth": {"sweep": [math.radians(a) for a in range(-90, 91, 5)],
                            "array": {"n_bar": 101},
                            "scenario": {"num_users": 1, "num_scatterers": 0,
                                         "transmit_snr_db": 30.0}},
    "fig5_sinr_vs_power": {"sweep": [40.0, 50.0, 60.0, 70.0, 80.0]},
    "fig6_sinr_vs_users": {"sweep": [1, 2, 4, 6, 8]},
    "custom": {"sweep": [60.0], "sweep_variable": "transmit_snr_db"},
}


@dataclass
class ExperimentSpec:
    """Validated experiment description. Angles are stored in radians."""
    preset: str
    sweep: list
    array: dict
    scenario: dict
    solver: dict
    sweep_variable: str | None = None
    random_draws: int = 10
    realizations: int = 1
    seed: int = 0
    output: str | None = None
    threads: int = 1

    def to_dict(self):
        """Canonical JSON-ready form (radians), reloadable by :func:`parse_config`."""
        d = {"preset": self.preset, "angle_unit": "rad", "sweep": list(self.sweep),
             "array": dict(self.array), "scenario": dict(self.scenario),
             "solver": copy.deepcopy(self.solver), "random_draws": self.random_draws,
             "realizations": self.realizations, "seed": self.seed,
             "output": self.output, "threads": self.threads}
        if self.sweep_variable is not None:
            d["sweep_variable"] = self.sweep_variable
        return d


def preset_defaults(preset):
    """Default configuration of ``preset`` in canonical (radian) form."""
    if preset not in PRESETS:
        raise ConfigError(f"preset: unknown preset {preset!r}; choose from {PRESETS}")
    over = _PRESET_OVERRIDES[preset]
    d = {"preset": preset, "angle_unit": "rad", "sweep": list(over["sweep"]),
         "array": {**_ARRAY_DEFAULTS, **over.get("array", {})},
         "scenario": {**_SCENARIO_DEFAULTS, **over.get("scenario", {})},
         "solver": copy.deepcopy(_SOLVER_DEFAULTS), "random_draws": 10,
         "realizations": 1, "seed": 0, "output": None, "threads": 1}
    if "sweep_variable" in over:
        d["sweep_variable"] = over["sweep_variable"]
    return d


def _merge(name, base, given):
    if not isinstance(given, dict):
        raise ConfigError(f"{name}: expected an object")
    unknown = set(given) - set(base)
    if unknown:
        raise ConfigError(f"{name}: unknown field(s) {sorted(unknown)}")
    return {**base, **given}


def _check(cond, field_name, msg):
    if not cond:
        raise ConfigError(f"{field_name}: {msg}")


def _is_odd_int(x):
    return isinstance(x, int) and not isinstance(x, bool) and x >= 1 and x % 2 == 1


def parse_config(raw):
    """Validate a configuration mapping and fill in preset defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    preset = raw.get("preset")
    if preset is None:
        raise ConfigError("preset: missing required field")
    base = preset_defaults(preset)
    allowed = set(base) | {"sweep_variable"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level field(s) {sorted(unknown)}")
    unit = raw.get("angle_unit", "deg")
    _check(unit in ("deg", "rad"), "angle_unit", "must be 'deg' or 'rad'")
    to_rad = math.radians if unit == "deg" else float

    array = _merge("array", base["array"], raw.get("array", {}))
    scenario = _merge("scenario", base["scenario"], raw.get("scenario", {}))
    solver = _merge("solver", base["solver"], raw.get("solver", {}))
    if "theta_max" in raw.get("array", {}):
        array["theta_max"] = to_rad(array["theta_max"])
    if "user_azimuth" in raw.get("scenario", {}):
        scenario["user_azimuth"] = to_rad(scenario["user_azimuth"])

    sweep = raw.get("sweep", base["sweep"])
    _check(isinstance(sweep, list) and len(sweep) > 0, "sweep", "must be a non-empty list")
    if preset == "fig4_snr_vs_azimuth" and "sweep" in raw:
        sweep = [to_rad(v) for v in sweep]

    sweep_variable = raw.get("sweep_variable", base.get("sweep_variable"))
    if preset == "custom":
        _check(sweep_variable in SWEEP_VARIABLES, "sweep_variable",
               f"must be one of {SWEEP_VARIABLES}")
    elif "sweep_variable" in raw:
        raise ConfigError("sweep_variable: only valid for the custom preset")

    _check(array["wavelength"] > 0, "array.wavelength", "must be positive")
    _check(isinstance(array["directivity"], int) and array["directivity"] >= 0,
           "array.directivity", "must be a non-negative integer")
    _check(0 <= array["theta_max"] <= math.pi / 2 + 1e-15, "array.theta_max",
           "must lie in [0, pi/2] (0 to 90 degrees)")
    _check(_is_odd_int(array["n_bar"]), "array.n_bar", "must be an odd positive integer")
    _check(array["spacing"] is None or array["spacing"] > 0, "array.spacing",
           "must be positive or null")
    _check(isinstance(scenario["num_users"], int) and scenario["num_users"] >= 1,
           "scenario.num_users", "must be a positive integer")
    _check(isinstance(scenario["num_scatterers"], int) and scenario["num_scatterers"] >= 0,
           "scenario.num_scatterers", "must be a non-negative integer")
    _check(scenario["radius"] > 0, "scenario.radius", "must be positive")
    _check(scenario["rcs_mean"] > 0, "scenario.rcs_mean", "must be positive")
    _check(scenario["rcs_distribution"] in ("exponential", "constant"),
           "scenario.rcs_distribution", "must be 'exponential' or 'constant'")
    _check(scenario["scatterer_placement"] in ("area_uniform", "radius_uniform"),
           "scenario.scatterer_placement", "must be 'area_uniform' or 'radius_uniform'")
    kinds = solver["beamformers"]
    _check(isinstance(kinds, list) and kinds and all(k in ("zf", "mmse") for k in kinds)
           and len(set(kinds)) == len(kinds),
           "solver.beamformers", "must be a non-empty list drawn from 'zf', 'mmse'")
    _check(solver["eps"] > 0, "solver.eps", "must be positive")
    _check(isinstance(solver["max_outer"], int) and solver["max_outer"] >= 1,
           "solver.max_outer", "must be a positive integer")
    _check(solver["taylor_mode"] in ("exact", "paper_literal"), "solver.taylor_mode",
           "must be 'exact' or 'paper_literal'")
    _check(solver["init"] in ("reference_zero", "toward_centroid"), "solver.init",
           "must be 'reference_zero' or 'toward_centroid'")

    for key in ("random_draws", "realizations", "threads"):
        val = raw.get(key, base[key])
        _check(isinstance(val, int) and val >= 1, key, "must be a positive integer")
    seed = raw.get("seed", base["seed"])
    _check(isinstance(seed, int) and 0 <= seed < 2 ** 64, "seed", "must be a 64-bit non-negative integer")

    var = {"fig3_snr_vs_N": "n_bar", "fig4_snr_vs_azimuth": "user_azimuth",
           "fig5_sinr_vs_power": "transmit_snr_db", "fig6_sinr_vs_users": "num_users",
           "custom": sweep_variable}[preset]
    for i, v in enumerate(sweep):
        name = f"sweep[{i}]"
        _check(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v),
               name, "must be a finite number")
        if var == "n_bar":
            _check(_is_odd_int(v), name, "array size must be an odd positive integer")
        elif var == "num_users":
            _check(isinstance(v, int) and v >= 1, name, "number of users must be a positive integer")
        elif var == "user_azimuth":
            _check(abs(v) <= math.pi / 2 + 1e-12, name, "user azimuth must lie in [-90, 90] degrees")

    spec = ExperimentSpec(preset, list(sweep), array, scenario, solver, sweep_variable,
                          raw.get("random_draws", base["random_draws"]),
                          raw.get("realizations", base["realizations"]), seed,
                          raw.get("output", base["output"]),
                          raw.get("threads", base["threads"]))
    check_feasible(spec)
    return spec


def load_config(path):
    """Read and validate a JSON experiment configuration."""
    path = Path(path)
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return parse_config(raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dump_config(spec, path):
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")


def _point_params(spec, value):
    """(n_bar, num_users, transmit_snr_db) at one sweep point of a multi-user run."""
    n_bar = spec.array["n_bar"]
    k = spec.scenario["num_users"]
    p = spec.scenario["transmit_snr_db"]
    var = {"fig5_sinr_vs_power": "transmit_snr_db", "fig6_sinr_vs_users": "num_users"}.get(
        spec.preset, spec.sweep_variable)
    if var == "transmit_snr_db":
        p = float(value)
    elif var == "num_users":
        k = int(value)
    elif var == "n_bar":
        n_bar = int(value)
    return n_bar, k, p


def check_feasible(spec):
    """Reject parameter combinations no solver can handle, before any work starts."""
    if spec.preset in ("fig3_snr_vs_N", "fig4_snr_vs_azimuth"):
        return
    if "zf" in spec.solver["beamformers"]:
        for v in spec.sweep:
            n_bar, k, _ = _point_params(spec, v)
            if k > n_bar * n_bar:
                raise ConfigError(f"solver.beamformers: zero forcing needs N >= K "
                                  f"(N={n_bar * n_bar}, K={k} at sweep value {v})")


def _geometry(spec, n_bar):
    a = spec.array
    return make_upa(n_bar, n_bar, a["spacing"], a["wavelength"], a["directivity"], a["theta_max"])


def _template(spec, k, p_db):
    s = spec.scenario
    azimuths = (s["user_azimuth"],) if k == 1 else None
    return ScenarioTemplate(k, s["num_scatterers"], s["radius"], p_db, azimuths,
                            s["rcs_mean"], s["rcs_distribution"], s["scatterer_placement"])


def _db(x):
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def _single_user_point(spec, n_bar, azimuth):
    geom = _geometry(spec, n_bar)
    r = spec.scenario["radius"]
    user = np.array([r * math.cos(azimuth), r * math.sin(azimuth), 0.0])
    pbar = 10.0 ** (spec.scenario["transmit_snr_db"] / 10.0)
    opt = snr_single_user(geom, user, optimal_angles_single_user(geom, user), pbar)
    ref = snr_single_user(geom, user, np.zeros((geom.num_antennas, 2)), pbar)
    return {"optimal": opt, "reference": ref, "upper_bound": snr_upper_bound(geom, user, pbar)}


def _multi_user_point(spec, value, realization):
    n_bar, k, p_db = _point_params(spec, value)
    geom = _geometry(spec, n_bar)
    seed = spec.seed + realization
    scen = sample_scenario(_template(spec, k, p_db), seed)
    coef = path_coefficients(geom, scen)
    s = spec.solver
    out = {}
    zf_report = None
    kinds = s["beamformers"]
    order = sorted(kinds, key=lambda kind: kind != "zf")
    for kind in order:
        cfg = SolverConfig(beamformer=kind, eps=s["eps"], max_outer=s["max_outer"],
                           taylor_mode=s["taylor_mode"], init=s["init"],
                           zf_warm_start=s["zf_warm_start"])
        report = solve_maxmin(geom, scen, cfg, zf_report=zf_report)
        if kind == "zf":
            zf_report = report
        draws = [evaluate_scheme(geom, scen,
                                 random_angles(geom.num_antennas, geom.theta_max,
                                               np.random.default_rng([spec.seed, 2, realization, d])),
                                 kind, coef=coef)
                 for d in range(spec.random_draws)]
        out[kind] = {
            "optimal": report.final_eta,
            "reference": evaluate_scheme(geom, scen, np.zeros((geom.num_antennas, 2)), kind, coef=coef),
            "random": float(np.mean(draws)),
            "isotropic": evaluate_scheme(geom, scen, None, kind, isotropic=True, coef=coef),
            "status": report.status,
            "iterations": report.iterations,
        }
    return out


def _columns(spec):
    if spec.preset == "fig3_snr_vs_N":
        return ["n_bar", "snr_optimal_db", "snr_reference_db", "snr_upper_bound_db"]
    if spec.preset == "fig4_snr_vs_azimuth":
        return ["user_azimuth_deg", "snr_optimal_db", "snr_reference_db", "snr_upper_bound_db"]
    first = {"fig5_sinr_vs_power": "transmit_snr_db",
             "fig6_sinr_vs_users": "num_users"}.get(spec.preset, spec.sweep_variable)
    cols = [first]
    for kind in spec.solver["beamformers"]:
        cols += [f"eta_{scheme}_{kind}_db" for scheme in ("optimal", "reference", "random", "isotropic")]
    return cols


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return f"{x:.10g}"


def run_rows(spec):
    """
    Evaluate every sweep point of ``spec``.

    Returns
    -------
    columns : list of str
    rows : list of list
        One row per sweep value, in sweep order; values in dB.
    diagnostics : list of dict
    """
    if spec.preset in ("fig3_snr_vs_N", "fig4_snr_vs_azimuth"):
        def task(v):
            if spec.preset == "fig3_snr_vs_N":
                return _single_user_point(spec, int(v), spec.scenario["user_azimuth"])
            return _single_user_point(spec, spec.array["n_bar"], float(v))
        tasks = [(i, 0) for i in range(len(spec.sweep))]
        run = lambda ij: task(spec.sweep[ij[0]])
    else:
        tasks = [(i, r) for i in range(len(spec.sweep)) for r in range(spec.realizations)]
        run = lambda ij: _multi_user_point(spec, spec.sweep[ij[0]], ij[1])

    if spec.threads > 1:
        with ThreadPoolExecutor(spec.threads) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    rows, diagnostics = [], []
    for i, v in enumerate(spec.sweep):
        if spec.preset in ("fig3_snr_vs_N", "fig4_snr_vs_azimuth"):
            res = results[i]
            x = int(v) if spec.preset == "fig3_snr_vs_N" else math.degrees(v)
            rows.append([x, _db(res["optimal"]), _db(res["reference"]), _db(res["upper_bound"])])
            continue
        point = [res for (j, _), res in zip(tasks, results) if j == i]
        x = v if not isinstance(v, float) or spec.preset == "fig5_sinr_vs_power" or \
            spec.sweep_variable == "transmit_snr_db" else int(v)
        row = [x]
        for kind in spec.solver["beamformers"]:
            for scheme in ("optimal", "reference", "random", "isotropic"):
                row.append(_db(float(np.mean([p[kind][scheme] for p in point]))))
            diagnostics.append({"sweep": v, "beamformer": kind,
                                "status": [p[kind]["status"] for p in point],
                                "iterations": [p[kind]["iterations"] for p in point]})
        rows.append(row)
    return _columns(spec), rows, diagnostics


def csv_text(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def version_string():
    try:
        desc = subprocess.run(["git", "describe", "--always", "--dirty"],
                              cwd=Path(__file__).resolve().parent, capture_output=True,
                              text=True, timeout=5)
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}+g{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def metadata_path(csv_path):
    p = Path(csv_path)
    return p.with_name(p.name + ".meta.txt")


def run_experiment(spec, output=None):
    """
    Run ``spec`` and write the CSV plus a ``<csv>.meta.txt`` sidecar.

    Returns the CSV path.
    """
    check_feasible(spec)
    out = Path(output or spec.output or f"{spec.preset}.csv")
    start = time.perf_counter()
    columns, rows, diagnostics = run_rows(spec)
    wall = time.perf_counter() - start
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(csv_text(columns, rows))
    meta = [
        f"tool: rotantenna {version_string()}",
        f"preset: {spec.preset}",
        f"seed: {spec.seed}",
        f"created: {datetime.datetime.now(datetime.timezone.utc).isoformat()}",
        f"wall_time_s: {wall:.3f}",
        "config: " + json.dumps(spec.to_dict(), sort_keys=True),
    ]
    for d in diagnostics:
        meta.append("solver: " + json.dumps(d, sort_keys=True, default=str))
    metadata_path(out).write_text("\n".join(meta) + "\n")
    return out


def _geometry_dict(geom):
    return {"positions": geom.positions.tolist(), "wavelength": geom.wavelength,
            "directivity": geom.directivity, "theta_max": geom.theta_max}


def _scenario_dict(scen):
    return {"user_positions": scen.user_positions.tolist(),
            "transmit_snr": scen.transmit_snr.tolist(),
            "scatterer_positions": scen.scatterer_positions.tolist(),
            "rcs": scen.rcs.tolist(), "phases": scen.phases.tolist(), "seed": scen.seed}


def emit_report(report, path, geom=None, scen=None):
    """
    Write a solver report as JSON.

    Passing ``geom`` and ``scen`` embeds the problem so that
    :func:`verify_report` can recompute the minimum SINR later.
    """
    ang = np.asarray(report.final_angles)
    doc = {
        "beamformer": report.beamformer,
        "converged": bool(report.converged),
        "status": report.status,
        "message": report.message,
        "start": report.start,
        "iterations": int(report.iterations),
        "initial_eta": report.initial_eta,
        "final_eta": report.final_eta,
        "final_eta_db": _db(report.final_eta),
        "eta_trace": [float(x) for x in report.eta_trace],
        "final_angles_rad": ang.tolist(),
        "final_angles_deg": np.degrees(ang).tolist(),
        "beamformers_re": np.real(report.final_beamformers).tolist(),
        "beamformers_im": np.imag(report.final_beamformers).tolist(),
        "newton_steps": int(report.newton_steps),
        "wall_time_s": report.wall_time,
    }
    if geom is not None:
        doc["geometry"] = _geometry_dict(geom)
    if scen is not None:
        doc["scenario"] = _scenario_dict(scen)
    path = Path(path)
    path.write_text(json.dumps(doc, indent=1))
    return path


def load_report(path):
    return json.loads(Path(path).read_text())


def verify_report(doc):
    """
    Recompute the minimum SINR of a stored report from first principles.

    Returns ``(recomputed_eta, relative_error)``.
    """
    g = doc["geometry"]
    geom = ArrayGeometry(np.array(g["positions"]), g["wavelength"], g["directivity"], g["theta_max"])
    s = doc["scenario"]
    scen = Scenario(np.array(s["user_positions"]), np.array(s["transmit_snr"]),
                    np.array(s["scatterer_positions"]).reshape(-1, 3), np.array(s["rcs"]),
                    np.array(s["phases"]), s["seed"])
    angles = np.array(doc["final_angles_rad"])
    if np.any(angles[:, 0] < 0) or np.any(angles[:, 0] > geom.theta_max + 1e-12):
        raise ValueError("stored eccentric angles violate [0, theta_max]")
    H = synthesize_channel(path_coefficients(geom, scen), pointing_matrix(angles))
    V = np.array(doc["beamformers_re"]) + 1j * np.array(doc["beamformers_im"])
    eta = float(sinr(H, V, scen.transmit_snr).min())
    return eta, abs(eta - doc["final_eta"]) / abs(doc["final_eta"])
