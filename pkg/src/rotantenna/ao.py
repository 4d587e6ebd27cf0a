"""
Alternating optimization of receive combiners and element boresights.

Each outer iteration recomputes the ZF or MMSE combiners for the current
boresights, linearizes the SINR constraints around the current point and
solves the resulting convex program for new boresights. A step is only
kept if it does not lower the exact minimum SINR, so the recorded trace is
non-decreasing.
"""
from dataclasses import dataclass, field
import time

import numpy as np

from .beamforming import RankDeficiencyError, beamformers, sinr
from .channel import (channel_from_pointing, isotropic_channel,
                      path_coefficients, synthesize_channel)
from .closed_form import optimal_angles_single_user
from .geometry import angles_from_pointing, normalize_angles, pointing_matrix
from .sca import (BarrierConfig, TAYLOR_MODES,
                  build_linearization, renormalize, solve_subproblem)

BEAMFORMER_KINDS = ("zf", "mmse")
INIT_MODES = ("reference_zero", "toward_centroid", "explicit")


@dataclass(frozen=True)
class SolverConfig:
    """
    Settings of the alternating optimization.

    Parameters
    ----------
    beamformer : {'zf', 'mmse'}
    eps : float
        Stop once the relative change of the minimum SINR is at most ``eps``.
    max_outer : int
        Cap on outer iterations.
    taylor_mode : {'exact', 'paper_literal'}
    init : {'reference_zero', 'toward_centroid', 'explicit'}
    initial_angles : array_like, optional
        ``(N, 2)`` deflection matrix used when ``init='explicit'``.
    max_backtracks : int
        Halvings of the step toward the subproblem solution before the
        iterate is declared stationary.
    zf_warm_start : bool
        For MMSE runs, also run the ZF alternation from the same start and
        continue with MMSE from its result; the better of the two MMSE runs
        is returned. Since MMSE is SINR-optimal for any fixed boresights this
        makes the MMSE result at least as good as the ZF one.
    """
    beamformer: str = "mmse"
    eps: float = 1e-3
    max_outer: int = 50
    taylor_mode: str = "exact"
    init: str = "reference_zero"
    initial_angles: np.ndarray | None = None
    max_backtracks: int = 12
    zf_warm_start: bool = True
    barrier: BarrierConfig = field(default_factory=BarrierConfig)

    def __post_init__(self):
        if self.beamformer not in BEAMFORMER_KINDS:
            raise ValueError(f"beamformer must be one of {BEAMFORMER_KINDS}")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if self.taylor_mode not in TAYLOR_MODES:
            raise ValueError(f"taylor_mode must be one of {TAYLOR_MODES}")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}")
        if self.init == "explicit" and self.initial_angles is None:
            raise ValueError("init='explicit' requires initial_angles")


@dataclass
class SolverReport:
    """
    Outcome of :func:`solve_maxmin`.

    ``eta_trace[i]`` is the exact minimum SINR after outer iteration ``i+1``;
    ``initial_eta`` is the value at the starting point.
    """
    eta_trace: np.ndarray
    final_angles: np.ndarray
    final_beamformers: np.ndarray
    final_eta: float
    converged: bool
    iterations: int
    initial_eta: float
    beamformer: str
    status: str = "converged"
    message: str = ""
    start: str = "direct"
    subproblem_status: list = field(default_factory=list)
    newton_steps: int = 0
    negative_projections: int = 0
    wall_time: float = 0.0


def _initial_pointing(geom, scen, cfg):
    n = geom.num_antennas
    if cfg.init == "reference_zero":
        angles = np.zeros((n, 2))
    elif cfg.init == "toward_centroid":
        angles = optimal_angles_single_user(geom, scen.user_positions.mean(axis=0))
    else:
        angles = normalize_angles(cfg.initial_angles, geom.theta_max)
        if angles.shape[0] != n:
            raise ValueError("initial_angles must have one row per antenna")
    return pointing_matrix(angles)


def _evaluate(coef, F, kind, powers):
    H = channel_from_pointing(coef, F)
    V = beamformers(H, kind, powers)
    gam = sinr(H, V, powers)
    return float(gam.min()), V


def _alternate(coef, geom, powers, F, cfg, kind):
    start = time.perf_counter()
    eta, V = _evaluate(coef, F, kind, powers)
    initial_eta = eta

    trace = []
    statuses = []
    newton = 0
    negatives = 0
    converged = False
    status = "max_outer"
    message = ""
    for it in range(1, cfg.max_outer + 1):
        if not eta > 0:
            status, message = "degenerate", f"minimum SINR is zero at iteration {it}"
            break
        lin = build_linearization(coef, V, F, eta, powers, cfg.taylor_mode)
        negatives += lin.negative_projections
        sol = solve_subproblem(lin, geom.theta_max, cfg.barrier)
        statuses.append(sol.status)
        newton += sol.newton_steps
        if sol.status == "infeasible-guard":
            trace.append(eta)
            status, message = "subproblem_failed", f"subproblem lost feasibility at iteration {it}"
            break

        candidate = renormalize(sol.F)
        new_eta, new_F, new_V = eta, F, V
        step = 1.0
        for _ in range(cfg.max_backtracks + 1):
            Ft = renormalize(F + step * (candidate - F))
            try:
                eta_t, V_t = _evaluate(coef, Ft, kind, powers)
            except RankDeficiencyError as exc:
                message = f"iteration {it}: {exc}"
                eta_t = -np.inf
            if eta_t >= eta:
                new_eta, new_F, new_V = eta_t, Ft, V_t
                break
            step *= 0.5

        trace.append(new_eta)
        change = abs(new_eta - eta) / eta
        F, V, eta = new_F, new_V, new_eta
        if change <= cfg.eps:
            converged = True
            status = "converged"
            break

    angles = angles_from_pointing(F)
    angles[:, 0] = np.minimum(angles[:, 0], geom.theta_max)
    H = synthesize_channel(coef, pointing_matrix(angles))
    V = beamformers(H, kind, powers)
    final_eta = float(sinr(H, V, powers).min())
    return SolverReport(np.array(trace), angles, V, final_eta, converged,
                        len(trace), initial_eta, kind, status=status, message=message,
                        subproblem_status=statuses, newton_steps=newton,
                        negative_projections=negatives,
                        wall_time=time.perf_counter() - start)


def solve_maxmin(geom, scen, config=None, zf_report=None):
    """
    Maximize the minimum uplink SINR over combiners and element boresights.

    Parameters
    ----------
    geom : ArrayGeometry
    scen : Scenario
    config : SolverConfig, optional
    zf_report : SolverReport, optional
        Result of a ZF run on the same problem and start, reused for the
        MMSE warm start instead of being recomputed.

    Returns
    -------
    SolverReport
    """
    cfg = config or SolverConfig()
    if cfg.beamformer == "zf" and scen.num_users > geom.num_antennas:
        raise RankDeficiencyError(
            f"zero forcing needs N >= K (N={geom.num_antennas}, K={scen.num_users})")
    coef = path_coefficients(geom, scen)
    powers = scen.transmit_snr
    F0 = _initial_pointing(geom, scen, cfg)
    report = _alternate(coef, geom, powers, F0, cfg, cfg.beamformer)

    warm = (cfg.beamformer == "mmse" and cfg.zf_warm_start
            and 1 < scen.num_users <= geom.num_antennas)
    if warm:
        if zf_report is None:
            try:
                zf_report = _alternate(coef, geom, powers, F0, cfg, "zf")
            except RankDeficiencyError:
                zf_report = None
        if zf_report is not None:
            other = _alternate(coef, geom, powers, pointing_matrix(zf_report.final_angles),
                               cfg, "mmse")
            other.start = "zf_warm"
            other.initial_eta = report.initial_eta
            other.wall_time += report.wall_time + zf_report.wall_time
            if other.final_eta > report.final_eta:
                report = other
            else:
                report.wall_time = other.wall_time
    return report


def scheme_sinr(geom, scen, angles=None, beamformer="mmse", isotropic=False, coef=None):
    """Per-user SINR of a fixed deflection matrix (or isotropic elements)."""
    if coef is None:
        coef = path_coefficients(geom, scen)
    if isotropic:
        H = isotropic_channel(coef)
    else:
        angles = normalize_angles(angles, geom.theta_max)
        H = synthesize_channel(coef, pointing_matrix(angles))
    powers = scen.transmit_snr
    V = beamformers(H, beamformer, powers)
    return sinr(H, V, powers)


def evaluate_scheme(geom, scen, angles=None, beamformer="mmse", isotropic=False, coef=None):
    """
    Minimum SINR of a benchmark scheme.

    ``angles`` gives a fixed deflection matrix; with ``isotropic=True`` the
    elements are replaced by unit-gain isotropic radiators and ``angles`` is
    ignored.
    """
    return float(np.min(scheme_sinr(geom, scen, angles, beamformer, isotropic, coef)))
