"""Max-min SINR design for uplink arrays of rotatable directional antennas."""
__version__ = "0.1.0"

from .geometry import ArrayGeometry, make_upa, pointing_matrix, recover_angles
from .channel import Scenario, ScenarioTemplate, path_coefficients, sample_scenario, synthesize_channel
from .beamforming import RankDeficiencyError, beamformers, min_sinr, mmse, mrc, sinr, zf
from .closed_form import solve_single_user
from .ao import SolverConfig, SolverReport, evaluate_scheme, solve_maxmin

__all__ = [
    "ArrayGeometry", "make_upa", "pointing_matrix", "recover_angles",
    "Scenario", "ScenarioTemplate", "path_coefficients", "sample_scenario",
    "synthesize_channel", "RankDeficiencyError", "beamformers", "min_sinr", "mmse",
    "mrc", "sinr", "zf", "solve_single_user", "SolverConfig", "SolverReport",
    "evaluate_scheme", "solve_maxmin", "__version__",
]
