"""
Cross-checks against the brute-force oracles on tiny problems.
"""
# %%
import numpy as np

from rotantenna import ScenarioTemplate, SolverConfig, make_upa, sample_scenario, solve_maxmin
from rotantenna.channel import path_coefficients, synthesize_channel
from rotantenna.geometry import pointing_matrix, random_angles
from rotantenna.oracle import GridSpec, grid_search_angles, literal_channel

# %% [markdown]
# One element, two users: the exhaustive 61 x 121 angle grid against the
# alternating optimizer.

# %%
geom = make_upa(1, 1)
for seed in range(3):
    azi = np.random.default_rng(seed).uniform(-np.pi / 2, np.pi / 2, 2)
    scen = sample_scenario(ScenarioTemplate(2, 0, 50.0, 30.0, tuple(azi)), seed)
    angles, best = grid_search_angles(geom, scen, "mmse", GridSpec(61, 121))
    rep = solve_maxmin(geom, scen, SolverConfig(beamformer="mmse"))
    print(f"seed {seed}: grid {best:.5e} at {np.degrees(angles[0]).round(1)} deg, "
          f"optimizer {rep.final_eta:.5e} at {np.degrees(rep.final_angles[0]).round(1)} deg")

# %% [markdown]
# The factored channel against a literal per-link Friis computation.

# %%
geom = make_upa(3, 3)
scen = sample_scenario(ScenarioTemplate(3, 3, 50.0, 30.0), 1)
ang = random_angles(9, geom.theta_max, np.random.default_rng(1))
H = synthesize_channel(path_coefficients(geom, scen), pointing_matrix(ang))
L = literal_channel(geom, scen, ang)
print("max |H - H_literal| / |H_literal| =", np.max(np.abs(H - L) / np.abs(L)))
