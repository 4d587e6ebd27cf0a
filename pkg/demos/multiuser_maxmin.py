"""
Four users, three scatterers, 11x11 array: alternating optimization of the
combiners and the element boresights.
"""
# %%
import numpy as np

from rotantenna import ScenarioTemplate, SolverConfig, evaluate_scheme, make_upa, sample_scenario, solve_maxmin
from rotantenna.geometry import random_angles

geom = make_upa(11, 11)
scen = sample_scenario(ScenarioTemplate(num_users=4, num_scatterers=3, transmit_snr_db=60.0), seed=3)
print("users (m):\n", np.round(scen.user_positions, 2))
print("scatterers (m):\n", np.round(scen.scatterer_positions, 2))

# %%
db = lambda x: 10 * np.log10(x)
zf = solve_maxmin(geom, scen, SolverConfig(beamformer="zf"))
mmse = solve_maxmin(geom, scen, SolverConfig(beamformer="mmse"), zf_report=zf)
for r in (zf, mmse):
    print(f"\n{r.beamformer}: {r.status} after {r.iterations} iterations ({r.start} start)")
    print("  min-SINR trace (dB):", np.round(db(r.eta_trace), 3))

# %% [markdown]
# Benchmarks for the same scenario. The random benchmark averages ten draws.

# %%
rng = np.random.default_rng(0)
n = geom.num_antennas
for r in (zf, mmse):
    kind = r.beamformer
    rand = np.mean([evaluate_scheme(geom, scen, random_angles(n, geom.theta_max, rng), kind)
                    for _ in range(10)])
    print(f"{kind:5s} optimized {db(r.final_eta):7.2f} dB | fixed "
          f"{db(evaluate_scheme(geom, scen, np.zeros((n, 2)), kind)):7.2f} | random {db(rand):7.2f}"
          f" | isotropic {db(evaluate_scheme(geom, scen, None, kind, isotropic=True)):7.2f}")

# %%
tilt = np.degrees(mmse.final_angles[:, 0]).reshape(11, 11)
print("\neccentric angles of the MMSE design (deg), z rows by y columns:")
print(np.round(tilt, 1))
