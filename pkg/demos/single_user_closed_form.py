"""
Single user in free space: how much does turning each element help?

Run with ``python demos/single_user_closed_form.py``.
"""
# %%
import numpy as np

from rotantenna.closed_form import solve_single_user, snr_single_user
from rotantenna.geometry import make_upa

pbar = 10 ** (30 / 10)
user = np.array([50.0, 0.0, 0.0])

# %% [markdown]
# A user straight in front of the array. Small arrays gain nothing from
# rotation because every element already faces the user; the benefit grows
# with the aperture as edge elements see the user further off boresight.

# %%
print(" n_bar   optimal dB  fixed dB  bound dB")
for n_bar in (1, 51, 101, 201, 301, 501):
    geom = make_upa(n_bar, n_bar)
    sol = solve_single_user(geom, user, pbar)
    fixed = snr_single_user(geom, user, np.zeros((geom.num_antennas, 2)), pbar)
    print(f"{n_bar:6d} {10 * np.log10(sol.snr):12.3f} {10 * np.log10(fixed):9.3f}"
          f" {10 * np.log10(sol.snr_upper_bound):9.3f}")

# %% [markdown]
# Moving the user around the half circle: fixed elements lose gain as
# cos^(2p) of the azimuth, rotated elements only lose what exceeds the
# eccentric limit of 30 degrees.

# %%
geom = make_upa(101, 101)
print("\n azimuth  optimal dB  fixed dB")
for deg in (0, 15, 30, 45, 60, 75):
    phi = np.radians(deg)
    u = 50.0 * np.array([np.cos(phi), np.sin(phi), 0.0])
    sol = solve_single_user(geom, u, pbar)
    fixed = snr_single_user(geom, u, np.zeros((geom.num_antennas, 2)), pbar)
    print(f"{deg:8d} {10 * np.log10(sol.snr):11.3f} {10 * np.log10(fixed):9.3f}")
