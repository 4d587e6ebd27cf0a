"""
Array layout and boresight algebra for rotatable antennas.

Every element has a fixed reference position and a boresight that can be
tilted away from the +x axis by an eccentric angle and rotated about that
axis by an azimuth angle (measured in the y-z plane from +z toward +y).

Conventions
-----------
Deflection angles for a whole array are stored as an ``(N, 2)`` array whose
columns are ``(eccentric, azimuth)`` in radians. Pointing vectors for a whole
array are stored row-wise as an ``(N, 3)`` array.
"""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * np.pi
UNIT_TOL = 1e-9


class DeflectionAngles(NamedTuple):
    """Eccentric and azimuth deflection of a single element (radians)."""
    eccentric: float
    azimuth: float


@dataclass(frozen=True)
class ArrayGeometry:
    """
    Positions and radiation parameters of an array of rotatable antennas.

    Parameters
    ----------
    positions : array_like, shape (N, 3)
        Reference positions in meters.
    wavelength : float
        Carrier wavelength in meters.
    directivity : int
        Exponent ``p`` of the ``cos^(2p)`` gain pattern.
    theta_max : float
        Largest eccentric angle any element may take, in ``[0, pi/2]``.
    """
    positions: np.ndarray
    wavelength: float = 0.125
    directivity: int = 4
    theta_max: float = np.pi / 6
    spacing: float | None = field(default=None, compare=False)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos.reshape(1, 3)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ValueError("positions must have shape (N, 3) with N >= 1")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if len(np.unique(pos, axis=0)) != len(pos):
            raise ValueError("antenna positions must be distinct")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        if self.directivity < 0 or int(self.directivity) != self.directivity:
            raise ValueError("directivity exponent must be a non-negative integer")
        if not 0.0 <= self.theta_max <= np.pi / 2:
            raise ValueError("theta_max must lie in [0, pi/2]")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "directivity", int(self.directivity))
        object.__setattr__(self, "theta_max", float(self.theta_max))
        object.__setattr__(self, "wavelength", float(self.wavelength))

    @property
    def num_antennas(self):
        return self.positions.shape[0]

    @property
    def peak_gain(self):
        """Boresight gain ``G0 = 2(2p + 1)``."""
        return 2.0 * (2 * self.directivity + 1)

    def with_theta_max(self, theta_max):
        return ArrayGeometry(self.positions, self.wavelength, self.directivity,
                             theta_max, self.spacing)


def upa_positions(ny, nz, spacing):
    """Element positions of a centered ``ny x nz`` planar array on the y-z plane.

    Elements are ordered with the y index running fastest.
    """
    for name, n in (("ny", ny), ("nz", nz)):
        if int(n) != n or n < 1 or n % 2 == 0:
            raise ValueError(f"{name} must be an odd positive integer, got {n}")
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    iy = np.arange(ny) - (ny - 1) // 2
    iz = np.arange(nz) - (nz - 1) // 2
    zz, yy = np.meshgrid(iz, iy, indexing="ij")
    pos = np.zeros((ny * nz, 3))
    pos[:, 1] = yy.ravel() * spacing
    pos[:, 2] = zz.ravel() * spacing
    return pos


def make_upa(ny, nz, spacing=None, wavelength=0.125, directivity=4,
             theta_max=np.pi / 6):
    """
    Build a uniform planar array centered at the origin.

    Parameters
    ----------
    ny, nz : int
        Odd numbers of elements along y and z.
    spacing : float, optional
        Element spacing in meters; half a wavelength when omitted.

    Returns
    -------
    ArrayGeometry
    """
    if spacing is None:
        spacing = wavelength / 2
    return ArrayGeometry(upa_positions(ny, nz, spacing), wavelength,
                         directivity, theta_max, spacing=float(spacing))


def pointing_vector(eccentric, azimuth):
    """
    Unit boresight vector for the given deflection angles.

    Broadcasts over array inputs; the trailing output axis has length 3.
    """
    ecc = np.asarray(eccentric, dtype=float)
    azi = np.asarray(azimuth, dtype=float)
    s = np.sin(ecc)
    return np.stack(np.broadcast_arrays(np.cos(ecc), s * np.sin(azi),
                                        s * np.cos(azi)), axis=-1)


def pointing_matrix(angles):
    """Row-wise pointing vectors for an ``(N, 2)`` deflection matrix."""
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    return pointing_vector(angles[:, 0], angles[:, 1])


def recover_angles(f, tol=UNIT_TOL):
    """
    Invert :func:`pointing_vector`.

    Parameters
    ----------
    f : array_like, shape (..., 3)
        Unit vectors in the front hemisphere (non-negative x component).

    Returns
    -------
    eccentric, azimuth : ndarray
        Azimuth is wrapped to ``[0, 2pi)`` and defined as 0 on the boresight
        axis where it is otherwise arbitrary.
    """
    f = np.asarray(f, dtype=float)
    norms = np.linalg.norm(f, axis=-1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise ValueError("pointing vectors must have unit norm")
    if np.any(f[..., 0] < -tol):
        raise ValueError("pointing vectors must lie in the front hemisphere")
    eccentric = np.arccos(np.clip(f[..., 0], -1.0, 1.0))
    azimuth = np.arctan2(f[..., 1], f[..., 2])
    on_axis = (f[..., 1] == 0) & (f[..., 2] == 0)
    azimuth = np.where(on_axis, 0.0, np.mod(azimuth, TWO_PI))
    # np.mod can return exactly 2pi for tiny negative inputs
    azimuth = np.where(azimuth >= TWO_PI, 0.0, azimuth)
    return eccentric, azimuth


def angles_from_pointing(F, tol=UNIT_TOL):
    """Deflection matrix ``(N, 2)`` for row-wise pointing vectors."""
    ecc, azi = recover_angles(F, tol=tol)
    return np.column_stack([np.atleast_1d(ecc), np.atleast_1d(azi)])


def direction_vector(origin, target):
    """Unit vector from ``origin`` toward ``target`` (broadcasting)."""
    diff = np.asarray(target, dtype=float) - np.asarray(origin, dtype=float)
    dist = np.linalg.norm(diff, axis=-1, keepdims=True)
    if np.any(dist == 0):
        raise ValueError("direction undefined for coincident points")
    return diff / dist


def normalize_angles(angles, theta_max=None):
    """Wrap azimuths to ``[0, 2pi)`` and validate eccentric angles."""
    angles = np.array(np.atleast_2d(angles), dtype=float)
    if angles.shape[-1] != 2:
        raise ValueError("deflection matrix must have shape (N, 2)")
    if np.any(angles[:, 0] < 0):
        raise ValueError("eccentric angles must be non-negative")
    if theta_max is not None and np.any(angles[:, 0] > theta_max + 1e-12):
        raise ValueError("eccentric angle exceeds theta_max")
    angles[:, 1] = np.mod(angles[:, 1], TWO_PI)
    angles[:, 1] = np.where(angles[:, 1] >= TWO_PI, 0.0, angles[:, 1])
    return angles


def zero_angles(n):
    """Reference deflection (all boresights along +x)."""
    return np.zeros((n, 2))


def random_angles(n, theta_max, rng):
    """Uniform eccentric angles on ``[0, theta_max]`` and azimuths on ``[0, 2pi)``."""
    ecc = rng.uniform(0.0, theta_max, size=n)
    azi = rng.uniform(0.0, TWO_PI, size=n)
    return np.column_stack([ecc, azi])
