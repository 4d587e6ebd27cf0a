"""
Single-user free-space solution.

With one user and no scatterers the MRC combiner is optimal and the SNR
splits into independent per-element terms, so every element simply turns
toward the user as far as its eccentric limit allows.
"""
from dataclasses import dataclass

import numpy as np

from .channel import clamped_power
from .geometry import direction_vector, pointing_matrix


@dataclass(frozen=True)
class SingleUserSolution:
    angles: np.ndarray
    snr: float
    snr_upper_bound: float


def _user_dirs(geom, user_pos):
    return direction_vector(geom.positions, np.asarray(user_pos, dtype=float)[None, :])


def optimal_angles_single_user(geom, user_pos):
    """
    Per-element deflection that maximizes the single-user SNR.

    The azimuth points the boresight toward the user; the eccentric angle
    follows the user direction and is clipped at ``geom.theta_max``.

    Returns
    -------
    ndarray, shape (N, 2)
    """
    q = _user_dirs(geom, user_pos)
    ecc = np.minimum(np.arccos(np.clip(q[:, 0], -1.0, 1.0)), geom.theta_max)
    azi = np.arctan2(q[:, 1], q[:, 2])
    on_axis = (q[:, 1] == 0) & (q[:, 2] == 0)
    azi = np.where(on_axis, 0.0, np.mod(azi, 2 * np.pi))
    azi = np.where(azi >= 2 * np.pi, 0.0, azi)
    return np.column_stack([ecc, azi])


def _snr_scale(geom, pbar):
    return pbar * geom.peak_gain * geom.wavelength ** 2 / (16 * np.pi ** 2)


def snr_single_user(geom, user_pos, angles, pbar):
    """
    Receive SNR with MRC combining for a given deflection matrix.

    ``pbar * G0 lambda^2 / (16 pi^2) * sum_n cos^(2p)(eps_n) / r_n^2`` with the
    cosine clamped at zero behind each element.
    """
    user_pos = np.asarray(user_pos, dtype=float)
    r2 = np.sum((geom.positions - user_pos[None, :]) ** 2, axis=-1)
    cos_eps = np.einsum("nd,nd->n", pointing_matrix(angles), _user_dirs(geom, user_pos))
    gains = clamped_power(cos_eps, geom.directivity) ** 2
    return float(_snr_scale(geom, pbar) * np.sum(gains / r2))


def snr_upper_bound(geom, user_pos, pbar):
    """SNR with every element looking straight at the user (no eccentric limit)."""
    user_pos = np.asarray(user_pos, dtype=float)
    r2 = np.sum((geom.positions - user_pos[None, :]) ** 2, axis=-1)
    if np.any(r2 == 0):
        raise ValueError("user coincides with an antenna")
    return float(_snr_scale(geom, pbar) * np.sum(1.0 / r2))


def solve_single_user(geom, user_pos, pbar):
    angles = optimal_angles_single_user(geom, user_pos)
    return SingleUserSolution(angles, snr_single_user(geom, user_pos, angles, pbar),
                              snr_upper_bound(geom, user_pos, pbar))


def clipping_binds(geom, user_pos):
    """Mask of elements whose toward-user eccentric angle exceeds ``theta_max``."""
    q = _user_dirs(geom, user_pos)
    return np.arccos(np.clip(q[:, 0], -1.0, 1.0)) > geom.theta_max
