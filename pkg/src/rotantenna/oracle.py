"""
Independent reference computations used to cross-check the solvers.

Nothing here shares a code path with :mod:`rotantenna.channel`,
:mod:`rotantenna.beamforming` or :mod:`rotantenna.sca` beyond numpy
primitives and the element gain pattern: channels are rebuilt from
elevation angles and Friis power gains, and optimal SINRs come from their
closed forms rather than from explicit combiners.
"""
from dataclasses import dataclass

import numpy as np

from .channel import gain_pattern


class BudgetExceededError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Per-element angle grid: eccentric in ``[0, theta_max]``, azimuth in ``[0, 2pi)``."""
    eccentric_steps: int = 61
    azimuth_steps: int = 121
    theta_max: float | None = None

    def __post_init__(self):
        if self.eccentric_steps < 2 or self.azimuth_steps < 2:
            raise ValueError("grid needs at least two steps per axis")

    def points(self, theta_max):
        tm = theta_max if self.theta_max is None else self.theta_max
        ecc = np.linspace(0.0, tm, self.eccentric_steps)
        azi = np.linspace(0.0, 2 * np.pi, self.azimuth_steps, endpoint=False)
        E, A = np.meshgrid(ecc, azi, indexing="ij")
        return np.column_stack([E.ravel(), A.ravel()])


def _boresight(ecc, azi):
    # written out directly rather than via geometry.pointing_vector
    ecc = np.asarray(ecc, dtype=float)
    azi = np.asarray(azi, dtype=float)
    return np.stack([np.cos(ecc), np.sin(ecc) * np.sin(azi), np.sin(ecc) * np.cos(azi)], axis=-1)


def _off_boresight(f, src, dst):
    diff = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
    dist = np.sqrt(np.sum(diff ** 2))
    cosang = np.clip(f @ (diff / dist), -1.0, 1.0)
    return np.arccos(cosang), dist


def _element_entries(geom, scen, n, F):
    """Literal channel of element ``n`` for boresight rows ``F`` (shape (G, 3)) -> (G, K)."""
    lam = geom.wavelength
    p = geom.directivity
    w = geom.positions[n]
    out = np.zeros((F.shape[0], scen.num_users), dtype=complex)
    for k, user in enumerate(scen.user_positions):
        eps, r = _off_boresight(F, w, user)
        g = (lam / (4 * np.pi * r)) ** 2 * gain_pattern(eps, p)
        out[:, k] = np.sqrt(g) * np.exp(-1j * 2 * np.pi / lam * r)
        for q, scat in enumerate(scen.scatterer_positions):
            eps_s, d = _off_boresight(F, w, scat)
            m = (lam / (4 * np.pi * d)) ** 2 * gain_pattern(eps_s, p)
            t = np.sqrt(np.sum((user - scat) ** 2))
            out[:, k] += (np.sqrt(scen.rcs[q] * m) / t
                          * np.exp(-1j * 2 * np.pi / lam * (d + t) + 1j * scen.phases[q]))
    return out


def literal_channel(geom, scen, angles):
    """
    Channel matrix rebuilt from per-link Friis gains and path phases.

    Parameters
    ----------
    angles : array_like, shape (N, 2)
        Deflection matrix (eccentric, azimuth).
    """
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    H = np.zeros((geom.num_antennas, scen.num_users), dtype=complex)
    for n in range(geom.num_antennas):
        f = _boresight(angles[n, 0], angles[n, 1])[None, :]
        H[n] = _element_entries(geom, scen, n, f)[0]
    return H


def optimal_sinr_batch(H, powers, kind="mmse"):
    """
    SINR of every user under the best combiner of ``kind``, batched.

    ``H`` has shape (B, N, K). MMSE uses ``P_k h_k^H C_k^-1 h_k``; ZF uses
    ``P_k / [(H^H H)^-1]_kk``.
    """
    H = np.asarray(H, dtype=complex)
    B, N, K = H.shape
    powers = np.broadcast_to(np.asarray(powers, dtype=float), (K,))
    out = np.empty((B, K))
    if kind == "mmse":
        R = np.einsum("bnk,k,bmk->bnm", H, powers, H.conj()) + np.eye(N)
        for k in range(K):
            hk = H[:, :, k]
            Ck = R - powers[k] * np.einsum("bn,bm->bnm", hk, hk.conj())
            x = np.linalg.solve(Ck, hk[..., None])[..., 0]
            out[:, k] = powers[k] * np.real(np.einsum("bn,bn->b", hk.conj(), x))
    elif kind == "zf":
        if K > N:
            raise ValueError("zero forcing needs N >= K")
        G = np.einsum("bnk,bnj->bkj", H.conj(), H)
        with np.errstate(all="ignore"):
            inv_diag = np.real(np.diagonal(np.linalg.inv(G), axis1=1, axis2=2))
            out[:] = np.where(inv_diag > 0, powers[None, :] / inv_diag, 0.0)
    else:
        raise ValueError(f"unknown beamformer kind {kind!r}")
    return out


def grid_search_angles(geom, scen, beamformer="mmse", grid=None, budget=2_000_000,
                       batch=20_000):
    """
    Exhaustive max-min SINR search over a per-element angle grid.

    Returns
    -------
    best_angles : ndarray, shape (N, 2)
    best_eta : float
    """
    grid = grid or GridSpec()
    pts = grid.points(geom.theta_max)
    G = pts.shape[0]
    N = geom.num_antennas
    total = float(G) ** N
    if total > budget:
        raise BudgetExceededError(f"{G}^{N} grid points exceed the budget of {budget}")
    F = _boresight(pts[:, 0], pts[:, 1])
    tables = [_element_entries(geom, scen, n, F) for n in range(N)]
    best_eta, best_idx = -np.inf, None
    total = int(total)
    for start in range(0, total, batch):
        flat = np.arange(start, min(start + batch, total))
        idx = np.unravel_index(flat, (G,) * N)
        H = np.stack([tables[n][idx[n]] for n in range(N)], axis=1)
        eta = optimal_sinr_batch(H, scen.transmit_snr, beamformer).min(axis=1)
        j = int(np.argmax(eta))
        if eta[j] > best_eta:
            best_eta = float(eta[j])
            best_idx = [int(i[j]) for i in idx]
    return pts[best_idx], best_eta


def finite_difference_gradient(fn, point, step=1e-6):
    """Central-difference gradient of ``fn`` (real or complex valued) at ``point``."""
    if not step > 0:
        raise ValueError("step must be positive")
    point = np.asarray(point, dtype=float)
    vals = []
    for i in range(point.size):
        e = np.zeros_like(point)
        e.flat[i] = step
        vals.append((np.asarray(fn(point + e)) - np.asarray(fn(point - e))) / (2 * step))
    return np.array(vals).reshape(point.shape + np.shape(vals[0]))
