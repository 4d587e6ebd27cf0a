"""
Directional gain pattern, Friis power gains and geometric multi-path
channel synthesis for rotatable-antenna arrays.

The channel between user ``k`` and element ``n`` with boresight ``f_n`` is

    h[n, k] = alpha[n, k] * (f_n . q_dir[n, k])_+^p
              + sum_q beta[n, k, q] * (f_n . u_dir[n, q])_+^p

where ``(x)_+ = max(x, 0)`` keeps the zero back lobe of the element pattern.
"""
from dataclasses import dataclass

import numpy as np

from .geometry import direction_vector, pointing_matrix


def peak_gain(p):
    """Boresight gain that makes the ``cos^(2p)`` pattern lossless."""
    return 2.0 * (2 * p + 1)


def gain_pattern(eps, p):
    """
    Element power gain at off-boresight angle ``eps``.

    Returns ``G0 cos^(2p)(eps)`` inside the front hemisphere and 0 elsewhere.
    """
    eps = np.asarray(eps, dtype=float)
    if p < 0:
        raise ValueError("directivity exponent must be non-negative")
    if np.any(eps < 0):
        raise ValueError("off-boresight angle must be non-negative")
    inside = eps < np.pi / 2
    c = np.cos(np.where(inside, eps, 0.0))
    return np.where(inside, peak_gain(p) * c ** (2 * p), 0.0)


def friis_gain(wavelength, distance, eps, p):
    """Free-space power gain ``(lambda / 4 pi r)^2 G_e(eps)`` of one link."""
    return (wavelength / (4 * np.pi * np.asarray(distance))) ** 2 * gain_pattern(eps, p)


def clamped_power(x, p):
    """``max(x, 0)**p`` with the back hemisphere mapped to zero even for p = 0."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, np.maximum(x, 0.0) ** p, 0.0)


@dataclass(frozen=True)
class Scenario:
    """
    Users and scatterers seen by the array.

    ``transmit_snr`` holds the linear per-user transmit SNR (transmit power
    over receiver noise power). Scatterer phases lie in ``[-pi, pi)``.
    """
    user_positions: np.ndarray
    transmit_snr: np.ndarray
    scatterer_positions: np.ndarray = None
    rcs: np.ndarray = None
    phases: np.ndarray = None
    seed: int | None = None

    def __post_init__(self):
        users = np.atleast_2d(np.array(self.user_positions, dtype=float))
        if users.shape[1] != 3 or users.shape[0] < 1:
            raise ValueError("user_positions must have shape (K, 3) with K >= 1")
        snr = np.broadcast_to(np.array(self.transmit_snr, dtype=float),
                              (users.shape[0],)).copy()
        if np.any(~(snr > 0)):
            raise ValueError("transmit SNRs must be positive")
        if self.scatterer_positions is None or len(self.scatterer_positions) == 0:
            scat = np.zeros((0, 3))
            rcs = np.zeros(0)
            phases = np.zeros(0)
        else:
            scat = np.atleast_2d(np.array(self.scatterer_positions, dtype=float))
            q = scat.shape[0]
            rcs = np.ones(q) if self.rcs is None else np.array(self.rcs, dtype=float).reshape(q)
            phases = np.zeros(q) if self.phases is None else np.array(self.phases, dtype=float).reshape(q)
            if np.any(~(rcs > 0)):
                raise ValueError("radar cross sections must be positive")
        if np.any(np.linalg.norm(users[:, None] - scat[None], axis=-1) == 0):
            raise ValueError("users and scatterers must not coincide")
        for name, arr in (("user_positions", users), ("transmit_snr", snr),
                          ("scatterer_positions", scat), ("rcs", rcs),
                          ("phases", phases)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_users(self):
        return self.user_positions.shape[0]

    @property
    def num_scatterers(self):
        return self.scatterer_positions.shape[0]

    def with_transmit_snr(self, snr):
        return Scenario(self.user_positions, snr, self.scatterer_positions,
                        self.rcs, self.phases, self.seed)


@dataclass(frozen=True)
class ScenarioTemplate:
    """
    Recipe for :func:`sample_scenario`.

    Users sit evenly on a half circle of ``radius`` in the ``x > 0`` half of
    the x-y plane unless ``user_azimuths`` pins them explicitly. Scatterers
    are placed at random in the same half disk.
    """
    num_users: int = 1
    num_scatterers: int = 0
    radius: float = 50.0
    transmit_snr_db: float = 30.0
    user_azimuths: tuple | None = None
    rcs_mean: float = 1.0
    rcs_distribution: str = "exponential"
    scatterer_placement: str = "area_uniform"

    def __post_init__(self):
        if self.num_users < 1:
            raise ValueError("num_users must be at least 1")
        if self.num_scatterers < 0:
            raise ValueError("num_scatterers must be non-negative")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not self.rcs_mean > 0:
            raise ValueError("rcs_mean must be positive")
        if self.rcs_distribution not in ("exponential", "constant"):
            raise ValueError(f"unknown rcs_distribution {self.rcs_distribution!r}")
        if self.scatterer_placement not in ("area_uniform", "radius_uniform"):
            raise ValueError(f"unknown scatterer_placement {self.scatterer_placement!r}")
        if self.user_azimuths is not None and len(self.user_azimuths) != self.num_users:
            raise ValueError("user_azimuths must list one angle per user")


def even_azimuths(k):
    """Azimuths of ``k`` users spread evenly over the open half circle."""
    return -np.pi / 2 + (np.arange(k) + 0.5) * np.pi / k


def sample_scenario(template, seed=0):
    """
    Draw a scenario from ``template``.

    Randomness comes from a generator seeded with ``seed`` and is confined to
    the scatterers, so user placement is identical across seeds.
    """
    t = template
    if t.user_azimuths is None:
        azi = even_azimuths(t.num_users)
    else:
        azi = np.asarray(t.user_azimuths, dtype=float)
    users = np.column_stack([t.radius * np.cos(azi), t.radius * np.sin(azi),
                             np.zeros_like(azi)])
    rng = np.random.default_rng([int(seed), 1])
    q = t.num_scatterers
    if t.scatterer_placement == "area_uniform":
        rad = t.radius * np.sqrt(rng.uniform(0.0, 1.0, q))
    else:
        rad = t.radius * rng.uniform(0.0, 1.0, q)
    ang = rng.uniform(-np.pi / 2, np.pi / 2, q)
    scat = np.column_stack([rad * np.cos(ang), rad * np.sin(ang), np.zeros(q)])
    if t.rcs_distribution == "exponential":
        rcs = rng.exponential(t.rcs_mean, q)
    else:
        rcs = np.full(q, t.rcs_mean)
    phases = rng.uniform(-np.pi, np.pi, q)
    snr = np.full(t.num_users, 10.0 ** (t.transmit_snr_db / 10.0))
    return Scenario(users, snr, scat, rcs, phases, seed=int(seed))


@dataclass(frozen=True)
class PathCoefficients:
    """
    Orientation-independent part of every propagation path.

    Attributes
    ----------
    alpha : complex ndarray, shape (N, K)
        Line-of-sight coefficients.
    beta : complex ndarray, shape (N, K, Q)
        Single-bounce scatterer coefficients.
    user_dirs : ndarray, shape (N, K, 3)
        Unit vectors from each element toward each user.
    scatterer_dirs : ndarray, shape (N, Q, 3)
        Unit vectors from each element toward each scatterer.
    """
    alpha: np.ndarray
    beta: np.ndarray
    user_dirs: np.ndarray
    scatterer_dirs: np.ndarray
    directivity: int
    peak_gain: float

    @property
    def shape(self):
        return self.alpha.shape


def path_coefficients(geom, scen):
    """Evaluate LoS and NLoS path coefficients for ``geom`` and ``scen``."""
    lam = geom.wavelength
    g0 = geom.peak_gain
    w = geom.positions
    users = scen.user_positions
    scat = scen.scatterer_positions

    user_dirs = direction_vector(w[:, None, :], users[None, :, :])
    r = np.linalg.norm(users[None, :, :] - w[:, None, :], axis=-1)
    alpha = lam * np.sqrt(g0) / (4 * np.pi * r) * np.exp(-2j * np.pi * r / lam)

    if scen.num_scatterers:
        scat_dirs = direction_vector(w[:, None, :], scat[None, :, :])
        d = np.linalg.norm(scat[None, :, :] - w[:, None, :], axis=-1)
        t = np.linalg.norm(users[:, None, :] - scat[None, :, :], axis=-1)
        amp = (lam * np.sqrt(g0 * scen.rcs)[None, None, :]
               / (4 * np.pi * d[:, None, :] * t[None, :, :]))
        phase = (-2 * np.pi * (d[:, None, :] + t[None, :, :]) / lam
                 + scen.phases[None, None, :])
        beta = amp * np.exp(1j * phase)
    else:
        scat_dirs = np.zeros((w.shape[0], 0, 3))
        beta = np.zeros(alpha.shape + (0,), dtype=complex)
    return PathCoefficients(alpha, beta, user_dirs, scat_dirs,
                            geom.directivity, g0)


def check_unit_rows(F, tol=1e-9):
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if F.shape[-1] != 3:
        raise ValueError("pointing matrix must have shape (N, 3)")
    if np.any(np.abs(np.linalg.norm(F, axis=-1) - 1.0) > tol):
        raise ValueError("pointing vectors must have unit norm")
    return F


def projections(coef, F):
    """Cosines between each boresight and every user/scatterer direction."""
    user_proj = np.einsum("nd,nkd->nk", F, coef.user_dirs)
    scat_proj = np.einsum("nd,nqd->nq", F, coef.scatterer_dirs)
    return user_proj, scat_proj


def channel_from_pointing(coef, F):
    """Channel matrix for arbitrary (not necessarily unit) boresight rows."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    p = coef.directivity
    user_proj, scat_proj = projections(coef, F)
    H = coef.alpha * clamped_power(user_proj, p)
    if coef.beta.shape[-1]:
        H = H + np.einsum("nkq,nq->nk", coef.beta, clamped_power(scat_proj, p))
    return H


def synthesize_channel(coef, F):
    """
    Channel matrix ``H`` of shape (N, K) for unit pointing rows ``F``.

    Column ``k`` is the channel of user ``k``.
    """
    return channel_from_pointing(coef, check_unit_rows(F))


def channel_for_angles(geom, scen, angles, coef=None):
    """Convenience wrapper: geometry, scenario and deflection matrix to ``H``."""
    if coef is None:
        coef = path_coefficients(geom, scen)
    return synthesize_channel(coef, pointing_matrix(angles))


def isotropic_channel(coef):
    """Channel seen by ideal isotropic elements (unit gain in every direction)."""
    scale = 1.0 / np.sqrt(coef.peak_gain)
    return (coef.alpha + coef.beta.sum(axis=-1)) * scale
