"""
Linear receive beamformers (MRC, ZF, MMSE) and uplink SINR evaluation.

Channels are stored column-wise: ``H[:, k]`` is the channel of user ``k``.
Beamformers follow the same layout and are unit-norm with a fixed global
phase (first non-negligible entry real and non-negative).
"""
import numpy as np
from scipy import linalg


class RankDeficiencyError(np.linalg.LinAlgError):
    """Interfering channels are (numerically) linearly dependent."""


RANK_RTOL = 1e-12


def _fix_phase(v):
    mag = np.abs(v)
    idx = np.argmax(mag > RANK_RTOL * mag.max())
    return v * (np.conj(v[idx]) / mag[idx])


def _as_channel(H):
    H = np.asarray(H, dtype=complex)
    if H.ndim == 1:
        H = H[:, None]
    if H.ndim != 2:
        raise ValueError("channel matrix must be two-dimensional (N, K)")
    return H


def _as_powers(powers, k):
    powers = np.broadcast_to(np.asarray(powers, dtype=float), (k,))
    if np.any(powers < 0):
        raise ValueError("powers must be non-negative")
    return powers


def sinr(H, V, powers):
    """
    Per-user SINR ``P_k |v_k^H h_k|^2 / (sum_{j != k} P_j |v_k^H h_j|^2 + 1)``.

    Parameters
    ----------
    H : complex ndarray, shape (N, K)
    V : complex ndarray, shape (N, K)
    powers : array_like, shape (K,)
        Linear transmit SNRs.
    """
    H = _as_channel(H)
    V = _as_channel(V)
    if H.shape != V.shape:
        raise ValueError(f"channel {H.shape} and beamformer {V.shape} shapes differ")
    powers = _as_powers(powers, H.shape[1])
    G = np.abs(V.conj().T @ H) ** 2 * powers[None, :]
    signal = np.diag(G).copy()
    interference = G.sum(axis=1) - signal
    return signal / (interference + 1.0)


def min_sinr(H, V, powers):
    return float(np.min(sinr(H, V, powers)))


def mrc(h):
    """Maximum-ratio combiner ``h / ||h||``."""
    h = np.asarray(h, dtype=complex).ravel()
    nrm = np.linalg.norm(h)
    if nrm == 0:
        raise ValueError("MRC undefined for a zero channel")
    return _fix_phase(h / nrm)


def _others(H, k):
    return np.delete(H, k, axis=1)


def zf(H, k):
    """
    Zero-forcing combiner for user ``k``.

    Projects ``h_k`` onto the orthogonal complement of the other users'
    channels and normalizes.
    """
    H = _as_channel(H)
    n, K = H.shape
    if not 0 <= k < K:
        raise IndexError(f"user index {k} out of range for K={K}")
    if K > n:
        raise RankDeficiencyError(f"zero forcing needs N >= K (N={n}, K={K})")
    h = H[:, k]
    Hb = _others(H, k)
    if Hb.shape[1]:
        U, s, _ = np.linalg.svd(Hb, full_matrices=False)
        if s[-1] <= RANK_RTOL * s[0] or s[0] == 0:
            raise RankDeficiencyError(f"interferers of user {k} are rank deficient")
        proj = h - U @ (U.conj().T @ h)
        # second pass removes residual leakage from the first projection
        proj = proj - U @ (U.conj().T @ proj)
    else:
        proj = h
    nrm = np.linalg.norm(proj)
    if nrm <= RANK_RTOL * max(np.linalg.norm(h), np.finfo(float).tiny):
        raise RankDeficiencyError(f"channel of user {k} lies in the span of its interferers")
    return _fix_phase(proj / nrm)


def _woodbury_core(Hb, pb):
    # (P^-1 + Hb^H Hb)^-1 = S (I + S Hb^H Hb S)^-1 S with S = sqrt(P); stays finite as P -> 0
    s = np.sqrt(pb)
    M = np.eye(len(pb)) + (s[:, None] * (Hb.conj().T @ Hb)) * s[None, :]
    try:
        cho = linalg.cho_factor(M, lower=True)
    except linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("Woodbury core matrix is not positive definite") from exc
    return s, cho


def mmse_woodbury_inverse(Hb, powers):
    """
    Inverse interference-plus-noise covariance via the Woodbury identity.

    Computes ``(I + Hb P Hb^H)^-1 = I - Hb (P^-1 + Hb^H Hb)^-1 Hb^H`` where
    ``Hb`` holds the interfering channels as columns, only factoring a
    ``(K-1) x (K-1)`` matrix.
    """
    Hb = _as_channel(Hb)
    pb = _as_powers(powers, Hb.shape[1])
    s, cho = _woodbury_core(Hb, pb)
    X = linalg.cho_solve(cho, s[:, None] * Hb.conj().T)
    return np.eye(Hb.shape[0]) - Hb @ (s[:, None] * X)


def interference_covariance(H, k, powers):
    """``C_k = sum_{j != k} P_j h_j h_j^H + I`` built directly."""
    H = _as_channel(H)
    powers = _as_powers(powers, H.shape[1])
    Hb = _others(H, k)
    pb = np.delete(powers, k)
    return (Hb * pb[None, :]) @ Hb.conj().T + np.eye(H.shape[0])


def mmse(H, k, powers):
    """
    MMSE combiner ``C_k^-1 h_k / ||C_k^-1 h_k||`` for user ``k``.

    Maximizes the SINR of user ``k`` over all unit vectors.
    """
    H = _as_channel(H)
    K = H.shape[1]
    if not 0 <= k < K:
        raise IndexError(f"user index {k} out of range for K={K}")
    powers = _as_powers(powers, K)
    h = H[:, k]
    if K == 1:
        return mrc(h)
    Hb = _others(H, k)
    s, cho = _woodbury_core(Hb, np.delete(powers, k))
    x = h - Hb @ (s * linalg.cho_solve(cho, s * (Hb.conj().T @ h)))
    return mrc(x)


def beamformers(H, kind, powers=None):
    """Stack of per-user combiners of the given ``kind`` ('mrc', 'zf', 'mmse')."""
    H = _as_channel(H)
    K = H.shape[1]
    if kind == "mmse":
        cols = [mmse(H, k, powers) for k in range(K)]
    elif kind == "zf":
        cols = [zf(H, k) for k in range(K)]
    elif kind == "mrc":
        cols = [mrc(H[:, k]) for k in range(K)]
    else:
        raise ValueError(f"unknown beamformer kind {kind!r}")
    return np.column_stack(cols)
