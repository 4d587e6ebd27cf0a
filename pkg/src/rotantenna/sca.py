"""
Successive convex approximation step for the boresight subproblem.

For fixed combiners ``V`` the max-min SINR problem over pointing vectors is
replaced, around an expansion point ``F0``, by the convex program

    maximize    eta
    subject to  ln(P_k Lam_k(F)) >= Om_k(F) + Xi(eta)     for every user k
                f_n[0] >= cos(theta_max)                   for every element n
                ||f_n|| <= 1                               for every element n

where ``Lam_k`` is the first-order expansion of the useful power
``|v_k^H h_k(F)|^2``, ``Om_k`` that of the log interference-plus-noise power
and ``Xi`` the tangent of ``ln(eta)``. The program is solved with a
log-barrier Newton method in the ``3N + 1`` real unknowns.
"""
from dataclasses import dataclass, field
import warnings

import numpy as np
from scipy import linalg

TAYLOR_MODES = ("exact", "paper_literal")


class NegativeProjectionWarning(UserWarning):
    """An expansion point has boresights facing away from some path."""


def path_powers(coef, F):
    """Clamped projections ``x_+^p`` and their derivatives ``p x_+^(p-1)``."""
    p = coef.directivity
    user_proj = np.einsum("nd,nkd->nk", F, coef.user_dirs)
    scat_proj = np.einsum("nd,nqd->nq", F, coef.scatterer_dirs)

    def powers(x):
        pos = x > 0
        xp = np.where(pos, np.maximum(x, 0.0) ** p, 0.0)
        if p == 0:
            dx = np.zeros_like(x)
        else:
            dx = np.where(pos, p * np.maximum(x, 0.0) ** (p - 1), 0.0)
        return xp, dx

    return (*powers(user_proj), *powers(scat_proj), user_proj, scat_proj)


def channel_gradients(coef, F, strict=False):
    """
    Gradient of every channel entry with respect to its element's boresight.

    Returns
    -------
    ndarray, complex, shape (N, K, 3)
        ``out[n, k]`` is ``d h[n, k] / d f_n``.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    _, du, _, ds, up, sp = path_powers(coef, F)
    if np.any(up < 0) or np.any(sp < 0):
        msg = "expansion point has boresights facing away from some paths"
        if strict:
            raise ValueError(msg)
        warnings.warn(msg, NegativeProjectionWarning, stacklevel=2)
    grad = (coef.alpha * du)[..., None] * coef.user_dirs
    if coef.beta.shape[-1]:
        grad = grad + np.einsum("nkq,nq,nqd->nkd", coef.beta, ds, coef.scatterer_dirs)
    return grad


def channel_gradient(coef, F, k, n, strict=False):
    """Complex 3-vector ``d h[n, k] / d f_n`` at pointing matrix ``F``."""
    f = np.atleast_2d(np.asarray(F, dtype=float))[n]
    p = coef.directivity
    up = coef.user_dirs[n, k] @ f
    sp = coef.scatterer_dirs[n] @ f
    if up < 0 or np.any(sp < 0):
        msg = f"element {n} faces away from a path of user {k}"
        if strict:
            raise ValueError(msg)
        warnings.warn(msg, NegativeProjectionWarning, stacklevel=2)
    du = p * up ** (p - 1) if (up > 0 and p > 0) else 0.0
    ds = np.where(sp > 0, p * np.maximum(sp, 0.0) ** max(p - 1, 0), 0.0) if p > 0 else np.zeros_like(sp)
    g = coef.alpha[n, k] * du * coef.user_dirs[n, k]
    if coef.beta.shape[-1]:
        g = g + (coef.beta[n, k] * ds) @ coef.scatterer_dirs[n]
    return g


def count_negative_projections(coef, F):
    up = np.einsum("nd,nkd->nk", F, coef.user_dirs)
    sp = np.einsum("nd,nqd->nq", F, coef.scatterer_dirs)
    return int(np.sum(up < 0) + np.sum(sp < 0))


@dataclass(frozen=True)
class ScaLinearization:
    """
    Affine surrogates built at an expansion point.

    ``signal_grad[k]`` and ``interference_grad[k]`` have shape (N, 3) and hold
    the coefficients of ``f_n - f_n^0`` in ``Lam_k`` and ``Om_k``
    respectively (the latter already divided by ``base_interference[k]``).
    """
    base_signal: np.ndarray
    signal_grad: np.ndarray
    base_interference: np.ndarray
    interference_grad: np.ndarray
    expansion_point: np.ndarray
    eta_ref: float
    powers: np.ndarray
    taylor_mode: str = "exact"
    negative_projections: int = 0

    @property
    def num_users(self):
        return self.base_signal.shape[0]

    def signal(self, F):
        """``Lam_k(F)`` for every user."""
        dF = np.asarray(F) - self.expansion_point
        return self.base_signal + np.einsum("knd,nd->k", self.signal_grad, dF)

    def log_interference(self, F):
        """``Om_k(F)`` for every user."""
        dF = np.asarray(F) - self.expansion_point
        return np.log(self.base_interference) + np.einsum("knd,nd->k", self.interference_grad, dF)

    def log_eta(self, eta):
        """Tangent upper bound ``Xi(eta)`` of ``ln(eta)``."""
        return np.log(self.eta_ref) + eta / self.eta_ref - 1.0

    def margins(self, F, eta):
        """Slack of the surrogate SINR constraints (non-negative when feasible)."""
        lam = self.signal(F)
        with np.errstate(divide="ignore", invalid="ignore"):
            lhs = np.where(lam > 0, np.log(self.powers * np.where(lam > 0, lam, 1.0)), -np.inf)
        return lhs - self.log_interference(F) - self.log_eta(eta)


def build_linearization(coef, V, F0, eta_ref, powers, taylor_mode="exact"):
    """
    Taylor surrogates of the SINR constraints at ``(F0, eta_ref)``.

    ``taylor_mode='exact'`` uses the true first-order expansion of
    ``|a(F)|^2``, whose gradient is ``2 Re{conj(a) da}``; ``'paper_literal'``
    drops the factor 2 on the linear term.
    """
    if not eta_ref > 0:
        raise ValueError("eta_ref must be positive")
    if taylor_mode not in TAYLOR_MODES:
        raise ValueError(f"taylor_mode must be one of {TAYLOR_MODES}")
    F0 = np.array(np.atleast_2d(F0), dtype=float)
    V = np.asarray(V, dtype=complex)
    K = V.shape[1]
    powers = np.broadcast_to(np.asarray(powers, dtype=float), (K,)).copy()
    factor = 2.0 if taylor_mode == "exact" else 1.0

    xu, du, xs, ds, _, _ = path_powers(coef, F0)
    H = coef.alpha * xu
    grads = (coef.alpha * du)[..., None] * coef.user_dirs
    if coef.beta.shape[-1]:
        H = H + np.einsum("nkq,nq->nk", coef.beta, xs)
        grads = grads + np.einsum("nkq,nq,nqd->nkd", coef.beta, ds, coef.scatterer_dirs)

    A = V.conj().T @ H                                   # A[k, j] = v_k^H h_j
    # G[k, j, n] = grad wrt f_n of |v_k^H h_j(F)|^2
    G = factor * np.real(np.einsum("kj,nk,njd->kjnd", A.conj(), V.conj(), grads))
    power_sq = np.abs(A) ** 2
    idx = np.arange(K)
    base_signal = power_sq[idx, idx].copy()
    signal_grad = G[idx, idx].copy()

    weights = np.broadcast_to(powers[None, :], (K, K)).copy()
    weights[idx, idx] = 0.0
    base_interference = (weights * power_sq).sum(axis=1) + 1.0
    interference_grad = (np.einsum("kj,kjnd->knd", weights, G)
                         / base_interference[:, None, None])
    return ScaLinearization(base_signal, signal_grad, base_interference,
                            interference_grad, F0, float(eta_ref), powers,
                            taylor_mode, count_negative_projections(coef, F0))


@dataclass(frozen=True)
class BarrierConfig:
    """
    Log-barrier settings.

    The barrier weight ``mu`` runs geometrically from ``mu_start`` down to
    ``mu_end``; each stage is centered with damped Newton steps.
    """
    mu_start: float = 1.0
    mu_end: float = 1e-8
    mu_factor: float = 10.0
    newton_tol: float = 1e-10
    max_newton: int = 500
    shrink: float = 0.9
    start_slack: float = 1.0
    line_alpha: float = 0.25
    line_beta: float = 0.5


@dataclass
class SubproblemSolution:
    F: np.ndarray
    eta: float
    status: str
    newton_steps: int = 0
    duality_gap: float = 0.0
    residuals: dict = field(default_factory=dict)


class _Barrier:
    """Barrier objective for the scaled variable ``s = eta / eta_ref``."""

    def __init__(self, lin, cos_max):
        self.lin = lin
        self.cos_max = cos_max
        self.K = lin.num_users
        self.N = lin.expansion_point.shape[0]
        self.g = lin.signal_grad.reshape(self.K, -1)
        self.w = lin.interference_grad.reshape(self.K, -1)
        self.f0 = lin.expansion_point.ravel()
        self.lam0 = lin.base_signal
        self.om0 = np.log(lin.base_interference)
        self.logp = np.log(lin.powers)
        self.log_eta_ref = np.log(lin.eta_ref)

    @property
    def num_constraints(self):
        return 2 * self.K + 2 * self.N

    def parts(self, x):
        f, s = x[:-1], x[-1]
        df = f - self.f0
        lam = self.lam0 + self.g @ df
        with np.errstate(divide="ignore", invalid="ignore"):
            c = (np.log(np.where(lam > 0, lam, np.nan)) + self.logp
                 - self.om0 - self.w @ df - (self.log_eta_ref + s - 1.0))
        F = f.reshape(self.N, 3)
        a = F[:, 0] - self.cos_max
        b = 1.0 - np.einsum("nd,nd->n", F, F)
        return lam, c, a, b

    def feasible(self, x):
        lam, c, a, b = self.parts(x)
        return (np.all(lam > 0) and np.all(np.isfinite(c)) and np.all(c > 0)
                and np.all(a > 0) and np.all(b > 0))

    def value(self, x, t):
        lam, c, a, b = self.parts(x)
        return (-t * x[-1] - np.sum(np.log(c)) - np.sum(np.log(lam))
                - np.sum(np.log(a)) - np.sum(np.log(b)))

    def derivatives(self, x, t):
        lam, c, a, b = self.parts(x)
        N, K = self.N, self.K
        n3 = 3 * N
        F = x[:-1].reshape(N, 3)

        gl = self.g / lam[:, None]                     # grad of ln(lam_k)
        jc = np.empty((K, n3 + 1))
        jc[:, :-1] = gl - self.w
        jc[:, -1] = -1.0
        jc_scaled = jc / c[:, None]

        grad = -jc_scaled.sum(axis=0)
        grad[:-1] -= gl.sum(axis=0)
        grad[-1] -= t
        grad[0:n3:3] -= 1.0 / a
        grad[:-1] += (2.0 * F / b[:, None]).ravel()

        glc = gl / np.sqrt(c)[:, None]
        low = np.zeros((3 * K, n3 + 1))
        low[:K] = jc_scaled
        low[K:2 * K, :-1] = glc
        low[2 * K:, :-1] = gl
        hess = low.T @ low
        blocks = (2.0 / b)[:, None, None] * np.eye(3) \
            + (4.0 / b ** 2)[:, None, None] * np.einsum("ni,nj->nij", F, F)
        blocks[:, 0, 0] += 1.0 / a ** 2
        rows, cols = self._block_index
        hess[rows, cols] += blocks.ravel()
        return grad, hess

    @property
    def _block_index(self):
        if not hasattr(self, "_bidx"):
            base = 3 * np.arange(self.N)[:, None, None]
            r = base + np.arange(3)[None, :, None]
            c = base + np.arange(3)[None, None, :]
            self._bidx = (np.broadcast_to(r, (self.N, 3, 3)).ravel(),
                          np.broadcast_to(c, (self.N, 3, 3)).ravel())
        return self._bidx


def _interior_start(barrier, lin, cfg):
    cos_max = barrier.cos_max
    center = np.array([(1.0 + cos_max) / 2.0, 0.0, 0.0])
    F0 = lin.expansion_point
    shrink = cfg.shrink
    for _ in range(8):
        Fs = center + shrink * (F0 - center)
        lam = lin.signal(Fs)
        if np.all(lam > 0):
            bound = np.log(lin.powers * lam) - lin.log_interference(Fs) - np.log(lin.eta_ref) + 1.0
            s0 = float(np.min(bound)) - cfg.start_slack
            x = np.concatenate([Fs.ravel(), [s0]])
            if barrier.feasible(x):
                return x
        shrink = 1.0 - (1.0 - shrink) / 10.0
    return None


def _max_step(barrier, x, dx):
    """Largest step keeping the affine and ball constraints strictly feasible."""
    N = barrier.N
    F = x[:-1].reshape(N, 3)
    dF = dx[:-1].reshape(N, 3)
    limit = np.inf
    lam_rate = barrier.g @ dx[:-1]
    lam = barrier.lam0 + barrier.g @ (x[:-1] - barrier.f0)
    shrinking = lam_rate < 0
    if np.any(shrinking):
        limit = min(limit, np.min(-lam[shrinking] / lam_rate[shrinking]))
    a = F[:, 0] - barrier.cos_max
    down = dF[:, 0] < 0
    if np.any(down):
        limit = min(limit, np.min(-a[down] / dF[down, 0]))
    # ||f + t d||^2 = 1 along each row: positive root of A t^2 + B t - C = 0
    A = np.einsum("nd,nd->n", dF, dF)
    B = 2.0 * np.einsum("nd,nd->n", F, dF)
    C = 1.0 - np.einsum("nd,nd->n", F, F)
    moving = A > 0
    if np.any(moving):
        root = (2.0 * C[moving]) / (B[moving] + np.sqrt(B[moving] ** 2 + 4.0 * A[moving] * C[moving]))
        limit = min(limit, np.min(root))
    return limit


def _newton_center(barrier, x, t, cfg):
    steps = 0
    decrement = np.inf
    for _ in range(cfg.max_newton):
        grad, hess = barrier.derivatives(x, t)
        try:
            cho = linalg.cho_factor(hess, lower=True, check_finite=False)
            dx = -linalg.cho_solve(cho, grad, check_finite=False)
        except linalg.LinAlgError:
            dx = -np.linalg.lstsq(hess, grad, rcond=None)[0]
        decrement = float(-grad @ dx)
        if decrement / 2.0 <= cfg.newton_tol:
            return x, steps, decrement, True
        fx = barrier.value(x, t)
        step = min(1.0, 0.99 * _max_step(barrier, x, dx))
        slope = grad @ dx
        while True:
            xn = x + step * dx
            if barrier.feasible(xn) and barrier.value(xn, t) <= fx + cfg.line_alpha * step * slope:
                break
            step *= cfg.line_beta
            if step < 1e-14:
                # no representable progress left: accept if already near-centered
                return x, steps, decrement, decrement < 1e-6
        x = xn
        steps += 1
    return x, steps, decrement, False


def solve_subproblem(lin, theta_max, config=None):
    """
    Maximize ``eta`` over the convex surrogate program around ``lin``.

    Returns the relaxed pointing matrix (rows inside the unit ball) and the
    surrogate-optimal ``eta``. The expansion point itself is always
    feasible, so the returned ``eta`` never falls below ``lin.eta_ref``.
    """
    cfg = config or BarrierConfig()
    barrier = _Barrier(lin, float(np.cos(theta_max)))
    previous = SubproblemSolution(lin.expansion_point.copy(), lin.eta_ref, "optimal")
    if theta_max <= 0:
        return previous
    x = _interior_start(barrier, lin, cfg)
    if x is None:
        previous.status = "infeasible-guard"
        return previous

    t = 1.0 / cfg.mu_start
    t_end = 1.0 / cfg.mu_end
    total = 0
    status = "optimal"
    decrement = 0.0
    while True:
        x, steps, decrement, ok = _newton_center(barrier, x, t, cfg)
        total += steps
        if not ok:
            status = "max_iter"
        if t >= t_end * (1 - 1e-12):
            break
        t = min(t * cfg.mu_factor, t_end)

    lam, c, a, b = barrier.parts(x)
    residuals = {
        "newton_decrement": decrement,
        "min_signal": float(lam.min()),
        "min_sinr_margin": float(c.min()),
        "min_cap_margin": float(a.min()),
        "min_ball_margin": float(b.min()),
    }
    gap = barrier.num_constraints / t
    s = float(x[-1])
    if not np.all(np.isfinite(x)) or not barrier.feasible(x):
        previous.status = "infeasible-guard"
        previous.residuals = residuals
        return previous
    if s < 1.0:
        previous.newton_steps = total
        previous.duality_gap = gap
        previous.residuals = residuals
        previous.status = status
        return previous
    F = x[:-1].reshape(-1, 3)
    return SubproblemSolution(F, s * lin.eta_ref, status, total, gap * lin.eta_ref, residuals)


def renormalize(F):
    """Scale every boresight row back onto the unit sphere."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    norms = np.linalg.norm(F, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot renormalize a zero pointing vector")
    return F / norms
