"""
Conjugate points of the Jacobi system at a helix with constant strain omega.

Perturbing R(x) exp(xi(x)) gives the second variation

    F(xi) = int <C xi', xi'> + 2 <xi, D xi'> + <B xi, xi>

with A = hat(omega), Omega = hat(C (omega - k e2)),

    D = Omega / 2 - A C
    B = A^T C A + (Omega A + A Omega) / 2
        + f r1 (e2 e2^T + e3 e3^T) - f r2 / 2 (e1 e2^T + e2 e1^T) - f r3 / 2 (e1 e3^T + e3 e1^T)

and Euler-Lagrange equation C xi'' = (D - D^T) xi' + B xi. Writing it as
y' = Gamma y for y = (xi, xi'), M(t) is the upper-right block of exp(Gamma t);
det M(t) = 0 on (0, L] marks a conjugate point.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh, expm
from scipy.optimize import brentq

from config import (
    CONJUGATE_XTOL, DEFAULT_N_GRID, DEFAULT_N_SAMPLES, EIG_TOL, MIN_N_SAMPLES,
    STIFFNESS_GUARD, T_MIN_FRAC,
)
from rodstab.so3 import E2, hat

logger = logging.getLogger(__name__)

VERDICTS = ("stable", "unstable", "marginal")
FLAG_LOW_CONFIDENCE = "low-confidence"
FLAG_DISAGREE = "delta-det-disagree"
FLAG_MARGINAL = "marginal"


@dataclass(eq=False)
class SecondOrderSystem:
    Cmat: np.ndarray
    D: np.ndarray
    B: np.ndarray
    Gamma: np.ndarray

    @property
    def gamma_norm(self):
        return float(np.linalg.norm(self.Gamma, 2))


@dataclass(eq=False)
class StabilityReport:
    ts: np.ndarray
    delta_vals: np.ndarray
    det_vals: np.ndarray
    sigma_min: np.ndarray
    conjugate_points: np.ndarray
    verdict: str
    flags: list = field(default_factory=list)
    length_L: float = 1.0

    def to_dict(self, params=None):
        return {
            "params": dict(params or {}),
            "verdict": self.verdict,
            "conjugate_points": [float(t) for t in self.conjugate_points],
            "flags": list(self.flags),
            "L": self.length_L,
            "n_samples": int(len(self.ts)),
        }


def assemble_system(omega, r, coeffs, f):
    omega = np.asarray(omega, dtype=float)
    r = np.asarray(r, dtype=float)
    if abs(np.linalg.norm(r) - 1.0) > 1e-10:
        raise ValueError(f"r must be a unit vector, |r| = {np.linalg.norm(r)}")
    C = coeffs.cmat
    A = hat(omega)
    Omega = hat(C @ (omega - coeffs.k * E2))
    D = 0.5 * Omega - A @ C

    force = np.zeros((3, 3))
    force[1, 1] = force[2, 2] = f * r[0]
    force[0, 1] = force[1, 0] = -0.5 * f * r[1]
    force[0, 2] = force[2, 0] = -0.5 * f * r[2]
    B = A.T @ C @ A + 0.5 * (Omega @ A + A @ Omega) + force

    Cinv = np.diag(1.0 / np.diag(C))
    Gamma = np.zeros((6, 6))
    Gamma[:3, 3:] = np.eye(3)
    Gamma[3:, :3] = Cinv @ B
    Gamma[3:, 3:] = Cinv @ (D - D.T)
    return SecondOrderSystem(Cmat=C, D=D, B=B, Gamma=Gamma)


def system_for_helix(spec, coeffs):
    return assemble_system(spec.omega, spec.r, coeffs, spec.f)


def fundamental_matrix(sys, t):
    """Upper-right 3x3 block of exp(Gamma t): solutions with xi(0) = 0, xi'(0) = e_i."""
    return expm(sys.Gamma * float(t))[:3, 3:]


def fundamental_matrix_ode(sys, ts, rtol=1e-12, atol=1e-14):
    """M(t) at the times ts by explicit Runge-Kutta integration of y' = Gamma y."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    y0 = np.zeros((6, 3))
    y0[3:] = np.eye(3)
    G = sys.Gamma

    def rhs(_, y):
        return (G @ y.reshape(6, 3)).ravel()

    sol = solve_ivp(rhs, (0.0, float(ts.max())), y0.ravel(), method="DOP853",
                    t_eval=ts, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")
    return np.stack([sol.y[:, j].reshape(6, 3)[:3] for j in range(len(ts))])


def _scaled_generator(sys, L):
    """Gamma in the state (xi, L xi'), where both blocks share the units of xi."""
    G = sys.Gamma.copy()
    G[:3, 3:] /= L
    G[3:, :3] *= L
    return G


def _orthonormal_step(Y):
    """QR with a positive-diagonal triangular factor; returns (Q, log det R)."""
    Q, R = np.linalg.qr(Y)
    d = np.diag(R)
    Q = Q * np.sign(d)
    return Q, float(np.sum(np.log(np.abs(d))))


def _orthonormal_flow(sys, L, ts):
    """Top-block determinants and accumulated log-scales along the uniform grid ts.

    With Y(t) = (M(t), L M'(t)) = Q(t) P(t), det P > 0, we get
    det M(t) = det Q_top(t) * exp(log_scale(t)); det Q_top lies in [-1, 1].
    """
    Gs = _scaled_generator(sys, L)
    Y = expm(sys.Gamma * ts[0])[:, 3:]
    Y[3:] *= L
    Q, log_scale = _orthonormal_step(Y)
    step = expm(Gs * (ts[1] - ts[0]))

    frames = [Q]
    q_dets = np.empty(len(ts))
    scales = np.empty(len(ts))
    q_dets[0], scales[0] = np.linalg.det(Q[:3]), log_scale
    for j in range(1, len(ts)):
        Q, lg = _orthonormal_step(step @ Q)
        log_scale += lg
        frames.append(Q)
        q_dets[j], scales[j] = np.linalg.det(Q[:3]), log_scale
    return Gs, frames, q_dets, scales


def scan(sys, L, n_samples=DEFAULT_N_SAMPLES, t_min_frac=T_MIN_FRAC, eig_tol=EIG_TOL):
    """Sample M(t) on [t_min_frac L, L] and locate the zeros of det M(t).

    Sign changes of det M are refined with brentq; samples where
    |det Q_top| / (t / L)^3 drops below eig_tol count as touching zeros.
    """
    if n_samples < MIN_N_SAMPLES:
        raise ValueError(f"n_samples must be >= {MIN_N_SAMPLES}, got {n_samples}")
    if not 0.0 < t_min_frac < 1.0:
        raise ValueError(f"t_min_frac must lie in (0, 1), got {t_min_frac}")

    ts = np.linspace(t_min_frac * L, L, n_samples)
    delta_vals = np.empty(n_samples)
    sigma_min = np.empty(n_samples)
    for j, t in enumerate(ts):
        M = fundamental_matrix(sys, t)
        if not np.all(np.isfinite(M)):
            delta_vals[j] = sigma_min[j] = np.nan
            continue
        delta_vals[j] = np.min(np.abs(np.linalg.eigvals(M)))
        sigma_min[j] = np.linalg.svd(M, compute_uv=False)[-1]

    Gs, frames, q_dets, scales = _orthonormal_flow(sys, L, ts)
    with np.errstate(over="ignore"):
        det_vals = q_dets * np.exp(scales)
    indicator = np.abs(q_dets) / (ts / L) ** 3

    flags = []
    if sys.gamma_norm * L > STIFFNESS_GUARD:
        flags.append(FLAG_LOW_CONFIDENCE)
        logger.warning("||Gamma|| L = %.1f exceeds %.0f: scan accuracy is doubtful",
                       sys.gamma_norm * L, STIFFNESS_GUARD)

    points = []
    crossings = np.flatnonzero(np.sign(q_dets[:-1]) * np.sign(q_dets[1:]) < 0)
    for j in crossings:
        Qj, tj = frames[j], ts[j]

        def local_det(t):
            return float(np.linalg.det((expm(Gs * (t - tj)) @ Qj)[:3]))

        tc = brentq(local_det, ts[j], ts[j + 1], xtol=CONJUGATE_XTOL * L)
        points.append(tc)
        M = fundamental_matrix(sys, tc)
        if not np.all(np.isfinite(M)):
            continue
        if np.min(np.abs(np.linalg.eigvals(M))) > 1e-6 * np.linalg.norm(M, 2):
            if FLAG_DISAGREE not in flags:
                flags.append(FLAG_DISAGREE)
                logger.warning("Delta(t) and det M(t) disagree near t = %.6g", tc)
    touched = []
    spacing = ts[1] - ts[0]
    for j in np.flatnonzero(indicator < eig_tol):
        if not any(abs(ts[j] - tc) <= spacing for tc in points):
            touched.append(float(ts[j]))

    interior = [tc for tc in points if tc < L * (1.0 - 1e-8)]
    if interior:
        verdict = "unstable"
    elif points or touched:
        verdict = "marginal"
        flags.append(FLAG_MARGINAL)
        logger.warning("conjugate point at the end of the rod: marginal verdict")
    else:
        verdict = "stable"

    conjugate_points = np.array(sorted(points + touched))
    logger.debug("scan: %d samples, conjugate points %s, verdict %s",
                 n_samples, conjugate_points, verdict)
    return StabilityReport(ts=ts, delta_vals=delta_vals, det_vals=det_vals,
                           sigma_min=sigma_min, conjugate_points=conjugate_points,
                           verdict=verdict, flags=flags, length_L=float(L))


def ode_residual_check(sys, t_samples, h=1e-4):
    """Max of |C M'' - (D - D^T) M' - B M| over t_samples with central differences,
    relative to (||C|| + ||D - D^T|| + ||B||) max(1, ||M||)."""
    C, skew, B = sys.Cmat, sys.D - sys.D.T, sys.B
    scale = np.linalg.norm(C, 2) + np.linalg.norm(skew, 2) + np.linalg.norm(B, 2)
    worst = 0.0
    for t in np.atleast_1d(t_samples):
        Mm = fundamental_matrix(sys, t - h)
        M0 = fundamental_matrix(sys, t)
        Mp = fundamental_matrix(sys, t + h)
        d1 = (Mp - Mm) / (2.0 * h)
        d2 = (Mp - 2.0 * M0 + Mm) / (h * h)
        res = C @ d2 - skew @ d1 - B @ M0
        worst = max(worst, float(np.max(np.abs(res))) / (scale * max(1.0, np.max(np.abs(M0)))))
    return worst


def helix_second_variation(sys, L, N=DEFAULT_N_GRID):
    """P1 stiffness matrix of F on H1_0(0, L), interior nodes only (node-major)."""
    h = L / N
    C, D, B = sys.Cmat, sys.D, sys.B
    n = 3 * (N + 1)
    K = np.zeros((n, n))
    # element matrix over local nodes (0, 1); s = (-1, +1) are h * phi'
    s = (-1.0, 1.0)
    local = np.zeros((6, 6))
    for a in range(2):
        for b in range(2):
            blk = s[a] * s[b] / h * C
            blk = blk + 0.5 * (s[b] * D + s[a] * D.T)
            blk = blk + (h / 3.0 if a == b else h / 6.0) * B
            local[3 * a:3 * a + 3, 3 * b:3 * b + 3] = blk
    for i in range(N):
        sl = slice(3 * i, 3 * i + 6)
        K[sl, sl] += local
    inner = slice(3, n - 3)
    return K[inner, inner]


def helix_min_eigenvalue(sys, L, N=DEFAULT_N_GRID):
    """Smallest eigenvalue of the Dirichlet second variation per unit (lumped) mass."""
    K = helix_second_variation(sys, L, N)
    vals = eigh(K, eigvals_only=True, subset_by_index=[0, 0])
    return float(vals[0]) / (L / N)
