"""
Rotation-group primitives.

Axial-vector convention: hat(w) v = w x v, so for A = hat(w)
    a12 = -w3,  a13 = w2,  a23 = -w1.
All functions accept batches: vectors of shape (..., 3), matrices (..., 3, 3).
"""

import numpy as np
from scipy.linalg import polar

from rodstab.errors import AngleNearPi, DegenerateAxis, SingularInput

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])

# Below this angle the trigonometric coefficients switch to Taylor series
_SMALL_ANGLE = 1e-4
_PI_MARGIN = 1e-6


def hat(w):
    """Skew matrix of an axial vector."""
    w = np.asarray(w, dtype=float)
    A = np.zeros(w.shape[:-1] + (3, 3))
    A[..., 0, 1] = -w[..., 2]
    A[..., 0, 2] = w[..., 1]
    A[..., 1, 0] = w[..., 2]
    A[..., 1, 2] = -w[..., 0]
    A[..., 2, 0] = -w[..., 1]
    A[..., 2, 1] = w[..., 0]
    return A


def vee(A):
    """Axial vector of the skew part of A."""
    A = np.asarray(A, dtype=float)
    return 0.5 * np.stack([
        A[..., 2, 1] - A[..., 1, 2],
        A[..., 0, 2] - A[..., 2, 0],
        A[..., 1, 0] - A[..., 0, 1],
    ], axis=-1)


def _angle(phi):
    return np.linalg.norm(phi, axis=-1)


def exp_skew(omega, t=1.0):
    """Rodrigues formula for exp(hat(omega) * t)."""
    phi = np.asarray(omega, dtype=float) * np.asarray(t, dtype=float)[..., None]
    theta = _angle(phi)
    small = theta < _SMALL_ANGLE
    th = np.where(small, 1.0, theta)
    th2 = theta * theta
    a = np.where(small, 1.0 - th2 / 6.0 + th2 * th2 / 120.0, np.sin(th) / th)
    b = np.where(small, 0.5 - th2 / 24.0 + th2 * th2 / 720.0, (1.0 - np.cos(th)) / (th * th))
    K = hat(phi)
    KK = K @ K
    return np.eye(3) + a[..., None, None] * K + b[..., None, None] * KK


def log_rotation(R):
    """Axis-angle vector phi with exp_skew(phi) = R (angle below pi)."""
    R = np.asarray(R, dtype=float)
    s_vec = vee(R)                      # sin(theta) * axis
    s = np.linalg.norm(s_vec, axis=-1)
    c = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    theta = np.arctan2(s, c)
    if np.any(np.pi - theta < _PI_MARGIN):
        raise AngleNearPi(
            f"rotation angle {float(np.max(theta)):.9f} is within {_PI_MARGIN} of pi")
    small = theta < _SMALL_ANGLE
    ss = np.where(small, 1.0, s)
    th2 = theta * theta
    factor = np.where(small, 1.0 + th2 / 6.0 + 7.0 * th2 * th2 / 360.0, theta / ss)
    return factor[..., None] * s_vec


def right_jacobian_inv(phi):
    """J_r^{-1}(phi): log(exp(phi) exp(eps x)) = phi + eps J_r^{-1}(phi) x + O(eps^2)."""
    phi = np.asarray(phi, dtype=float)
    theta = _angle(phi)
    small = theta < _SMALL_ANGLE
    th = np.where(small, 1.0, theta)
    th2 = theta * theta
    coef = np.where(
        small,
        1.0 / 12.0 + th2 / 720.0,
        1.0 / (th * th) - (1.0 + np.cos(th)) / (2.0 * th * np.sin(th)),
    )
    K = hat(phi)
    return np.eye(3) + 0.5 * K + coef[..., None, None] * (K @ K)


def is_rotation(R, tol=1e-10):
    R = np.asarray(R, dtype=float)
    RtR = np.swapaxes(R, -1, -2) @ R
    ortho = np.max(np.abs(RtR - np.eye(3))) <= tol
    return bool(ortho and np.all(np.abs(np.linalg.det(R) - 1.0) <= tol))


def polar_project(M):
    """Orthogonal factor U of M = U P (nearest rotation for det M > 0)."""
    M = np.asarray(M, dtype=float)
    det = np.linalg.det(M)
    if det <= 1e-12:
        raise SingularInput(f"polar projection needs det M > 0, got {det:.3e}")
    U, _ = polar(M, side="right")
    return U


def frame_with_first_row(r):
    """Rotation R with R^T e1 = r, rotating in the (e1, r) plane only."""
    r = np.asarray(r, dtype=float)
    if abs(np.linalg.norm(r) - 1.0) > 1e-10:
        raise ValueError(f"first row must be a unit vector, |r| = {np.linalg.norm(r)}")
    if np.linalg.norm(r + E1) <= 1e-8:
        raise DegenerateAxis("r = -e1: no rotation plane is singled out")
    axis = np.cross(E1, r)
    s = np.linalg.norm(axis)
    if s < 1e-15:
        return np.eye(3)
    Q = exp_skew(axis / s * np.arctan2(s, r[0]))    # Q e1 = r
    return Q.T
