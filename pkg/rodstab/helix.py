"""
Flat helices near the straight rod.

For a boundary tilt delta the frame field R(x) = R0 exp(x hat(theta r)) with
r = (1 - delta, sqrt(2 delta - delta^2), 0) keeps R(x)^T e1 = r and is a
stationary point when theta is a root of

    p(theta) = (c23 - c13) s (1 - delta) theta^2 + c13 k (1 - delta) theta - f s,
    s = sqrt(2 delta - delta^2).
"""

import logging
from dataclasses import dataclass

import numpy as np

from config import DELTA_RANGE
from rodstab.energy import ClampedClamped, RotationCurve
from rodstab.errors import NoRealRoot, ZeroForce
from rodstab.so3 import E1, E2, exp_skew, frame_with_first_row, hat

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class HelixSpec:
    delta: float
    theta: float
    r: np.ndarray
    R0: np.ndarray
    omega: np.ndarray
    f: float
    length_L: float

    @property
    def generator(self):
        return hat(self.omega)

    def frames(self, x):
        """R0 exp(x hat(omega)) at the positions x (scalar or array)."""
        return self.R0 @ exp_skew(self.omega, x)

    def end_bc(self):
        """Clamped-clamped data taken from the helix itself."""
        return ClampedClamped(self.R0, self.frames(self.length_L))

    def to_dict(self):
        return {
            "delta": self.delta,
            "theta": self.theta,
            "f": self.f,
            "L": self.length_L,
            "r": [float(v) for v in self.r],
            "omega": [float(v) for v in self.omega],
            "R0": [float(v) for v in self.R0.ravel()],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(delta=d["delta"], theta=d["theta"], r=np.array(d["r"], dtype=float),
                   R0=np.array(d["R0"], dtype=float).reshape(3, 3),
                   omega=np.array(d["omega"], dtype=float), f=d["f"], length_L=d["L"])


def tilt_vector(delta):
    s = np.sqrt(2.0 * delta - delta * delta)
    return np.array([1.0 - delta, s, 0.0])


def _check_delta(delta):
    lo, hi = DELTA_RANGE
    if not lo <= delta <= hi:
        raise ValueError(f"delta must lie in [{lo:g}, {hi:g}], got {delta}")


def helix_polynomial(coeffs, f, delta):
    """Coefficients (quadratic, linear, constant) of p in theta."""
    s = np.sqrt(2.0 * delta - delta * delta)
    return ((coeffs.c23 - coeffs.c13) * s * (1.0 - delta),
            coeffs.c13 * coeffs.k * (1.0 - delta),
            -f * s)


def theta_root(coeffs, f, delta):
    """Root of p with the smaller absolute value."""
    if f == 0.0:
        raise ZeroForce("flat helices need f != 0")
    _check_delta(delta)
    if coeffs.k == 0.0:
        raise ValueError("flat helices need an intrinsic curvature k != 0")
    a2, a1, a0 = helix_polynomial(coeffs, f, delta)

    if abs(a2) <= 1e-12 * max(coeffs.c13, coeffs.c23):
        return float(-a0 / a1)

    disc = a1 * a1 - 4.0 * a2 * a0
    if disc < 0.0:
        raise NoRealRoot(f"p has no real root (discriminant {disc:.3e})")
    q = -0.5 * (a1 + np.copysign(np.sqrt(disc), a1))
    roots = (q / a2, a0 / q)
    if abs(abs(roots[0]) - abs(roots[1])) <= 1e-14 * abs(roots[0]):
        raise NoRealRoot(f"roots {roots[0]!r} and {roots[1]!r} have equal modulus")
    return float(min(roots, key=abs))


def build_helix(coeffs, f, delta, L=None):
    theta = theta_root(coeffs, f, delta)
    r = tilt_vector(delta)
    L = coeffs.length_L if L is None else float(L)
    spec = HelixSpec(delta=float(delta), theta=theta, r=r, R0=frame_with_first_row(r),
                     omega=theta * r, f=float(f), length_L=L)
    logger.debug("helix delta=%g f=%.6g: theta=%.12g", delta, f, theta)
    return spec


def sample_curve(spec, N):
    xs = np.linspace(0.0, spec.length_L, N + 1)
    return RotationCurve(spec.frames(xs), spec.length_L)


def algebraic_residual(omega, coeffs, f, r):
    """omega x C (omega - k e2) - f (r x e1), zero for a stationary helix."""
    omega = np.asarray(omega, dtype=float)
    m = coeffs.cmat @ (omega - coeffs.k * E2)
    return np.cross(omega, m) - f * np.cross(r, E1)


@dataclass
class ZeroForceHelix:
    """Helices at f = 0: a13 is fixed, a23 stays free."""
    a13: float

    def omega(self, a23):
        # a23 = -omega_1, a13 = omega_2, a12 = -omega_3
        return np.array([-a23, self.a13, 0.0])


def helix_f0(coeffs):
    if abs(coeffs.c13 - coeffs.c23) <= 1e-12 * max(coeffs.c13, coeffs.c23):
        return None
    return ZeroForceHelix(-coeffs.c13 * coeffs.k / (coeffs.c23 - coeffs.c13))
