"""
Limit-model coefficients for an isotropic rod with a rectangular cross section
S = (-w_y, w_y) x (-w_z, w_z) of unit area and two-layer prestrain.

The bending-torsion density is
    c12 a12^2 + c13 (a13 - k)^2 + c23 a23^2
with c12, c13 from the second moments, c23 = mu * tau_S and the intrinsic
curvature k = chi * int_{S+} x3 / int_S x3^2.
"""

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.special import zeta

from config import TORSION_N_TERMS, TANH_SATURATION


@dataclass(frozen=True)
class MaterialParams:
    lame_lambda: float
    lame_mu: float
    normalize_by_mu: bool = True

    def __post_init__(self):
        if not self.lame_mu > 0:
            raise ValueError(f"lame_mu must be positive, got {self.lame_mu}")
        if not self.lame_lambda >= 0:
            raise ValueError(f"lame_lambda must be non-negative, got {self.lame_lambda}")

    @property
    def bending_factor(self):
        """mu (3 lambda + 2 mu) / (lambda + mu), the effective Young modulus."""
        lam, mu = self.lame_lambda, self.lame_mu
        return mu * (3.0 * lam + 2.0 * mu) / (lam + mu)


@dataclass(frozen=True)
class CrossSection:
    """Unit-area rectangle; w_y is derived from w_z."""
    w_z: float
    w_y: float = field(init=False)

    def __post_init__(self):
        if not (np.isfinite(self.w_z) and self.w_z > 0):
            raise ValueError(f"w_z must be a positive number, got {self.w_z}")
        object.__setattr__(self, "w_y", 1.0 / (4.0 * self.w_z))

    @property
    def aspect_ratio(self):
        return self.w_y / self.w_z


@dataclass(frozen=True)
class RodCoefficients:
    c12: float
    c13: float
    c23: float
    tau_s: float
    k: float
    chi: float
    length_L: float

    def __post_init__(self):
        for name in ("c12", "c13", "c23", "tau_s", "length_L"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value}")
        if (self.k == 0.0) != (self.chi == 0.0):
            raise ValueError(f"k = {self.k} and chi = {self.chi} must vanish together")

    @classmethod
    def from_moduli(cls, c12, c13, c23, k, length_L=1.0):
        """Coefficients given directly (tau_s = c23, chi mirrors k)."""
        return cls(c12=float(c12), c13=float(c13), c23=float(c23), tau_s=float(c23),
                   k=float(k), chi=float(k), length_L=float(length_L))

    @property
    def cmat(self):
        """C = diag(c23, c13, c12), the Hessian of q2 in axial-vector coordinates."""
        return np.diag([self.c23, self.c13, self.c12])

    @property
    def c_max(self):
        return max(self.c12, self.c13, self.c23)

    def with_length(self, length_L):
        d = asdict(self)
        d["length_L"] = float(length_L)
        return RodCoefficients(**d)

    def to_dict(self):
        return {
            "c12": self.c12,
            "c13": self.c13,
            "c23": self.c23,
            "tau_s": self.tau_s,
            "k": self.k,
            "chi": self.chi,
            "L": self.length_L,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(c12=d["c12"], c13=d["c13"], c23=d["c23"], tau_s=d["tau_s"],
                   k=d["k"], chi=d["chi"], length_L=d["L"])


def second_moments(cs):
    """(int_S x2^2, int_S x3^2, int_{S+} x3) in closed form."""
    wy, wz = cs.w_y, cs.w_z
    m2 = 4.0 / 3.0 * wy ** 3 * wz
    m3 = 4.0 / 3.0 * wy * wz ** 3
    s3plus = wy * wz ** 2
    return m2, m3, s3plus


def _torsion_terms(cs, n_terms):
    n = np.arange(n_terms)
    odd = 2.0 * n + 1.0
    arg = odd * np.pi / (2.0 * cs.w_z) * cs.w_y
    th = np.where(arg > TANH_SATURATION, 1.0, np.tanh(np.minimum(arg, TANH_SATURATION)))
    return th / odd ** 5


def torsional_rigidity(cs, n_terms=TORSION_N_TERMS):
    """Partial sum of the Saint-Venant series for the rectangle."""
    if n_terms < 1:
        raise ValueError(f"n_terms must be >= 1, got {n_terms}")
    wy, wz = cs.w_y, cs.w_z
    series = np.sum(_torsion_terms(cs, n_terms))
    return 16.0 * wy * wz ** 3 * (1.0 / 3.0 - 64.0 * wz / (np.pi ** 5 * wy) * series)


def torsion_tail_bound(cs, n_terms):
    """Upper bound on |tau_S(infinity) - tau_S(n_terms)|."""
    wy, wz = cs.w_y, cs.w_z
    tail = zeta(5.0, n_terms + 0.5) / 32.0     # sum_{j >= n} (2j+1)^-5
    return 16.0 * wy * wz ** 3 * 64.0 * wz / (np.pi ** 5 * wy) * tail


def intrinsic_curvature(cs, chi):
    """k = chi * s3plus / m3, i.e. 3 chi / (4 w_z) for the rectangle."""
    if chi < 0:
        raise ValueError(f"chi must be non-negative, got {chi}")
    _, m3, s3plus = second_moments(cs)
    return chi * s3plus / m3


def build_coefficients(mp, cs, chi, length_L, n_terms=TORSION_N_TERMS):
    if not length_L > 0:
        raise ValueError(f"rod length must be positive, got {length_L}")
    m2, m3, _ = second_moments(cs)
    tau_s = torsional_rigidity(cs, n_terms)
    scale = mp.lame_mu if mp.normalize_by_mu else 1.0
    factor = mp.bending_factor / scale
    return RodCoefficients(
        c12=factor * m2,
        c13=factor * m3,
        c23=mp.lame_mu * tau_s / scale,
        tau_s=tau_s,
        k=intrinsic_curvature(cs, chi),
        chi=float(chi),
        length_L=float(length_L),
    )


def default_coefficients(w_z, chi, length_L=1.0, lame_lambda=None, lame_mu=None,
                       normalize_by_mu=True):
    """Shortcut for the rubber-strip defaults of config.py."""
    from config import DEFAULT_LAME_LAMBDA, DEFAULT_LAME_MU
    mp = MaterialParams(
        DEFAULT_LAME_LAMBDA if lame_lambda is None else lame_lambda,
        DEFAULT_LAME_MU if lame_mu is None else lame_mu,
        normalize_by_mu,
    )
    return build_coefficients(mp, CrossSection(w_z), chi, length_L)
