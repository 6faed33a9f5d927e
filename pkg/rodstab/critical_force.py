"""
Critical force of the straight rod under clamped-clamped and weak-clamped ends.

    f1 = (c13 k)^2 / c23 - x^2 c12 / L^2     x = 2 pi, x*, or pi (weak-clamped)
    f2 = -pi^2 c13 / L^2
    f_crit = max(f1, f2)

with a = c12 c23 / (c13 k L)^2. On the clamped-clamped side x = x* when
a > 1/(4 pi^2), the common zero in (pi, 2 pi) of

    g1(x) = (x - a x^3) sin x + 2 (cos x - 1)
    g2(x) = (x - a x^3)(cos x + 1) - 2 sin x

and x = 2 pi otherwise. The numeric value is the zero crossing of the
smallest eigenvalue of the discretized second variation.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import brentq

from config import BLIND_BRACKET, DEFAULT_N_GRID, FCRIT_XTOL, MIN_N_GRID
from rodstab.energy import (
    ClampedClamped, WeakClamped, WeakFree, band_lower, curved_beam, energy,
    lowest_banded_eigenvalue, lumped_mass, second_variation_dofs,
    second_variation_parts, straight,
)
from rodstab.errors import (
    BracketFailure, DegenerateCase, RootNotBracketed, UnsupportedBc,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
X_STAR_THRESHOLD = 1.0 / (4.0 * np.pi ** 2)
_X_STAR_LO = np.pi + 1e-6
_X_STAR_XTOL = 1e-12

BRANCHES = ("two-pi", "x-star", "weak", "uncoupled")


@dataclass
class CriticalForceBreakdown:
    f1_crit: float
    f2_crit: float
    f_crit: float
    branch: str
    x_star: Optional[float]
    a_param: Optional[float]     # None when k = 0
    dominant: str                # "f1" or "f2"
    bc: str
    length_L: float

    def to_dict(self):
        d = {
            "f1_crit": self.f1_crit,
            "f2_crit": self.f2_crit,
            "f_crit": self.f_crit,
            "branch": self.branch,
            "a_param": self.a_param,
            "dominant": self.dominant,
            "bc": self.bc,
            "L": self.length_L,
        }
        if self.x_star is not None:
            d["x_star"] = self.x_star
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(f1_crit=d["f1_crit"], f2_crit=d["f2_crit"], f_crit=d["f_crit"],
                   branch=d["branch"], x_star=d.get("x_star"), a_param=d["a_param"],
                   dominant=d["dominant"], bc=d["bc"], length_L=d["L"])


class KernelCheck(NamedTuple):
    kernel_dim: int
    kernel_match_error: float
    f_crit_numeric: float
    relative_gap: float


@dataclass
class GapReport:
    f_crit: float
    energy_straight: float
    energy_curved: float
    curved_admissible: bool


def g_functions(x, a):
    x = np.asarray(x, dtype=float)
    u = x - a * x ** 3
    g1 = u * np.sin(x) + 2.0 * (np.cos(x) - 1.0)
    g2 = u * (np.cos(x) + 1.0) - 2.0 * np.sin(x)
    return g1, g2


def find_x_star(a):
    """Common zero of g1, g2 in (pi, 2 pi); None when a <= 1/(4 pi^2)."""
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    if 1.0 - 4.0 * np.pi ** 2 * a >= 0.0:
        return None

    def g2(x):
        return g_functions(x, a)[1]

    lo, hi = g2(_X_STAR_LO), g2(TWO_PI)
    if not lo > 0.0 > hi:
        raise RootNotBracketed(f"g2 does not change sign on (pi, 2 pi) for a = {a!r}")
    x = brentq(g2, _X_STAR_LO, TWO_PI, xtol=_X_STAR_XTOL, rtol=4 * np.finfo(float).eps)

    g1 = float(g_functions(x, a)[0])
    scale = 2.0 + abs(x - a * x ** 3)
    if abs(g1) > 1e-9 * scale:
        raise RootNotBracketed(f"g1(x*) = {g1:.3e} at x* = {x!r}, a = {a!r}")
    return float(x)


def _bc_tag(bc):
    if isinstance(bc, ClampedClamped):
        if not bc.is_identity:
            raise UnsupportedBc("critical force needs clamped-clamped ends at the identity")
        return bc.tag
    if isinstance(bc, WeakClamped):
        return bc.tag
    raise UnsupportedBc(f"no straight critical point for {getattr(bc, 'tag', bc)!r}")


def f_crit_analytic(coeffs, bc):
    tag = _bc_tag(bc)
    L = coeffs.length_L
    c12, c13, c23, k = coeffs.c12, coeffs.c13, coeffs.c23, coeffs.k
    f2 = -np.pi ** 2 * c13 / L ** 2
    coupling = (c13 * k) ** 2 / c23
    x_star = None

    if k == 0.0:
        a = None
        branch = "uncoupled"
        f1 = -np.pi ** 2 * c12 / L ** 2
    else:
        a = c12 * c23 / (c13 * k * L) ** 2
        if tag == WeakClamped.tag:
            branch = "weak"
            f1 = coupling - np.pi ** 2 * c12 / L ** 2
        elif a <= X_STAR_THRESHOLD:
            branch = "two-pi"
            f1 = coupling - 4.0 * np.pi ** 2 * c12 / L ** 2
        else:
            branch = "x-star"
            x_star = find_x_star(a)
            f1 = coupling - x_star ** 2 * c12 / L ** 2

    dominant = "f1" if f1 >= f2 else "f2"
    return CriticalForceBreakdown(
        f1_crit=float(f1), f2_crit=float(f2), f_crit=float(max(f1, f2)), branch=branch,
        x_star=x_star, a_param=a, dominant=dominant, bc=tag, length_L=float(L))


def force_scale(coeffs, f_crit):
    L = coeffs.length_L
    return max(abs(f_crit), coeffs.c13 * coeffs.k ** 2, coeffs.c12 / L ** 2, 1e-12)


def blind_bracket(coeffs):
    """Bracket chosen without the closed formula."""
    width = BLIND_BRACKET * coeffs.c_max / coeffs.length_L ** 2
    return -width, width


def f_crit_numeric(coeffs, bc, N=DEFAULT_N_GRID, bracket=None):
    """Zero crossing in f of the smallest eigenvalue of K(f) = K0 + f diag(mask)."""
    if N < MIN_N_GRID:
        raise ValueError(f"n_grid must be >= {MIN_N_GRID}, got {N}")
    analytic = f_crit_analytic(coeffs, bc)
    scale = force_scale(coeffs, analytic.f_crit)
    if bracket is None:
        bracket = (analytic.f_crit - 10.0 * scale, analytic.f_crit + 10.0 * scale)
    K0, mask = second_variation_parts(coeffs, coeffs.length_L, bc, N)
    ab0 = band_lower(K0)

    def smallest(f):
        ab = ab0.copy()
        ab[0] += f * mask
        return lowest_banded_eigenvalue(ab)

    lo, hi = bracket
    s_lo, s_hi = smallest(lo), smallest(hi)
    logger.debug("bracket [%.6g, %.6g]: lambda_min %.3e / %.3e", lo, hi, s_lo, s_hi)
    if not (s_lo < 0.0 < s_hi):
        raise BracketFailure(
            f"smallest eigenvalue has no sign change on [{lo:.6g}, {hi:.6g}] "
            f"({s_lo:.3e}, {s_hi:.3e})")
    f = brentq(smallest, lo, hi, xtol=FCRIT_XTOL * scale)
    logger.info("f_crit numeric (%s, N=%d) = %.10g, analytic %.10g",
                analytic.bc, N, f, analytic.f_crit)
    return float(f)


def relative_gap(numeric, analytic, coeffs):
    return (numeric - analytic.f_crit) / force_scale(coeffs, analytic.f_crit)


def straight_rod_status(coeffs, bc, f):
    """Straight rod at force f: stable above f_crit, unstable below, marginal within 1e-8 * scale."""
    br = f_crit_analytic(coeffs, bc)
    if abs(f - br.f_crit) <= 1e-8 * force_scale(coeffs, br.f_crit):
        return "marginal"
    return "stable" if f > br.f_crit else "unstable"


def analytic_kernel(coeffs, L, bc, x):
    """Kernel of the second variation at f_crit sampled at x, shape (len(x), 3), up to scale."""
    if L is not None and L != coeffs.length_L:
        coeffs = coeffs.with_length(L)
    L = coeffs.length_L
    br = f_crit_analytic(coeffs, bc)
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape + (3,))
    c13k, c23 = coeffs.c13 * coeffs.k, coeffs.c23

    if br.dominant == "f2":
        out[..., 1] = np.sin(np.pi * x / L)
    elif br.branch == "uncoupled":
        out[..., 2] = np.sin(np.pi * x / L)
    elif br.branch == "weak":
        out[..., 0] = L * c13k * (1.0 - np.cos(np.pi * x / L))
        out[..., 2] = -np.pi * c23 * np.sin(np.pi * x / L)
    elif br.branch == "two-pi":
        out[..., 0] = c13k * L * (1.0 - np.cos(TWO_PI * x / L))
        out[..., 2] = -TWO_PI * c23 * np.sin(TWO_PI * x / L)
    else:
        nu = br.x_star / L
        t = np.tan(0.5 * br.x_star)
        w3 = 1.0 - np.cos(nu * x) - t * np.sin(nu * x)
        # int_0^x w3 and its mean over [0, L]
        int_w3 = x - np.sin(nu * x) / nu + t * (np.cos(nu * x) - 1.0) / nu
        mean_w3 = (L - np.sin(nu * L) / nu + t * (np.cos(nu * L) - 1.0) / nu) / L
        out[..., 0] = c13k / c23 * (mean_w3 * x - int_w3)
        out[..., 2] = w3
    return out


def _nondegenerate(br, coeffs):
    scale = force_scale(coeffs, br.f_crit)
    if abs(br.f1_crit - br.f2_crit) <= 1e-10 * scale:
        raise DegenerateCase(
            f"f1 = {br.f1_crit:.12g} and f2 = {br.f2_crit:.12g} coincide: two-dimensional kernel")


def bifurcation_kernel_check(coeffs, L=None, N=DEFAULT_N_GRID, bc=None, threshold=1e-6):
    """Kernel of K at the discrete critical force against the analytic kernel.

    Eigenvalues come from the mass-normalized problem K v = lambda M v; the
    kernel dimension counts |lambda| <= threshold * ||M^-1/2 K M^-1/2||_2 and
    the match error is the L2 angle (radians) between the eigenvector and the
    sampled analytic kernel.
    """
    bc = WeakClamped() if bc is None else bc
    if L is not None and L != coeffs.length_L:
        coeffs = coeffs.with_length(L)
    L = coeffs.length_L
    br = f_crit_analytic(coeffs, bc)
    _nondegenerate(br, coeffs)

    scale = force_scale(coeffs, br.f_crit)
    f_num = f_crit_numeric(coeffs, bc, N,
                           bracket=(br.f_crit - 0.1 * scale, br.f_crit + 0.1 * scale))
    K0, mask = second_variation_parts(coeffs, L, bc, N)
    K = K0 + f_num * np.diag(mask)
    inv_sqrt_m = 1.0 / np.sqrt(lumped_mass(L, bc, N))
    Kn = inv_sqrt_m[:, None] * K * inv_sqrt_m[None, :]
    vals, vecs = eigh(Kn)
    norm = float(np.max(np.abs(vals)))
    kernel_dim = int(np.sum(np.abs(vals) <= threshold * norm))

    xs = np.linspace(0.0, L, N + 1)
    target = analytic_kernel(coeffs, None, bc, xs).ravel()[second_variation_dofs(bc, N)]
    # L2 (lumped) angle: compare in the mass-weighted coordinates
    u = vecs[:, 0]
    t = target / inv_sqrt_m
    t = t / np.linalg.norm(t)
    proj = float(u @ t)
    angle = float(np.arctan2(np.linalg.norm(t - proj * u), abs(proj)))

    gap = relative_gap(f_num, br, coeffs)
    logger.info("kernel check: dim=%d angle=%.3e f_num=%.10g (gap %.2e)",
                kernel_dim, angle, f_num, gap)
    return KernelCheck(kernel_dim, angle, f_num, gap)


def local_global_gap(coeffs, L=None, N=200):
    """Straight rod vs curved beam under identity clamps at f = 0.

    When kL is a multiple of 2 pi the curved beam satisfies the clamps and has
    zero elastic energy, although the straight rod can still be a strict local
    minimizer (f_crit < 0).
    """
    if L is not None and L != coeffs.length_L:
        coeffs = coeffs.with_length(L)
    L = coeffs.length_L
    br = f_crit_analytic(coeffs, ClampedClamped())
    rod = straight(L, N)
    beam = curved_beam(coeffs, L, N)
    admissible = bool(np.max(np.abs(beam.samples[-1] - np.eye(3))) <= 1e-8)
    return GapReport(
        f_crit=br.f_crit,
        energy_straight=energy(rod, coeffs, 0.0, WeakFree()),
        energy_curved=energy(beam, coeffs, 0.0, WeakFree()),
        curved_admissible=admissible,
    )
