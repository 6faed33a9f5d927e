"""
Discrete Kirchhoff rod with intrinsic curvature.

Frames R_i live at the nodes x_i = i L / N, body strains at the midpoints:

    w_i = log(R_i^T R_{i+1}) / h
    E   = 1/2 sum_i h <C (w_i - k e2), w_i - k e2>  -  f sum_i wt_i <e1, R_i e1>

with C = diag(c23, c13, c12) and trapezoid weights wt_i on the force term.
Perturbations act on the right, R_i <- R_i exp(eps eta_i), so gradients are
axial vectors in body coordinates.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eig_banded, solve_banded

from config import (
    ARMIJO_MAX_HALVINGS, ARMIJO_SHRINK, ARMIJO_SLOPE, ARMIJO_STEP, BC_TOL,
    INIT_AMPLITUDE, MINIMIZE_MAX_ITER, MINIMIZE_TOL,
)
from rodstab.errors import (
    AngleNearPi, BcViolation, FrameJump, NoConvergence, UnsupportedBc,
)
from rodstab.so3 import E1, E2, exp_skew, is_rotation, log_rotation, right_jacobian_inv

logger = logging.getLogger(__name__)

# Half-bandwidth of node-major P1 matrices with three components per node
BANDWIDTH = 5


# ---------------------------------------------------------------------------
# Boundary conditions
# ---------------------------------------------------------------------------

def _as_rotation(R, name):
    R = np.array(np.eye(3) if R is None else R, dtype=float)
    if R.shape != (3, 3) or not is_rotation(R, 1e-8):
        raise ValueError(f"{name} is not a rotation matrix")
    return R


class BoundaryCondition:
    """Base class; subclasses fix the constrained components of test fields."""
    tag = None

    def check(self, samples, tol=BC_TOL):
        pass

    def free_mask(self, n_nodes):
        """(n_nodes, 3) booleans, True where a perturbation component is admissible."""
        return np.ones((n_nodes, 3), dtype=bool)

    def natural_residual(self, flux_start, flux_end):
        return 0.0

    def __repr__(self):
        return f"{type(self).__name__}()"


class WeakFree(BoundaryCondition):
    tag = "weak-free"

    def natural_residual(self, flux_start, flux_end):
        return max(np.linalg.norm(flux_start), np.linalg.norm(flux_end))


@dataclass(eq=False, repr=False)
class Clamped(BoundaryCondition):
    R0: np.ndarray = None
    tag = "clamped"

    def __post_init__(self):
        self.R0 = _as_rotation(self.R0, "R0")

    def check(self, samples, tol=BC_TOL):
        err = np.max(np.abs(samples[0] - self.R0))
        if err > tol:
            raise BcViolation(f"R(0) differs from the clamp by {err:.3e}")

    def free_mask(self, n_nodes):
        mask = np.ones((n_nodes, 3), dtype=bool)
        mask[0] = False
        return mask

    def natural_residual(self, flux_start, flux_end):
        return float(np.linalg.norm(flux_end))


@dataclass(eq=False, repr=False)
class ClampedClamped(BoundaryCondition):
    R0: np.ndarray = None
    RL: np.ndarray = None
    tag = "clamped-clamped"

    def __post_init__(self):
        self.R0 = _as_rotation(self.R0, "R0")
        self.RL = _as_rotation(self.RL, "RL")

    @property
    def is_identity(self):
        return bool(np.allclose(self.R0, np.eye(3), atol=1e-12)
                    and np.allclose(self.RL, np.eye(3), atol=1e-12))

    def check(self, samples, tol=BC_TOL):
        err0 = np.max(np.abs(samples[0] - self.R0))
        errL = np.max(np.abs(samples[-1] - self.RL))
        if max(err0, errL) > tol:
            raise BcViolation(
                f"end frames differ from the clamps by {err0:.3e} / {errL:.3e}")

    def free_mask(self, n_nodes):
        mask = np.ones((n_nodes, 3), dtype=bool)
        mask[0] = False
        mask[-1] = False
        return mask


class WeakClamped(BoundaryCondition):
    """R e1 = e1 at both ends; rotation about the tangent stays free."""
    tag = "weak-clamped"

    def check(self, samples, tol=BC_TOL):
        err0 = np.linalg.norm(samples[0] @ E1 - E1)
        errL = np.linalg.norm(samples[-1] @ E1 - E1)
        if max(err0, errL) > tol:
            raise BcViolation(
                f"end tangents differ from e1 by {err0:.3e} / {errL:.3e}")

    def free_mask(self, n_nodes):
        mask = np.ones((n_nodes, 3), dtype=bool)
        mask[0, 1:] = False
        mask[-1, 1:] = False
        return mask

    def natural_residual(self, flux_start, flux_end):
        return max(abs(flux_start[0]), abs(flux_end[0]))


BC_TAGS = ("weak-free", "clamped", "clamped-clamped", "weak-clamped")


def bc_from_tag(tag, R0=None, RL=None):
    """Boundary condition for a CLI tag; clamps default to the identity."""
    if tag == "weak-free":
        return WeakFree()
    if tag == "clamped":
        return Clamped(R0)
    if tag == "clamped-clamped":
        return ClampedClamped(R0, RL)
    if tag == "weak-clamped":
        return WeakClamped()
    raise ValueError(f"unknown boundary condition {tag!r} (expected one of {', '.join(BC_TAGS)})")


# ---------------------------------------------------------------------------
# Curves and strains
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class RotationCurve:
    samples: np.ndarray
    length_L: float

    def __post_init__(self):
        self.samples = np.array(self.samples, dtype=float)
        if self.samples.ndim != 3 or self.samples.shape[1:] != (3, 3):
            raise ValueError(f"samples must have shape (N+1, 3, 3), got {self.samples.shape}")
        if self.samples.shape[0] < 5:
            raise ValueError(f"need N >= 4 elements, got {self.samples.shape[0] - 1}")
        if not (np.isfinite(self.length_L) and self.length_L > 0):
            raise ValueError(f"length must be positive, got {self.length_L}")
        RtR = np.swapaxes(self.samples, -1, -2) @ self.samples
        ortho = np.max(np.abs(RtR - np.eye(3)))
        dets = np.linalg.det(self.samples)
        if ortho > 1e-6 or np.max(np.abs(dets - 1.0)) > 1e-6:
            raise ValueError(f"samples are not rotations (orthogonality error {ortho:.3e})")
        self.length_L = float(self.length_L)

    @property
    def n_elements(self):
        return self.samples.shape[0] - 1

    @property
    def h(self):
        return self.length_L / self.n_elements

    @property
    def xs(self):
        return np.linspace(0.0, self.length_L, self.n_elements + 1)

    @property
    def weights(self):
        return _trapezoid_weights(self.n_elements, self.h)

    def copy(self):
        return RotationCurve(self.samples.copy(), self.length_L)


@dataclass(eq=False)
class StrainField:
    omegas: np.ndarray
    h: float

    @property
    def n_elements(self):
        return self.omegas.shape[0]


@dataclass
class EnergyTrace:
    energies: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self):
        """Accepted steps (the first record is the starting curve)."""
        return len(self.steps)


def _trapezoid_weights(n, h):
    w = np.full(n + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _relative_rotations(R):
    Q = np.swapaxes(R[:-1], -1, -2) @ R[1:]
    cos_angle = 0.5 * (np.trace(Q, axis1=-2, axis2=-1) - 1.0)
    if np.any(cos_angle < 0.0):
        i = int(np.argmin(cos_angle))
        raise FrameJump(
            f"frames {i} and {i + 1} differ by {np.degrees(np.arccos(max(cos_angle[i], -1.0))):.1f} deg")
    return Q, log_rotation(Q)


def strains(curve):
    _, phi = _relative_rotations(curve.samples)
    return StrainField(phi / curve.h, curve.h)


def _stiffness(coeffs):
    return np.array([coeffs.c23, coeffs.c13, coeffs.c12])


def _elastic(phi, h, coeffs):
    d = phi / h - coeffs.k * E2
    return 0.5 * h * float(np.sum(_stiffness(coeffs) * d * d))


def elastic_energy(curve, coeffs):
    _, phi = _relative_rotations(curve.samples)
    return _elastic(phi, curve.h, coeffs)


def energy(curve, coeffs, f, bc):
    bc.check(curve.samples)
    _, phi = _relative_rotations(curve.samples)
    force = float(np.sum(curve.weights * curve.samples[:, 0, 0]))
    return _elastic(phi, curve.h, coeffs) - f * force


def _raw_gradient(R, h, w, coeffs, f):
    Q, phi = _relative_rotations(R)
    m = _stiffness(coeffs) * (phi / h - coeffs.k * E2)
    p = np.einsum("nji,nj->ni", right_jacobian_inv(phi), m)
    g = np.zeros((R.shape[0], 3))
    g[1:] += p
    g[:-1] -= np.einsum("nij,nj->ni", Q, p)
    # R^T e1 is the first row of R
    g -= f * w[:, None] * np.cross(E1, R[:, 0, :])
    return g


def gradient(curve, coeffs, f, bc):
    """dE along R_i exp(eps eta_i) is sum_i <g_i, eta_i> for admissible eta."""
    bc.check(curve.samples)
    g = _raw_gradient(curve.samples, curve.h, curve.weights, coeffs, f)
    return g * bc.free_mask(curve.samples.shape[0])


def gradient_norm(g, weights):
    """Max nodal density |g_i| / wt_i."""
    return float(np.max(np.linalg.norm(g, axis=1) / weights))


def el_residual(curve, coeffs, f, bc):
    """(interior, natural-bc) max norms of the strong equation

        flux' + w x flux = 2 f (R^T e1 x e1),   flux = 2 C (w - k e2).
    """
    if curve.n_elements < 8:
        raise ValueError(f"el_residual needs N >= 8, got {curve.n_elements}")
    om = strains(curve).omegas
    flux = 2.0 * _stiffness(coeffs) * (om - coeffs.k * E2)
    dflux = (flux[1:] - flux[:-1]) / curve.h
    om_node = 0.5 * (om[1:] + om[:-1])
    flux_node = 0.5 * (flux[1:] + flux[:-1])
    r = curve.samples[1:-1, 0, :]
    res = dflux + np.cross(om_node, flux_node) - 2.0 * f * np.cross(r, E1)
    interior = float(np.max(np.linalg.norm(res, axis=1)))
    natural = float(bc.natural_residual(flux[0], flux[-1]))
    return interior, natural


# ---------------------------------------------------------------------------
# Reference curves
# ---------------------------------------------------------------------------

def straight(L, N):
    return RotationCurve(np.tile(np.eye(3), (N + 1, 1, 1)), L)


def curved_beam(coeffs, L, N, R0=None):
    """R(x) = R0 exp(x hat(k e2)): zero elastic energy, the f = 0 minimizer."""
    R0 = _as_rotation(R0, "R0")
    xs = np.linspace(0.0, L, N + 1)
    return RotationCurve(R0 @ exp_skew(coeffs.k * E2, xs), L)


def random_curve(L, N, bc, rng, amplitude=INIT_AMPLITUDE, n_modes=3):
    """Smooth seeded perturbation R_i = base(x_i) exp(eta(x_i)) admissible for bc."""
    s = np.linspace(0.0, 1.0, N + 1)
    m = np.arange(1, n_modes + 1)
    decay = amplitude / m[:, None]
    a = rng.standard_normal((n_modes, 3)) * decay
    b = rng.standard_normal((n_modes, 3)) * decay
    both_ends = np.sin(np.pi * np.outer(s, m))          # vanish at s = 0 and 1
    start_only = np.sin(np.pi * np.outer(s, m - 0.5))   # vanish at s = 0
    free = np.cos(np.pi * np.outer(s, m))

    base = np.tile(np.eye(3), (N + 1, 1, 1))
    if isinstance(bc, Clamped):
        eta = start_only @ a
        base = np.broadcast_to(bc.R0, base.shape)
    elif isinstance(bc, ClampedClamped):
        eta = both_ends @ a
        base = bc.R0 @ exp_skew(log_rotation(bc.R0.T @ bc.RL), s)
    elif isinstance(bc, WeakClamped):
        eta = both_ends @ a
        eta[:, 0] += free @ b[:, 0]
    else:
        eta = both_ends @ a + free @ b
    return RotationCurve(base @ exp_skew(eta), L)


# ---------------------------------------------------------------------------
# Minimization
# ---------------------------------------------------------------------------

def _relative_energy(R, h, w, coeffs, f):
    """Energy + f sum(wt); keeps the force term small near R e1 = e1."""
    _, phi = _relative_rotations(R)
    return _elastic(phi, h, coeffs) + f * float(np.sum(w * (1.0 - R[:, 0, 0])))


def _sobolev_bands(w, h, stiffness, mass, free):
    """Banded (1, 1) form of stiffness/h * Laplacian + mass * diag(w), Dirichlet rows where not free."""
    n = w.shape[0]
    ab = np.zeros((3, n))
    diag = np.full(n, 2.0 * stiffness / h)
    diag[0] = diag[-1] = stiffness / h
    ab[1] = diag + mass * w
    ab[0, 1:] = -stiffness / h
    ab[2, :-1] = -stiffness / h
    fixed = np.flatnonzero(~free)
    ab[1, fixed] = 1.0
    ab[0, fixed[fixed + 1 < n] + 1] = 0.0
    ab[2, fixed[fixed > 0] - 1] = 0.0
    return ab


def minimize(curve0, coeffs, f, bc, max_iter=MINIMIZE_MAX_ITER, step=ARMIJO_STEP,
             tol=MINIMIZE_TOL):
    """H1-preconditioned Riemannian descent with Armijo backtracking.

    Returns (curve, trace). Raises NoConvergence carrying the last iterate.
    """
    bc.check(curve0.samples)
    R = curve0.samples.copy()
    L, h, w = curve0.length_L, curve0.h, curve0.weights
    free = bc.free_mask(R.shape[0])
    offset = f * float(np.sum(w))

    mass = coeffs.c_max * coeffs.k ** 2 + abs(f) + coeffs.c_max / L ** 2
    bands = [_sobolev_bands(w, h, coeffs.c_max, mass, free[:, c]) for c in range(3)]

    trace = EnergyTrace()
    E = _relative_energy(R, h, w, coeffs, f)
    gn = np.inf
    for it in range(max_iter + 1):
        g = _raw_gradient(R, h, w, coeffs, f) * free
        gn = gradient_norm(g, w)
        trace.energies.append(E - offset)
        trace.grad_norms.append(gn)
        if gn <= tol:
            trace.converged = True
            break
        if it == max_iter:
            break
        d = np.column_stack([solve_banded((1, 1), bands[c], -g[:, c]) for c in range(3)])
        d *= free
        slope = float(np.sum(g * d))

        alpha = step
        for _ in range(ARMIJO_MAX_HALVINGS):
            trial = R @ exp_skew(alpha * d)
            try:
                E_trial = _relative_energy(trial, h, w, coeffs, f)
            except (FrameJump, AngleNearPi):
                E_trial = np.inf
            if E_trial <= E + ARMIJO_SLOPE * alpha * slope:
                break
            alpha *= ARMIJO_SHRINK
        else:
            curve = RotationCurve(R, L)
            raise NoConvergence(
                it, gn, f"line search stalled at iteration {it} (gradient norm {gn:.3e})",
                result=(curve, trace))

        R, E = trial, E_trial
        trace.steps.append(alpha)
        if it % 200 == 0:
            logger.debug("iter %d: E=%.12g |g|=%.3e step=%.3g", it, E - offset, gn, alpha)

    curve = RotationCurve(R, L)
    if not trace.converged:
        raise NoConvergence(trace.iterations, gn, result=(curve, trace))
    logger.info("Converged after %d iterations, E=%.12g, |g|=%.3e",
                trace.iterations, trace.energies[-1], gn)
    return curve, trace


# ---------------------------------------------------------------------------
# Second variation at the straight rod
# ---------------------------------------------------------------------------

def second_variation_dofs(bc, N):
    """Flat node-major indices 3 i + c kept in the second-variation test space.

    ClampedClamped drops both end nodes. WeakClamped drops node 0 entirely
    (w1(0) = 0 fixes the twist gauge) and components 2, 3 at x = L.
    """
    keep = np.ones((N + 1, 3), dtype=bool)
    if isinstance(bc, ClampedClamped):
        keep[0] = keep[-1] = False
    elif isinstance(bc, WeakClamped):
        keep[0] = False
        keep[-1, 1:] = False
    else:
        raise UnsupportedBc(
            f"the straight rod is a critical point only for clamped-clamped or weak-clamped, got {bc.tag}")
    return np.flatnonzero(keep.ravel())


def second_variation_parts(coeffs, L, bc, N):
    """(K0, mask) with K(f) = K0 + f diag(mask) on the kept dofs."""
    if isinstance(bc, ClampedClamped) and not bc.is_identity:
        raise UnsupportedBc("clamped-clamped second variation needs R0 = RL = I")
    keep = second_variation_dofs(bc, N)
    if L is None:
        L = coeffs.length_L
    h = L / N
    n = 3 * (N + 1)
    stiff = _stiffness(coeffs)
    ck = coeffs.c13 * coeffs.k

    left = 3 * np.arange(N)
    right = left + 3
    K0 = np.zeros((n, n))
    for c in range(3):
        np.add.at(K0, (left + c, left + c), stiff[c] / h)
        np.add.at(K0, (right + c, right + c), stiff[c] / h)
        np.add.at(K0, (left + c, right + c), -stiff[c] / h)
        np.add.at(K0, (right + c, left + c), -stiff[c] / h)
    # -c13 k (w1 w3' - w1' w3) per element: -c13 k (a0 b1 - a1 b0)
    np.add.at(K0, (left, right + 2), -0.5 * ck)
    np.add.at(K0, (right + 2, left), -0.5 * ck)
    np.add.at(K0, (right, left + 2), 0.5 * ck)
    np.add.at(K0, (left + 2, right), 0.5 * ck)

    w = _trapezoid_weights(N, h)
    mask = np.zeros((N + 1, 3))
    mask[:, 1] = w
    mask[:, 2] = w
    return K0[np.ix_(keep, keep)], mask.ravel()[keep]


def second_variation_matrix(coeffs, f, L, bc, N):
    K0, mask = second_variation_parts(coeffs, L, bc, N)
    return K0 + f * np.diag(mask)


def lumped_mass(L, bc, N):
    """Trapezoid mass on every kept component."""
    w = np.repeat(_trapezoid_weights(N, L / N), 3)
    return w[second_variation_dofs(bc, N)]


def band_lower(K, u=BANDWIDTH):
    """Lower banded storage ab[d, j] = K[j + d, j] for eig_banded."""
    n = K.shape[0]
    ab = np.zeros((u + 1, n))
    for d in range(u + 1):
        ab[d, :n - d] = np.diagonal(K, -d)
    return ab


def lowest_banded_eigenvalue(ab):
    vals = eig_banded(ab, lower=True, eigvals_only=True, select="i", select_range=(0, 0))
    return float(vals[0])


def lowest_eigenvalue(K, u=BANDWIDTH):
    return lowest_banded_eigenvalue(band_lower(K, u))
