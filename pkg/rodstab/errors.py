"""Exception types raised by the rodstab modules.

Input problems derive from ValueError as well, so plain ``except ValueError``
keeps working for callers that do not care about the specific failure.
"""


class RodstabError(Exception):
    """Base class for every rodstab failure."""


class ConfigError(RodstabError, ValueError):
    """Invalid run configuration (CLI exit code 2)."""


# --- rotation group ---

class AngleNearPi(RodstabError, ValueError):
    """Logarithm requested for a rotation whose angle is too close to pi."""


class SingularInput(RodstabError, ValueError):
    """Polar projection of a matrix with non-positive determinant."""


class DegenerateAxis(RodstabError, ValueError):
    """No continuous frame exists for the requested first row (r = -e1)."""


# --- discrete rod ---

class FrameJump(RodstabError, ValueError):
    """Consecutive frames differ by more than a quarter turn."""


class BcViolation(RodstabError, ValueError):
    """Curve does not satisfy its boundary condition."""


class UnsupportedBc(RodstabError, ValueError):
    """Operation is not defined for the given boundary condition."""


class NoConvergence(RodstabError):
    """Minimizer hit its iteration limit."""

    def __init__(self, iterations, grad_norm, message=None, result=None):
        self.iterations = iterations
        self.grad_norm = grad_norm
        self.result = result            # (curve, trace) reached so far
        super().__init__(message or
                         f"no convergence after {iterations} iterations "
                         f"(gradient norm {grad_norm:.3e})")


# --- critical force / helices ---

class DegenerateCase(RodstabError, ValueError):
    """Two-dimensional kernel at the critical force."""


class RootNotBracketed(RodstabError, ArithmeticError):
    """Sign condition for the common zero x* did not hold."""


class BracketFailure(RodstabError, ArithmeticError):
    """Smallest eigenvalue has the same sign at both bracket ends."""


class NoRealRoot(RodstabError, ArithmeticError):
    """Helix polynomial has no admissible real root."""


class ZeroForce(RodstabError, ValueError):
    """Flat helices need a non-zero force."""
