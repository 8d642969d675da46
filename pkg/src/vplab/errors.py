"""Exception types shared across the package."""


class VplabError(Exception):
    """Base class for all package errors."""


class ValidationError(VplabError):
    """Invalid argument or object state."""


class BoundaryDecayError(VplabError):
    """Field does not decay at the velocity-grid boundary.

    Carries the offending boundary residual so callers can report it.
    """

    def __init__(self, residual, tol):
        self.residual = float(residual)
        self.tol = float(tol)
        super().__init__(
            f"boundary residual {self.residual:.3e} exceeds {self.tol:.1e}; "
            "aliasing would corrupt the spectral operator"
        )


class UnresolvableBumpError(ValidationError):
    """Requested velocity-space feature is below the grid resolution."""


class QuadratureConvergenceError(VplabError):
    """An integral failed its refinement-stability check."""


class DegenerateProfileError(VplabError):
    """Projected derivative vanishes identically; critical set undefined."""


class BracketError(VplabError):
    """Period bracket not established for the wave construction."""

    def __init__(self, target, t_lo, t_hi):
        self.target = float(target)
        self.t_lo = float(t_lo)
        self.t_hi = float(t_hi)
        super().__init__(
            f"period bracket failure: target {target:.6g} not inside "
            f"[{t_lo:.6g}, {t_hi:.6g}]"
        )


class AmplitudeTooLargeError(VplabError):
    """Orbit amplitude left the center basin of the bifurcation ODE."""


class PenroseUnstableError(VplabError):
    """Profile fails the Penrose stability condition; decay computation refused."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class RefinementCapError(VplabError):
    """Automatic grid refinement hit its cap without meeting the tolerance."""
