"""Exception types raised by the solvers and the verifier."""


class BrachistochroneError(Exception):
    """Base class for all solver errors."""


class DegenerateEndpoints(BrachistochroneError):
    """Initial and final states lie on the same ray."""


class StepTooCoarse(BrachistochroneError):
    """The time step is too large for reliable fixed-step integration."""


class DensityTooLow(BrachistochroneError):
    """Bloch samples are too sparse to resolve equator crossings."""


class TargetUnreachable(BrachistochroneError):
    """No candidate solution passes through the requested target ray."""


class IndeterminateMultipliers(BrachistochroneError):
    """The least-squares system for the Lagrange multipliers is rank deficient."""


class NoConvergence(BrachistochroneError):
    """Shooting exhausted its restart budget above the infidelity tolerance."""


class ConstraintInfeasible(BrachistochroneError):
    """No initial Hamiltonian satisfies the constraint set."""
