"""Exception types shared across the package.

Validation problems raise plain ``ValueError``; anything that fails for
numerical reasons (non-convergence, divergence, chattering) derives from
``NumericalFailure`` so callers such as the CLI can map the two classes to
different exit codes.
"""


class NumericalFailure(RuntimeError):
    """A computation failed numerically rather than through bad inputs."""


class DareError(NumericalFailure):
    """Discrete Riccati solve did not converge (likely unstabilizable pair)."""


class SimulationError(NumericalFailure):
    """Integration produced a non-finite state or derivative."""


class ChatteringError(SimulationError):
    """More than the allowed number of guard events fired inside one step."""


class EventLocationError(SimulationError):
    """Bisection on a guard crossing failed to converge."""


class FixedPointError(NumericalFailure):
    """Newton iteration on a return map failed to converge."""


class RolloutDivergenceError(NumericalFailure):
    """Linear model rollout left the trust region (unstable fit)."""
