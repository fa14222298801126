"""Benchmark hybrid systems: wall-bouncing pendulum and the simplest walker.

Both systems carry viscous damping that the nominal controller cancels, so
the nominal closed loop behaves as the conservative system whose periodic
orbit we identify and stabilize. Pendulum state is [theta, omega]; walker
state is [theta, phi, thetadot, phidot] with theta the stance-leg angle,
phi the inter-leg angle, and time nondimensionalized by sqrt(l/g).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FixedPointError
from .hybrid import (
    Controller,
    GuardedReset,
    HybridSystemSpec,
    flow_to_event,
    simulate,
)

# Ramp slope at which the walker's period-one gait has stance angle 0.162
# right after foot strike; frozen from calibrate_walker_slope() at dt=1e-2.
DEFAULT_WALKER_SLOPE = 4.7198e-3


@dataclass(frozen=True)
class PendulumParams:
    """Pendulum constants; ``kick`` is the speed jump applied at the walls."""

    kick: float
    g: float = 9.81
    length: float = 1.0
    damping: float = 0.1
    theta_star: float = 0.5

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError(f"length must be positive, got {self.length}")
        if self.damping < 0:
            raise ValueError(f"damping must be >= 0, got {self.damping}")
        if self.theta_star <= 0:
            raise ValueError(f"theta_star must be positive, got {self.theta_star}")
        if self.kick <= 0:
            raise ValueError(f"kick must be positive, got {self.kick}")


@dataclass(frozen=True)
class WalkerParams:
    """Simplest-walker constants (nondimensional).

    ``arming_theta`` excludes the spurious leg-crossing zero of the
    foot-strike guard near mid-stance: the guard is armed only once the
    stance leg has rotated past it.
    """

    slope: float = DEFAULT_WALKER_SLOPE
    damping1: float = 0.5
    damping2: float = 0.5
    arming_theta: float = -0.05

    def __post_init__(self):
        if self.slope < 0:
            raise ValueError(f"slope must be >= 0, got {self.slope}")
        if self.damping1 < 0 or self.damping2 < 0:
            raise ValueError("damping coefficients must be >= 0")


def make_pendulum(p: PendulumParams) -> HybridSystemSpec:
    """Damped pendulum bouncing between walls at +-theta_star.

    Hitting a wall applies an instantaneous opposite kick to the angular
    speed: at -theta_star (moving negative) omega jumps by +kick, at
    +theta_star (moving positive) by -kick.
    """
    g_over_l = p.g / p.length
    lam = p.damping
    ts = p.theta_star
    kick = p.kick

    def dynamics(x, u):
        return np.array([x[1], -g_over_l * np.sin(x[0]) - lam * x[1] + u[0]])

    guards = (
        GuardedReset(
            condition=lambda x: x[0] + ts,
            armed=lambda x: x[1] < 0,
            reset=lambda x: np.array([-ts, x[1] + kick]),
            label="wall-",
        ),
        GuardedReset(
            condition=lambda x: x[0] - ts,
            armed=lambda x: x[1] > 0,
            reset=lambda x: np.array([ts, x[1] - kick]),
            label="wall+",
        ),
    )
    return HybridSystemSpec(
        n=2,
        m=1,
        dynamics=dynamics,
        guards=guards,
        params={
            "g": p.g,
            "length": p.length,
            "damping": lam,
            "theta_star": ts,
            "kick": kick,
        },
        state_labels=("theta", "omega"),
        control_labels=("u",),
    )


def make_walker(p: WalkerParams) -> HybridSystemSpec:
    """Simplest walker on a ramp: single-stance flow plus leg-exchange reset.

    Foot strike fires when phi - 2*theta crosses zero with the stance leg
    past the arming angle; the reset swaps leg roles and applies the
    angular-momentum-conserving velocity map.
    """
    gamma = p.slope
    lam1, lam2 = p.damping1, p.damping2
    arm_at = p.arming_theta

    def dynamics(x, u):
        th, ph, thd, phd = x
        s = np.sin(th - gamma)
        thdd = s - lam1 * thd + u[0]
        phdd = s + (thd * thd - np.cos(th - gamma)) * np.sin(ph) - lam2 * phd + u[1]
        return np.array([thd, phd, thdd, phdd])

    def reset(x):
        th, thd = x[0], x[2]
        c = np.cos(2.0 * th)
        return np.array([-th, -2.0 * th, c * thd, (1.0 - c) * c * thd])

    guard = GuardedReset(
        condition=lambda x: x[1] - 2.0 * x[0],
        armed=lambda x: x[0] < arm_at,
        reset=reset,
        label="strike",
    )
    return HybridSystemSpec(
        n=4,
        m=2,
        dynamics=dynamics,
        guards=(guard,),
        params={
            "slope": gamma,
            "damping1": lam1,
            "damping2": lam2,
            "arming_theta": arm_at,
        },
        state_labels=("theta", "phi", "thetadot", "phidot"),
        control_labels=("u1", "u2"),
    )


def nominal_controller(params) -> Controller:
    """Damping-canceling state feedback for either benchmark system."""
    if isinstance(params, PendulumParams):
        lam = params.damping
        return lambda k, x: np.array([lam * x[1]])
    if isinstance(params, WalkerParams):
        lam1, lam2 = params.damping1, params.damping2
        return lambda k, x: np.array([lam1 * x[2], lam2 * x[3]])
    raise TypeError(f"no nominal controller for {type(params).__name__}")


def _zero_controller(k, x):
    return np.zeros(0)


def _undamped_pendulum_probe(g: float, length: float, kick: float | None, theta_star: float):
    """Conservative pendulum, optionally with the kicked wall guards.

    This is the exact dynamics under ideal damping cancellation. Using it
    for limit-cycle construction keeps the computed kick on the
    energy-conservation identity instead of inheriting zero-order-hold lag.
    """
    g_over_l = g / length

    def dynamics(x, u):
        return np.array([x[1], -g_over_l * np.sin(x[0])])

    if kick is None:
        reset_neg = lambda x: np.array([-theta_star, x[1]])
        reset_pos = lambda x: np.array([theta_star, x[1]])
    else:
        reset_neg = lambda x: np.array([-theta_star, x[1] + kick])
        reset_pos = lambda x: np.array([theta_star, x[1] - kick])
    guards = (
        GuardedReset(lambda x: x[0] + theta_star, lambda x: x[1] < 0, reset_neg),
        GuardedReset(lambda x: x[0] - theta_star, lambda x: x[1] > 0, reset_pos),
    )
    return HybridSystemSpec(n=2, m=0, dynamics=dynamics, guards=guards)


def pendulum_limit_cycle(
    g: float,
    length: float,
    x0,
    theta_star: float,
    dt: float = 1e-2,
    t_max: float = 10.0,
) -> tuple[float, float]:
    """Kick magnitude and period of the bouncing-pendulum limit cycle.

    Simulates the conservative swing from ``x0`` to its first crossing of
    |theta| = theta_star, sets kick = 2|omega| there, then measures the
    period of the resulting two-bounce orbit. Raises ``ValueError`` naming
    the attained amplitude if theta_star is never reached.
    """
    if theta_star <= 0:
        raise ValueError(f"theta_star must be positive, got {theta_star}")
    x0 = np.asarray(x0, dtype=float)
    probe = _undamped_pendulum_probe(g, length, kick=None, theta_star=theta_star)
    try:
        _, _, x_cross, guard_id = flow_to_event(
            probe, x0, _zero_controller, dt, n_events=1, t_max=t_max
        )
    except Exception:
        free = HybridSystemSpec(n=2, m=0, dynamics=probe.dynamics)
        swing = simulate(free, x0, _zero_controller, duration=t_max, dt=dt)
        reached = float(np.max(np.abs(swing.states[0])))
        raise ValueError(
            f"theta_star={theta_star} is unreachable from {x0.tolist()}; "
            f"max |theta| attained is {reached:.6f}"
        ) from None

    kick = 2.0 * abs(x_cross[1])
    cycle = _undamped_pendulum_probe(g, length, kick=kick, theta_star=theta_star)
    x_start = cycle.guards[guard_id - 1].reset(x_cross)
    period, _, _, _ = flow_to_event(
        cycle, x_start, _zero_controller, dt, n_events=2, t_max=t_max
    )
    return kick, period


def poincare_map(
    spec: HybridSystemSpec,
    x0,
    controller: Controller,
    dt: float = 1e-2,
    n_events: int = 1,
    t_max: float = 10.0,
) -> tuple[np.ndarray, float]:
    """Return map to the post-reset section: next post-event state and elapsed time."""
    t_event, x_post, _, _ = flow_to_event(spec, x0, controller, dt, n_events, t_max)
    return x_post, t_event


@dataclass(frozen=True)
class FixedPoint:
    """Accepted fixed point of a return map."""

    x_star: np.ndarray
    period: float
    residual: float
    iterations: int


def find_fixed_point(
    spec: HybridSystemSpec,
    x_guess,
    controller: Controller,
    dt: float = 1e-2,
    free_indices=None,
    n_events: int = 1,
    tol: float = 1e-10,
    max_iter: int = 50,
    fd_step: float = 1e-6,
    t_max: float = 10.0,
    cond_limit: float = 1e12,
) -> FixedPoint:
    """Newton iteration on r(x) = P(x) - x with a forward-difference Jacobian.

    Components outside ``free_indices`` (default: all) are held at their
    guess values. Converges when ||r||_inf < tol.
    """
    x = np.asarray(x_guess, dtype=float).copy()
    if x.shape != (spec.n,):
        raise ValueError(f"x_guess has shape {x.shape}, expected ({spec.n},)")
    free = np.arange(spec.n) if free_indices is None else np.asarray(free_indices, dtype=int)

    def residual(y):
        x1, period = poincare_map(spec, y, controller, dt, n_events, t_max)
        return (x1 - y)[free], period

    r, period = residual(x)
    for it in range(max_iter + 1):
        res = float(np.max(np.abs(r)))
        if res < tol:
            return FixedPoint(x_star=x, period=period, residual=res, iterations=it)
        if it == max_iter:
            break
        jac = np.empty((free.size, free.size))
        for j, idx in enumerate(free):
            xp = x.copy()
            xp[idx] += fd_step
            rp, _ = residual(xp)
            jac[:, j] = (rp - r) / fd_step
        cond = np.linalg.cond(jac)
        if not np.isfinite(cond) or cond > cond_limit:
            raise FixedPointError(
                f"return-map Jacobian is numerically singular (cond={cond:.3g})"
            )
        x[free] += np.linalg.solve(jac, -r)
        r, period = residual(x)
    raise FixedPointError(
        f"Newton did not reach ||r||_inf < {tol} in {max_iter} iterations "
        f"(final residual {res:.3g})"
    )


def default_walker_guess(slope: float) -> np.ndarray:
    """Continuation seed for the period-one gait, from small-slope scaling.

    Stance angle grows as slope^(1/3); the post-strike rates follow from
    the step-period asymptote and the reset map.
    """
    th = 0.963 * slope ** (1.0 / 3.0)
    thd = -1.015 * th
    return np.array([th, 2.0 * th, thd, (1.0 - np.cos(2.0 * th)) * thd])


def calibrate_walker_slope(
    target_theta: float = 0.162,
    bracket: tuple[float, float] = (3e-3, 7e-3),
    dt: float = 1e-2,
    damping1: float = 0.5,
    damping2: float = 0.5,
    theta_tol: float = 1e-10,
) -> tuple[float, FixedPoint]:
    """Solve for the ramp slope whose gait has the target post-strike stance angle.

    Scalar bisection with secant acceleration on theta0(slope), warm-starting
    each fixed-point solve from the previous slope's solution.
    """
    seed: np.ndarray | None = None

    def solve_at(gamma: float) -> FixedPoint:
        nonlocal seed
        p = WalkerParams(slope=gamma, damping1=damping1, damping2=damping2)
        spec = make_walker(p)
        guess = default_walker_guess(gamma) if seed is None else seed
        fp = find_fixed_point(spec, guess, nominal_controller(p), dt=dt)
        seed = fp.x_star.copy()
        return fp

    lo, hi = bracket
    fp_lo = solve_at(lo)
    f_lo = fp_lo.x_star[0] - target_theta
    fp_hi = solve_at(hi)
    f_hi = fp_hi.x_star[0] - target_theta
    if f_lo * f_hi > 0:
        raise ValueError(
            f"bracket {bracket} does not straddle the target: theta0 is "
            f"{fp_lo.x_star[0]:.6f} at {lo} and {fp_hi.x_star[0]:.6f} at {hi}"
        )

    gamma, fp = lo, fp_lo
    for _ in range(80):
        # secant proposal, clipped into the bracket; fall back to midpoint
        denom = f_hi - f_lo
        gamma = hi - f_hi * (hi - lo) / denom if denom != 0 else 0.5 * (lo + hi)
        if not (lo < gamma < hi):
            gamma = 0.5 * (lo + hi)
        fp = solve_at(gamma)
        f_mid = fp.x_star[0] - target_theta
        if abs(f_mid) < theta_tol or (hi - lo) < 1e-15:
            return gamma, fp
        if f_lo * f_mid < 0:
            hi, f_hi = gamma, f_mid
        else:
            lo, f_lo = gamma, f_mid
    return gamma, fp
