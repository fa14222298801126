"""Hybrid-system simulation on a fixed sample grid.

Continuous flow is integrated with classical RK4 under zero-order-hold
control. Guard crossings are located inside a step by bisection, the reset
is applied, and integration resumes for the remaining step fraction, so
recorded samples always stay on the uniform time grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ChatteringError, EventLocationError, SimulationError

EVENT_CONDITION_TOL = 1e-10
EVENT_INTERVAL_TOL = 1e-12
MAX_EVENTS_PER_STEP = 10

Controller = Callable[[int, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GuardedReset:
    """Scalar guard with an arming predicate and an instantaneous reset map.

    An event fires when ``armed(x)`` holds at the start of a (sub)step and
    ``condition`` changes sign across it.
    """

    condition: Callable[[np.ndarray], float]
    armed: Callable[[np.ndarray], bool]
    reset: Callable[[np.ndarray], np.ndarray]
    label: str = ""


@dataclass(frozen=True)
class HybridSystemSpec:
    """Continuous vector field plus an ordered list of guarded resets."""

    n: int
    m: int
    dynamics: Callable[[np.ndarray, np.ndarray], np.ndarray]
    guards: tuple[GuardedReset, ...] = ()
    params: Mapping[str, float] = field(default_factory=dict)
    state_labels: tuple[str, ...] = ()
    control_labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"state dimension must be >= 1, got {self.n}")
        if self.m < 0:
            raise ValueError(f"control dimension must be >= 0, got {self.m}")


@dataclass(frozen=True)
class DisturbanceEntry:
    """One impulse: a state increment applied once at a trigger.

    Exactly one of ``at_time`` (grid time) or ``after_events`` (cumulative
    guard-event count) must be set.
    """

    delta: np.ndarray
    at_time: float | None = None
    after_events: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "delta", np.asarray(self.delta, dtype=float))
        if (self.at_time is None) == (self.after_events is None):
            raise ValueError("set exactly one of at_time or after_events")


@dataclass(frozen=True)
class DisturbanceSchedule:
    entries: tuple[DisturbanceEntry, ...] = ()


@dataclass
class Trajectory:
    """Uniformly sampled (time, state, control) log with guard-event marks.

    ``states`` is n x K and ``controls`` m x K with one column per sample;
    ``event_log`` holds (sample index, 1-based guard id) for the sample
    immediately following each reset.
    """

    dt: float
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    event_log: list[tuple[int, int]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @property
    def m(self) -> int:
        return self.controls.shape[0]

    @property
    def num_samples(self) -> int:
        return self.states.shape[1]

    def snapshot(self, k: int) -> np.ndarray:
        """Stacked [x; u] at sample k."""
        return np.concatenate([self.states[:, k], self.controls[:, k]])


def rk4_step(spec: HybridSystemSpec, x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step with the control held constant."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    f = spec.dynamics
    k1 = np.asarray(f(x, u), dtype=float)
    k2 = np.asarray(f(x + 0.5 * dt * k1, u), dtype=float)
    k3 = np.asarray(f(x + 0.5 * dt * k2, u), dtype=float)
    k4 = np.asarray(f(x + dt * k3, u), dtype=float)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise SimulationError(f"non-finite derivative near state {x!r} (dt={dt})")
    return out


def locate_event(
    spec: HybridSystemSpec,
    guard: GuardedReset,
    x_pre: np.ndarray,
    u: np.ndarray,
    t_pre: float,
    dt: float,
) -> tuple[float, np.ndarray]:
    """Bisect the step fraction until the guard condition is resolved.

    Requires ``armed(x_pre)`` and a sign change of the condition across the
    step (or the condition already on the boundary at ``x_pre``).
    """
    c_pre = float(guard.condition(x_pre))
    if abs(c_pre) < EVENT_CONDITION_TOL:
        return t_pre, np.array(x_pre, dtype=float)
    if not guard.armed(x_pre):
        raise ValueError("guard is not armed at x_pre")
    c_post = float(guard.condition(rk4_step(spec, x_pre, u, dt)))
    if c_pre * c_post > 0:
        raise ValueError(
            f"condition does not change sign across the step ({c_pre} -> {c_post})"
        )

    lo, hi = 0.0, 1.0
    x_mid = rk4_step(spec, x_pre, u, dt)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        x_mid = rk4_step(spec, x_pre, u, mid * dt)
        c_mid = float(guard.condition(x_mid))
        if not np.isfinite(c_mid):
            raise EventLocationError(f"guard condition non-finite at fraction {mid}")
        if abs(c_mid) < EVENT_CONDITION_TOL or (hi - lo) < EVENT_INTERVAL_TOL:
            return t_pre + mid * dt, x_mid
        if c_pre * c_mid > 0:
            lo = mid
        else:
            hi = mid
    raise EventLocationError("bisection did not converge on the guard crossing")


def _step_with_events(
    spec: HybridSystemSpec, x: np.ndarray, u: np.ndarray, dt: float
) -> tuple[np.ndarray, list[tuple[float, int, np.ndarray, np.ndarray]]]:
    """Advance one grid step, processing earliest-first guard crossings.

    Returns the end-of-step state and a list of events as
    (time offset into the step, guard index, pre-reset state, post-reset state).
    """
    events: list[tuple[float, int, np.ndarray, np.ndarray]] = []
    remaining = dt
    elapsed = 0.0
    while True:
        x_try = rk4_step(spec, x, u, remaining)
        best = None
        for gi, guard in enumerate(spec.guards):
            if not guard.armed(x):
                continue
            c_pre = float(guard.condition(x))
            if c_pre == 0.0:
                continue  # sitting on the boundary (just reset): not a crossing
            c_post = float(guard.condition(x_try))
            if c_pre * c_post < 0 or c_post == 0.0:
                if c_post == 0.0:
                    t_ev, x_ev = remaining, x_try
                else:
                    t_ev, x_ev = locate_event(spec, guard, x, u, 0.0, remaining)
                if best is None or t_ev < best[0]:
                    best = (t_ev, gi, x_ev)
        if best is None:
            return x_try, events

        t_ev, gi, x_ev = best
        x_plus = np.asarray(spec.guards[gi].reset(x_ev), dtype=float)
        if x_plus.shape != x_ev.shape:
            raise ValueError(
                f"reset of guard {gi + 1} returned shape {x_plus.shape}, "
                f"expected {x_ev.shape}"
            )
        events.append((elapsed + t_ev, gi, x_ev, x_plus))
        if len(events) > MAX_EVENTS_PER_STEP:
            raise ChatteringError(
                f"more than {MAX_EVENTS_PER_STEP} guard events within one step of {dt}"
            )
        elapsed += t_ev
        remaining -= t_ev
        x = x_plus
        if remaining <= 0.0:
            return x, events


def simulate(
    spec: HybridSystemSpec,
    x0: Sequence[float],
    controller: Controller,
    duration: float,
    dt: float,
    disturbance: DisturbanceSchedule | None = None,
) -> Trajectory:
    """March the uniform grid over [0, duration] under zero-order-hold control.

    Disturbance deltas are added to the state before the sample at which
    they trigger, so the recorded state already contains the jump. Events
    are logged against the sample immediately following the reset.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    num_steps = int(round(duration / dt))
    if num_steps < 1 or abs(num_steps * dt - duration) > 1e-9 * max(1.0, duration):
        raise ValueError(f"duration {duration} is not a positive multiple of dt {dt}")

    entries = list(disturbance.entries) if disturbance is not None else []
    for entry in entries:
        if entry.delta.shape != (spec.n,):
            raise ValueError(
                f"disturbance delta has shape {entry.delta.shape}, expected ({spec.n},)"
            )
    fired = [False] * len(entries)

    times = np.arange(num_steps + 1) * dt
    states = np.empty((spec.n, num_steps + 1))
    controls = np.empty((spec.m, num_steps + 1))
    event_log: list[tuple[int, int]] = []
    event_count = 0

    x = np.asarray(x0, dtype=float)
    if x.shape != (spec.n,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({spec.n},)")

    for k in range(num_steps + 1):
        for i, entry in enumerate(entries):
            if fired[i]:
                continue
            due = (
                entry.at_time is not None and times[k] >= entry.at_time - 1e-9
            ) or (entry.after_events is not None and event_count >= entry.after_events)
            if due:
                x = x + entry.delta
                fired[i] = True
        if not np.all(np.isfinite(x)):
            raise SimulationError(f"non-finite state at t={times[k]:.6g}")
        states[:, k] = x
        u = np.atleast_1d(np.asarray(controller(k, x), dtype=float))
        if u.shape != (spec.m,):
            raise ValueError(f"controller returned shape {u.shape}, expected ({spec.m},)")
        controls[:, k] = u
        if k == num_steps:
            break
        x, step_events = _step_with_events(spec, x, u, dt)
        for _, gi, _, _ in step_events:
            event_log.append((k + 1, gi + 1))
            event_count += 1

    return Trajectory(dt=dt, times=times, states=states, controls=controls, event_log=event_log)


def flow_to_event(
    spec: HybridSystemSpec,
    x0: Sequence[float],
    controller: Controller,
    dt: float,
    n_events: int = 1,
    t_max: float = 10.0,
) -> tuple[float, np.ndarray, np.ndarray, int]:
    """Integrate until the n-th guard event fires.

    Returns (event time, post-reset state, pre-reset state, 1-based guard id).
    Raises :class:`SimulationError` if no such event occurs before ``t_max``.
    """
    if n_events < 1:
        raise ValueError("n_events must be >= 1")
    x = np.asarray(x0, dtype=float)
    seen = 0
    k = 0
    while k * dt < t_max:
        u = np.atleast_1d(np.asarray(controller(k, x), dtype=float))
        x_next, step_events = _step_with_events(spec, x, u, dt)
        for t_off, gi, x_pre, x_post in step_events:
            seen += 1
            if seen == n_events:
                return k * dt + t_off, x_post, x_pre, gi + 1
        x = x_next
        k += 1
    raise SimulationError(
        f"guard event {n_events} did not occur within t_max={t_max} "
        f"(saw {seen} events); the trajectory may have left the orbit"
    )
