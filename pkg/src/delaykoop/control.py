"""State-history augmented LQR: gain synthesis and closed-loop stepping.

The gain acts on the stacked error window [x_{k-N} - xd_{k-N}; ...;
x_k - xd_k] against a recorded reference; only the newest control block of
the stacked correction is applied at each step. Window alignment uses the
absolute sample index into the reference (no re-synchronization after a
disturbance).
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .hybrid import Controller, Trajectory
from .linalg import lqr_gain


def synthesize_gain(a, b, q_weights=1.0, r_weights=1.0, method: str = "auto") -> np.ndarray:
    """LQR gain for the extracted (A, B) blocks under diagonal weights.

    ``q_weights``/``r_weights`` may be scalars or vectors matching the
    stacked state/control window sizes. The closed loop A - BK is verified
    strictly stable by :func:`delaykoop.linalg.lqr_gain`.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    q_diag = np.broadcast_to(np.asarray(q_weights, dtype=float), (a.shape[0],))
    r_diag = np.broadcast_to(np.asarray(r_weights, dtype=float), (b.shape[1],))
    if np.any(q_diag < 0):
        raise ValueError("q_weights must be >= 0")
    if np.any(r_diag <= 0):
        raise ValueError("r_weights must be > 0")
    return lqr_gain(a, b, np.diag(q_diag), np.diag(r_diag), method=method)


class HistoryLqrController:
    """Tracking controller fed by a ring buffer of the last N+1 true states.

    Feed states during warm-up with :meth:`observe`; once the buffer holds
    N+1 samples, :meth:`control_step` returns the reference control plus
    the newest block of the stacked LQR correction.
    """

    def __init__(self, gain: np.ndarray, reference: Trajectory, n: int, m: int, N: int):
        gain = np.asarray(gain, dtype=float)
        expected = (m * (N + 1), n * (N + 1))
        if gain.shape != expected:
            raise ValueError(f"gain has shape {gain.shape}, expected {expected}")
        if reference.n != n or reference.m != m:
            raise ValueError(
                f"reference dims ({reference.n}, {reference.m}) do not match ({n}, {m})"
            )
        self.gain = gain
        self.reference = reference
        self.n = n
        self.m = m
        self.N = N
        self._history: deque[np.ndarray] = deque(maxlen=N + 1)
        self._history_ks: deque[int] = deque(maxlen=N + 1)

    @property
    def warm(self) -> bool:
        return len(self._history) == self.N + 1

    def observe(self, k: int, x: np.ndarray) -> None:
        """Push a true state into the history buffer without computing control."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"state has shape {x.shape}, expected ({self.n},)")
        if self._history_ks and k != self._history_ks[-1] + 1:
            raise ValueError(
                f"states must be observed in sample order; got k={k} after "
                f"k={self._history_ks[-1]}"
            )
        self._history.append(x)
        self._history_ks.append(k)

    def reference_control(self, k: int) -> np.ndarray:
        if not 0 <= k < self.reference.num_samples:
            raise ValueError(f"reference exhausted at sample {k}")
        return self.reference.controls[:, k].copy()

    def control_step(self, k: int, x: np.ndarray) -> np.ndarray:
        """Control at sample k: reference feedforward plus history-LQR correction."""
        self.observe(k, x)
        if not self.warm:
            raise ValueError(
                f"history buffer holds {len(self._history)} of {self.N + 1} states; "
                "warm up with the nominal controller (observe) for the first N samples"
            )
        if k < self.N or k >= self.reference.num_samples:
            raise ValueError(
                f"sample {k} outside the controllable range "
                f"[{self.N}, {self.reference.num_samples - 1}]"
            )
        ref_states = self.reference.states[:, k - self.N : k + 1]
        window = np.concatenate(list(self._history))
        xhat = window - ref_states.T.reshape(-1)  # oldest first, matching the gain
        uhat = -self.gain @ xhat
        return self.reference_control(k) + uhat[-self.m :]


def make_tracking_controller(ctrl: HistoryLqrController) -> Controller:
    """Closed-loop controller: nominal feedforward while the buffer warms, then LQR."""

    def controller(k: int, x: np.ndarray) -> np.ndarray:
        if k < ctrl.N:
            ctrl.observe(k, x)
            return ctrl.reference_control(k)
        return ctrl.control_step(k, x)

    return controller
