"""Delay-embedded linear models fitted by least squares on Hankel pairs.

Snapshots z = [x; u] from a uniformly sampled trajectory are stacked into
block-Hankel matrices; the one-step operator L maps each delay window to
its shift. A permutation regroups the interleaved window into all states
followed by all controls, from which the (A, B) blocks of the error
dynamics are read off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RolloutDivergenceError
from .hybrid import Trajectory
from .linalg import DEFAULT_PINV_RTOL, pinv

ROLLOUT_NORM_LIMIT = 1e9


@dataclass(frozen=True)
class HankelParams:
    """Delay depth N and column count M+1 of the Hankel pair at sample period dt."""

    N: int
    M: int
    dt: float

    def __post_init__(self):
        if self.N < 1 or self.M < 1:
            raise ValueError(f"N and M must be >= 1, got N={self.N}, M={self.M}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def min_samples(self) -> int:
        return self.N + self.M + 2


@dataclass(frozen=True)
class KoopmanModel:
    """Fitted one-step operator with its reordered form and permutation."""

    n: int
    m: int
    N: int
    dt: float
    L: np.ndarray
    Lbar: np.ndarray
    P: np.ndarray

    @property
    def block_size(self) -> int:
        return self.n + self.m

    @property
    def side(self) -> int:
        return (self.n + self.m) * (self.N + 1)


def build_hankel_pair(
    traj: Trajectory, hp: HankelParams, start: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Block-Hankel matrices H0 (windows at ``start``) and H1 (shifted by one).

    Row-block r, column c of H0 is the snapshot z_{start+r+c}; H1 is the
    same construction one sample later. Each snapshot stacks state over
    control, so both matrices are (n+m)(N+1) x (M+1).
    """
    if start < 0:
        raise ValueError(f"start must be >= 0, got {start}")
    needed = start + hp.min_samples
    if traj.num_samples < needed:
        raise ValueError(
            f"trajectory has {traj.num_samples} samples but the Hankel pair needs "
            f"{needed} (start={start}, N={hp.N}, M={hp.M})"
        )
    z = np.vstack([traj.states, traj.controls])  # (n+m) x K
    p = z.shape[0]

    def hankel_at(s0: int) -> np.ndarray:
        h = np.empty((p * (hp.N + 1), hp.M + 1))
        for r in range(hp.N + 1):
            h[r * p : (r + 1) * p, :] = z[:, s0 + r : s0 + r + hp.M + 1]
        return h

    return hankel_at(start), hankel_at(start + 1)


def fit_L(h0: np.ndarray, h1: np.ndarray, rtol: float = DEFAULT_PINV_RTOL) -> np.ndarray:
    """Least-squares one-step operator L = H1 H0^+."""
    if h0.shape != h1.shape:
        raise ValueError(f"Hankel pair shapes differ: {h0.shape} vs {h1.shape}")
    return h1 @ pinv(h0, rtol)


def permutation_matrix(n: int, m: int, N: int) -> np.ndarray:
    """Permutation regrouping an interleaved delay window.

    Applied to a stacked window [x_0; u_0; ...; x_N; u_N], the result lists
    all states (time-ordered) then all controls (time-ordered).
    """
    if n < 1 or m < 0 or N < 0:
        raise ValueError(f"invalid dimensions n={n}, m={m}, N={N}")
    size = (n + m) * (N + 1)
    perm = np.zeros((size, size))
    for k in range(N + 1):
        for r in range(n):
            perm[k * n + r, k * (m + n) + r] = 1.0
        for s in range(m):
            perm[(N + 1) * n + k * m + s, k * (m + n) + n + s] = 1.0
    return perm


def reorder(L: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Similarity transform Lbar = P L P^T."""
    if L.shape[0] != L.shape[1] or L.shape != perm.shape:
        raise ValueError(f"size mismatch: L {L.shape}, P {perm.shape}")
    return perm @ L @ perm.T


def fit_model(traj: Trajectory, hp: HankelParams, rtol: float = DEFAULT_PINV_RTOL,
              start: int = 0) -> KoopmanModel:
    """Fit L on the trajectory's Hankel pair and package it with P and Lbar."""
    h0, h1 = build_hankel_pair(traj, hp, start)
    L = fit_L(h0, h1, rtol)
    perm = permutation_matrix(traj.n, traj.m, hp.N)
    return KoopmanModel(
        n=traj.n, m=traj.m, N=hp.N, dt=hp.dt, L=L, Lbar=reorder(L, perm), P=perm
    )


def extract_blocks(model: KoopmanModel) -> tuple[np.ndarray, np.ndarray]:
    """(A, B) blocks of the reordered operator: state rows against state/control columns."""
    nx = model.n * (model.N + 1)
    return model.Lbar[:nx, :nx].copy(), model.Lbar[:nx, nx:].copy()


def delay_window(traj: Trajectory, N: int, end: int) -> np.ndarray:
    """Interleaved window [z_{end-N}; ...; z_{end}] taken from a trajectory."""
    if end < N or end >= traj.num_samples:
        raise ValueError(
            f"window ending at sample {end} needs samples {end - N}..{end} "
            f"inside 0..{traj.num_samples - 1}"
        )
    return np.concatenate([traj.snapshot(k) for k in range(end - N, end + 1)])


def rollout_predict(model: KoopmanModel, window0: np.ndarray, steps: int) -> Trajectory:
    """Iterate the fitted operator on a seed window and emit predicted snapshots.

    The window advances as v <- L v; after each application the newest
    (n+m)-block of v is the predicted [x; u]. The returned trajectory's
    first sample is the seed window's final snapshot, so its time grid
    continues the source grid from there.
    """
    window0 = np.asarray(window0, dtype=float)
    if window0.shape != (model.side,):
        raise ValueError(f"window has shape {window0.shape}, expected ({model.side},)")
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    p = model.block_size
    states = np.empty((model.n, steps + 1))
    controls = np.empty((model.m, steps + 1))
    newest = window0[-p:]
    states[:, 0] = newest[: model.n]
    controls[:, 0] = newest[model.n :]
    v = window0
    for k in range(1, steps + 1):
        v = model.L @ v
        norm = float(np.linalg.norm(v))
        if not np.isfinite(norm) or norm > ROLLOUT_NORM_LIMIT:
            raise RolloutDivergenceError(
                f"rollout diverged at step {k} (||v|| = {norm:.3g}); unstable fit"
            )
        newest = v[-p:]
        states[:, k] = newest[: model.n]
        controls[:, k] = newest[model.n :]
    times = np.arange(steps + 1) * model.dt
    return Trajectory(dt=model.dt, times=times, states=states, controls=controls)
