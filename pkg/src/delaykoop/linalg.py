"""Dense-matrix primitives: SVD pseudo-inverse, discrete Riccati, LQR gain.

Everything here is a pure function of ndarray inputs. The heavy lifting
(SVD, eigenvalues) is delegated to LAPACK through numpy; the Riccati solver
is implemented here because the convergence criterion we need is the
Riccati residual itself, not an iterate difference.
"""

from __future__ import annotations

import numpy as np

from .errors import DareError

DEFAULT_PINV_RTOL = 1e-10
DARE_RESIDUAL_TOL = 1e-9
SYMMETRY_TOL = 1e-10

# Plain fixed-point iteration is quadratic work per pass and linear
# convergence; past this size the doubling recursion wins by orders of
# magnitude on the delay-embedded models.
_DOUBLING_SIZE_THRESHOLD = 64


def _as_matrix(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"{name} must be a nonempty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _require_square(a: np.ndarray, name: str) -> np.ndarray:
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def _require_symmetric(a: np.ndarray, name: str) -> np.ndarray:
    scale = 1.0 + np.linalg.norm(a, "fro")
    if np.linalg.norm(a - a.T, "fro") > SYMMETRY_TOL * scale:
        raise ValueError(f"{name} is not symmetric to tolerance {SYMMETRY_TOL}")
    return 0.5 * (a + a.T)


def pinv(a, rtol: float = DEFAULT_PINV_RTOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values sigma_i <= rtol * sigma_max are truncated to zero.
    """
    a = _as_matrix(a, "a")
    if rtol < 0:
        raise ValueError(f"rtol must be >= 0, got {rtol}")
    return np.linalg.pinv(a, rcond=rtol)


def spectral_radius(a) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    a = _require_square(_as_matrix(a, "a"), "a")
    return float(np.max(np.abs(np.linalg.eigvals(a))))


def _dare_rhs(a, b, q, r, p):
    """One application of the Riccati map P -> A'PA - A'PB (R+B'PB)^-1 B'PA + Q."""
    pb = p @ b
    s = r + b.T @ pb
    apb = a.T @ pb
    gain_term = apb @ np.linalg.solve(s, apb.T)
    return a.T @ p @ a - gain_term + q


def _dare_residual(a, b, q, r, p) -> float:
    return float(np.linalg.norm(p - _dare_rhs(a, b, q, r, p), "fro"))


def _solve_dare_iteration(a, b, q, r, tol, max_iter):
    p = q.copy()
    for _ in range(max_iter):
        fp = _dare_rhs(a, b, q, r, p)
        if np.linalg.norm(p - fp, "fro") < tol * (1.0 + np.linalg.norm(p, "fro")):
            return p
        p = 0.5 * (fp + fp.T)
    raise DareError(
        f"Riccati fixed-point iteration did not converge in {max_iter} iterations; "
        "the pair (a, b) is likely not stabilizable"
    )


def _solve_dare_doubling(a, b, q, r, tol, max_iter=200):
    """Structure-preserving doubling recursion; quadratic convergence."""
    n = a.shape[0]
    eye = np.eye(n)
    g = b @ np.linalg.solve(r, b.T)
    g = 0.5 * (g + g.T)
    h = q.copy()
    ak = a.copy()
    for _ in range(max_iter):
        w = eye + g @ h
        try:
            wa = np.linalg.solve(w, ak)
            wg = np.linalg.solve(w, g)
        except np.linalg.LinAlgError as exc:
            raise DareError(f"doubling recursion hit a singular system: {exc}") from exc
        h_next = h + ak.T @ np.linalg.solve(w.T, h @ ak)
        g = g + ak @ wg @ ak.T
        g = 0.5 * (g + g.T)
        ak = ak @ wa
        h_next = 0.5 * (h_next + h_next.T)
        delta = np.linalg.norm(h_next - h, "fro")
        h = h_next
        if delta < 1e-13 * (1.0 + np.linalg.norm(h, "fro")):
            if _dare_residual(a, b, q, r, h) < tol * (1.0 + np.linalg.norm(h, "fro")):
                return h
    raise DareError(
        f"Riccati doubling recursion did not converge in {max_iter} iterations; "
        "the pair (a, b) is likely not stabilizable"
    )


def solve_dare(a, b, q, r, max_iter: int = 100000, method: str = "auto") -> np.ndarray:
    """Stabilizing solution of P = A'PA - A'PB (R+B'PB)^-1 B'PA + Q.

    ``method`` is one of ``"iteration"`` (fixed point from P0 = Q),
    ``"doubling"``, or ``"auto"`` which picks the doubling recursion for
    systems above a size threshold. The returned P is symmetric and its
    Riccati residual satisfies ||P - f(P)||_F < 1e-9 (1 + ||P||_F).
    """
    a = _require_square(_as_matrix(a, "a"), "a")
    b = _as_matrix(b, "b")
    n = a.shape[0]
    if b.shape[0] != n:
        raise ValueError(f"b must have {n} rows, got shape {b.shape}")
    q = _require_symmetric(_require_square(_as_matrix(q, "q"), "q"), "q")
    r = _require_symmetric(_require_square(_as_matrix(r, "r"), "r"), "r")
    if q.shape[0] != n:
        raise ValueError(f"q must be {n}x{n}, got shape {q.shape}")
    if r.shape[0] != b.shape[1]:
        raise ValueError(f"r must be {b.shape[1]}x{b.shape[1]}, got shape {r.shape}")
    if np.any(np.linalg.eigvalsh(q) < -SYMMETRY_TOL * (1 + np.linalg.norm(q, "fro"))):
        raise ValueError("q must be positive semidefinite")
    if np.any(np.linalg.eigvalsh(r) <= 0):
        raise ValueError("r must be positive definite")

    if method == "auto":
        method = "iteration" if n <= _DOUBLING_SIZE_THRESHOLD else "doubling"
    if method == "iteration":
        p = _solve_dare_iteration(a, b, q, r, DARE_RESIDUAL_TOL, max_iter)
    elif method == "doubling":
        p = _solve_dare_doubling(a, b, q, r, DARE_RESIDUAL_TOL)
    else:
        raise ValueError(f"unknown method {method!r}")
    return 0.5 * (p + p.T)


def lqr_gain(a, b, q, r, method: str = "auto") -> np.ndarray:
    """Discrete LQR gain K = (R + B'PB)^-1 B'PA with P from :func:`solve_dare`.

    Raises :class:`DareError` if the closed loop A - BK is not strictly
    stable, which indicates a numerically failed solve.
    """
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    p = solve_dare(a, b, q, r, method=method)
    pb = p @ b
    k = np.linalg.solve(np.asarray(r, dtype=float) + b.T @ pb, pb.T @ a)
    rho = spectral_radius(a - b @ k)
    if rho >= 1.0:
        raise DareError(f"closed-loop spectral radius {rho:.6f} >= 1 after Riccati solve")
    return k
