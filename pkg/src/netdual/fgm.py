"""Nesterov's constant step scheme II (fast gradient method).

The same alpha/beta recurrence drives the centralized solver below and every
distributed variant in :mod:`netdual.dualnet`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class FgmDivergence(FloatingPointError):
    """Raised when the gradient oracle returns non-finite values."""


def initial_alpha(q: float) -> float:
    """Root in (0, 1) of ``(a^2 - q) / (1 - a) = 1``."""
    if not 0.0 <= q < 1.0:
        raise ValueError(f"q must lie in [0, 1), got {q}")
    return 0.5 * (math.sqrt(5.0 + 4.0 * q) - 1.0)


def alpha_step(alpha: float, q: float) -> tuple[float, float]:
    """Advance the momentum recurrence by one step.

    Solves ``a^2 = (1 - a) * alpha^2 + q * a`` for its root in (0, 1) and
    returns it together with ``beta = alpha (1 - alpha) / (alpha^2 + a)``.
    """
    a2 = alpha * alpha
    b = a2 - q
    disc = math.sqrt(b * b + 4.0 * a2)
    # both branches are the positive root; pick the cancellation-free one
    nxt = 2.0 * a2 / (b + disc) if b > 0 else 0.5 * (disc - b)
    beta = alpha * (1.0 - alpha) / (a2 + nxt)
    return nxt, beta


def momentum_schedule(q: float, steps: int) -> np.ndarray:
    """The first ``steps`` beta coefficients for a run started at ``initial_alpha(q)``."""
    alpha = initial_alpha(q)
    betas = np.empty(steps)
    for k in range(steps):
        alpha, betas[k] = alpha_step(alpha, q)
    return betas


@dataclass(frozen=True)
class FgmParams:
    q: float
    step: float
    alpha0: float = field(default=None)

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.alpha0 is None:
            object.__setattr__(self, "alpha0", initial_alpha(self.q))
        elif not 0.0 < self.alpha0 < 1.0:
            raise ValueError("alpha0 must lie in (0, 1)")

    @classmethod
    def for_function(cls, mu: float, L: float) -> "FgmParams":
        """Parameters for a ``mu``-strongly convex, ``L``-smooth objective."""
        return cls(q=mu / L, step=1.0 / L)


@dataclass
class FgmState:
    x: np.ndarray
    y_tilde: np.ndarray
    alpha: float
    k: int = 0


@dataclass
class FgmTrajectory:
    xs: list = field(default_factory=list)
    ys: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)


def fgm_step(state: FgmState, grad: np.ndarray, params: FgmParams) -> FgmState:
    """One iteration given the gradient at ``state.y_tilde``."""
    x_next = state.y_tilde - params.step * grad
    alpha_next, beta = alpha_step(state.alpha, params.q)
    y_next = x_next + beta * (x_next - state.x)
    return FgmState(x_next, y_next, alpha_next, state.k + 1)


def fgm_minimize(grad_oracle, params: FgmParams, x0, max_iters: int = 1000,
                 grad_tol: float | None = None, keep_trajectory: bool = True):
    """Minimize a smooth strongly convex function.

    Parameters
    ----------
    grad_oracle : callable
        ``x -> gradient``.
    params : FgmParams
    x0 : array_like
        Starting point; the extrapolated sequence starts at the same point.
    max_iters : int
        Iteration cap (the default stopping rule).
    grad_tol : float, optional
        Stop early once the gradient at the extrapolated point has norm at
        most ``grad_tol``.
    keep_trajectory : bool
        Record every iterate. Turn off for long reference solves.

    Returns
    -------
    x : ndarray
        Last iterate. When stopping on ``grad_tol`` this is the extrapolated
        point whose gradient passed the test.
    trajectory : FgmTrajectory
    """
    x0 = np.array(x0, dtype=float)
    state = FgmState(x0, x0.copy(), params.alpha0)
    traj = FgmTrajectory()
    if keep_trajectory:
        traj.xs.append(state.x)
        traj.ys.append(state.y_tilde)
        traj.alphas.append(state.alpha)
    for _ in range(max_iters):
        g = np.asarray(grad_oracle(state.y_tilde), dtype=float)
        if not np.all(np.isfinite(g)):
            raise FgmDivergence(f"non-finite gradient at iteration {state.k}")
        gnorm = float(np.linalg.norm(g))
        traj.grad_norms.append(gnorm)
        if grad_tol is not None and gnorm <= grad_tol:
            return state.y_tilde, traj
        state = fgm_step(state, g, params)
        if keep_trajectory:
            traj.xs.append(state.x)
            traj.ys.append(state.y_tilde)
            traj.alphas.append(state.alpha)
    return state.x, traj
