"""Reference solutions and (epsilon, epsilon~) certificates.

A stacked point ``x`` is an (eps, eps~)-solution when

    F(x) - F(x*) <= eps      and      ||sqrt(W) x||_2 <= eps~.

The gap is signed: infeasible candidates may undercut ``F(x*)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dualnet import AlgoConfig, RunTrace
from .fgm import FgmParams, fgm_minimize
from .graph import Topology, consensus_residual, laplacian, sqrt_laplacian_pinv
from .problems import EntropyAgent, QuadraticAgent, SeparableObjective, local_minimizer


class ReferenceSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReferenceSolution:
    """Centralized solution data used to certify and parametrize runs.

    ``y_star`` is the minimal-norm solution of ``sqrt(W) y = grad F(x*)``
    (tangent part on the simplex), stored as an ``(m, n)`` array.
    """

    x_star: np.ndarray
    f_star: float
    y_star: np.ndarray
    R: float
    R_x: float
    R_w: float
    x_local: np.ndarray
    grad_norm: float
    problem: SeparableObjective = field(repr=False, compare=False)

    @property
    def x_stacked(self):
        return np.tile(self.x_star, (self.y_star.shape[0], 1))


@dataclass(frozen=True)
class SolutionCertificate:
    primal_gap: float
    consensus_residual: float
    epsilon: float
    epsilon_tilde: float

    @property
    def satisfied(self) -> bool:
        return self.primal_gap <= self.epsilon and self.consensus_residual <= self.epsilon_tilde

    def as_dict(self):
        return {
            "primal_gap": self.primal_gap,
            "consensus_residual": self.consensus_residual,
            "epsilon": self.epsilon,
            "epsilon_tilde": self.epsilon_tilde,
            "satisfied": self.satisfied,
        }


@dataclass(frozen=True)
class BoundReport:
    bound_N: int
    first_certified: int | None
    rounds_to_certificate: int | None
    certified_at_bound: bool

    @property
    def violation(self) -> bool:
        return not self.certified_at_bound

    @property
    def ratio(self) -> float:
        if self.first_certified is None:
            return math.inf
        return self.first_certified / self.bound_N


def _laplacian_of(graph):
    return laplacian(graph) if isinstance(graph, Topology) else np.asarray(graph, dtype=float)


def _consensus_minimizer(problem: SeparableObjective, tol):
    agents = problem.agents
    if all(isinstance(a, QuadraticAgent) for a in agents):
        P = sum(a.P for a in agents)
        b = sum(a.b for a in agents)
        x, *_ = np.linalg.lstsq(P, b, rcond=None)
        if np.linalg.norm(P @ x - b) > 1e-9 * (1.0 + np.linalg.norm(b)):
            raise ReferenceSolveError("sum of quadratics is unbounded below")
        return x
    if all(isinstance(a, EntropyAgent) for a in agents):
        logx = np.mean([a.logq for a in agents], axis=0)
        e = np.exp(logx - logx.max())
        return e / e.sum()
    if problem.domain != "real":
        raise ReferenceSolveError("no centralized solver for this constrained problem")
    L = sum(a.L for a in agents)
    if not math.isfinite(L):
        raise ReferenceSolveError("centralized solve needs finite smoothness constants")
    x0 = np.zeros(problem.n)
    if tol is None:
        tol = 1e-12 * (1.0 + abs(problem.consensus_value(x0)))
    params = FgmParams(q=problem.mu_sum / L, step=1.0 / L)
    x, _ = fgm_minimize(problem.consensus_gradient, params, x0, max_iters=2_000_000,
                        grad_tol=tol, keep_trajectory=False)
    if np.linalg.norm(problem.consensus_gradient(x)) > tol:
        raise ReferenceSolveError("centralized solve did not reach the gradient tolerance")
    return x


def reference_solve(problem: SeparableObjective, graph, tol: float | None = None) -> ReferenceSolution:
    """Consensus optimum, minimal-norm dual solution and the radii R, R_x, R_w.

    Parameters
    ----------
    problem : SeparableObjective
    graph : Topology or ndarray
        Topology or its Laplacian.
    tol : float, optional
        Gradient tolerance for the iterative solve; defaults to
        ``1e-12 (1 + |F(0)|)``. Closed forms are used for quadratic and
        entropy problems.
    """
    w = _laplacian_of(graph)
    if w.shape[0] != problem.m:
        raise ValueError("graph and problem disagree on the number of agents")
    x_star = _consensus_minimizer(problem, tol)
    m = problem.m
    xs = np.tile(x_star, (m, 1))
    g = problem.tangent(problem.gradients(xs))
    y_star = sqrt_laplacian_pinv(w) @ g
    x_local = np.stack([local_minimizer(a) for a in problem.agents])
    R_x = float(np.linalg.norm(xs - x_local))
    return ReferenceSolution(
        x_star=x_star,
        f_star=float(problem.value(xs)),
        y_star=y_star,
        R=float(np.linalg.norm(y_star)),
        R_x=R_x,
        R_w=R_x + float(np.linalg.norm(xs)),
        x_local=x_local,
        grad_norm=float(np.linalg.norm(g)),
        problem=problem,
    )


def default_epsilon_tilde(epsilon, R):
    if R <= 0:
        raise ValueError("R = 0: pass epsilon_tilde explicitly")
    return epsilon / R


def certificate(candidate, ref: ReferenceSolution, w, epsilon: float,
                epsilon_tilde: float | None = None) -> SolutionCertificate:
    """Check the two defining inequalities for a stacked candidate."""
    w = _laplacian_of(w)
    m, n = ref.y_star.shape
    x = np.asarray(candidate, dtype=float)
    if x.size != m * n:
        raise ValueError(f"candidate has {x.size} entries, expected {m * n}")
    x = x.reshape(m, n)
    if epsilon_tilde is None:
        epsilon_tilde = default_epsilon_tilde(epsilon, ref.R)
    return SolutionCertificate(
        primal_gap=float(ref.problem.value(x) - ref.f_star),
        consensus_residual=consensus_residual(x, w),
        epsilon=float(epsilon),
        epsilon_tilde=float(epsilon_tilde),
    )


def certified_rows(trace: RunTrace, epsilon, epsilon_tilde, f_star=None) -> np.ndarray:
    """Boolean mask over trace rows meeting the certificate."""
    f_star = trace.f_star if f_star is None else f_star
    if f_star is None:
        raise ValueError("f_star unknown")
    return (trace.objective - f_star <= epsilon) & (trace.consensus_residual <= epsilon_tilde)


def compare_to_bound(trace: RunTrace, bound_N: int, epsilon, epsilon_tilde,
                     f_star=None) -> BoundReport:
    """First certified iteration versus the predicted count ``bound_N``."""
    ok = certified_rows(trace, epsilon, epsilon_tilde, f_star)
    hits = np.flatnonzero(ok)
    first = int(hits[0]) + 1 if hits.size else None
    at_bound = bool(len(ok) >= bound_N and ok[bound_N - 1])
    return BoundReport(
        bound_N=int(bound_N),
        first_certified=first,
        rounds_to_certificate=int(trace.comm_rounds[first - 1]) if first else None,
        certified_at_bound=at_bound,
    )


def config_from_reference(variant, epsilon, ref: ReferenceSolution, **overrides) -> AlgoConfig:
    """Algorithm config with radii from ``ref``.

    ``M`` defaults to the problem's Lipschitz constant when finite, else to
    ``||grad F(x*)||``, the smallest value the dual-regularized bounds accept.
    """
    M = ref.problem.M if math.isfinite(ref.problem.M) else ref.grad_norm
    values = dict(R=ref.R, R_x=ref.R_x, R_w=ref.R_w, M=M)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return AlgoConfig(variant=variant, epsilon=epsilon, **values)
