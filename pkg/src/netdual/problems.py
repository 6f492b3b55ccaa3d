"""Per-agent objectives, their constants and conjugate-argmax oracles.

Every agent exposes ``value``, ``gradient`` and the constants ``mu``, ``L``,
``M``. Dual-friendly agents additionally answer

    conjugate_argmax(z) = argmax_x { <z, x> - f(x) },

which is all the exact dual methods need from them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit, lambertw

REAL = "real"
SIMPLEX = "simplex"


class NotDualFriendlyError(TypeError):
    """The agent has no conjugate-argmax oracle."""


class SingularSystemError(NotDualFriendlyError):
    """The conjugate-argmax linear system is singular."""


class NotStronglyConvexError(ValueError):
    pass


class DatasetError(ValueError):
    pass


class AgentObjective:
    """Base class for one agent's private function ``f_i``."""

    dim: int
    mu: float = 0.0
    L: float = math.inf
    M: float = math.inf
    domain: str = REAL
    dual_friendly: bool = False

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def conjugate_argmax(self, z) -> np.ndarray:
        raise NotDualFriendlyError(f"{type(self).__name__} has no conjugate oracle")

    def _regularized_argmax(self, z, c, center):
        """Closed-form ``argmax <z,x> - f(x) - c/2 ||x - center||^2``, or None."""
        return None

    def tangent(self, g) -> np.ndarray:
        """Project a gradient onto the directions the domain can move in."""
        return np.asarray(g, dtype=float)


class QuadraticAgent(AgentObjective):
    """``f(x) = 1/2 x^T P x - b^T x + const`` with ``P`` symmetric PSD.

    ``P`` is diagonalised once; conjugate and regularized-conjugate solves
    then cost two small matrix-vector products.
    """

    def __init__(self, P, b, const=0.0):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        self.P = 0.5 * (P + P.T)
        self.b = np.asarray(b, dtype=float).ravel()
        self.const = float(const)
        self.dim = self.b.size
        if self.P.shape != (self.dim, self.dim):
            raise ValueError("P and b have inconsistent sizes")
        eig, self._vec = np.linalg.eigh(self.P)
        if eig[0] < -1e-12 * max(1.0, abs(eig[-1])):
            raise ValueError("P is not positive semi-definite")
        self._eig = np.clip(eig, 0.0, None)
        self.L = float(self._eig[-1])
        self.mu = float(self._eig[0]) if self._eig[0] > 1e-12 * self.L else 0.0
        self.dual_friendly = self.mu > 0

    @classmethod
    def from_hessian(cls, P, center):
        """``f(x) = 1/2 (x - center)^T P (x - center)``."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        center = np.asarray(center, dtype=float).ravel()
        return cls(P, P @ center, 0.5 * center @ P @ center)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ (self.P @ x) - self.b @ x + self.const)

    def gradient(self, x):
        return self.P @ np.asarray(x, dtype=float) - self.b

    def _solve(self, rhs, shift=0.0):
        d = self._eig + shift
        return self._vec @ ((self._vec.T @ rhs) / d)

    def conjugate_argmax(self, z):
        if not self.dual_friendly:
            raise SingularSystemError("P is singular; conjugate argmax is not unique")
        return self._solve(np.asarray(z, dtype=float) + self.b)

    def _regularized_argmax(self, z, c, center):
        return self._solve(np.asarray(z, dtype=float) + self.b + c * center, c)

    def min_norm_minimizer(self, rtol=1e-12):
        """Least-norm point of the minimizing set (for singular ``P``)."""
        keep = self._eig > rtol * max(self.L, 1e-300)
        coef = np.zeros_like(self._eig)
        coef[keep] = (self._vec.T @ self.b)[keep] / self._eig[keep]
        return self._vec @ coef


def _logsumexp(a):
    top = a.max()
    return float(top + np.log(np.exp(a - top).sum()))


def _log_lambert(s):
    """Solve ``exp(w) + w = s`` elementwise, i.e. ``w = log W(exp(s))``."""
    s = np.asarray(s, dtype=float)
    w = np.where(s < 1.0, s - np.exp(np.minimum(s, 1.0)), np.log(np.maximum(s, 1.0)))
    for _ in range(100):
        ew = np.exp(w)
        step = (ew + w - s) / (ew + 1.0)
        w = w - step
        if np.max(np.abs(step)) <= 1e-15 * (1.0 + np.max(np.abs(w))):
            break
    return w


class EntropyAgent(AgentObjective):
    """Relative entropy ``f(x) = sum_j x_j log(x_j / q_j)`` on the unit simplex.

    ``mu`` is the strong-convexity modulus used in step sizes. Pinsker gives
    1 with respect to the l1 norm, hence also for l2; it can be overridden.
    """

    domain = SIMPLEX
    dual_friendly = True

    def __init__(self, q, mu=1.0):
        q = np.asarray(q, dtype=float).ravel()
        if np.any(q <= 0) or abs(q.sum() - 1.0) > 1e-12:
            raise ValueError("q must lie in the interior of the unit simplex")
        self.q = q
        self.logq = np.log(q)
        self.dim = q.size
        self.mu = float(mu)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        pos = x > 0
        return float(np.sum(x[pos] * (np.log(x[pos]) - self.logq[pos])))

    def gradient(self, x):
        return np.log(np.asarray(x, dtype=float)) - self.logq + 1.0

    def conjugate_argmax(self, z):
        s = np.asarray(z, dtype=float) + self.logq
        e = np.exp(s - s.max())
        return e / e.sum()

    def conjugate_value(self, z):
        """``f*(z) = log sum_j q_j exp(z_j)``."""
        return _logsumexp(np.asarray(z, dtype=float) + self.logq)

    def _regularized_argmax(self, z, c, center):
        # stationarity: log x_j + c x_j = a_j - nu, with nu fixing sum(x) = 1
        a = np.asarray(z, dtype=float) + self.logq - 1.0 + c * np.asarray(center, dtype=float)
        logc = math.log(c)
        nu = _logsumexp(a)
        for _ in range(100):
            arg = logc + a - nu
            if arg.max() < 700.0:
                x = lambertw(np.exp(arg)).real / c
            else:
                x = np.exp(_log_lambert(arg)) / c
            step = (x.sum() - 1.0) / np.sum(x / (1.0 + c * x))
            nu += step
            if abs(step) <= 1e-15 * (1.0 + abs(nu)):
                break
        return x / x.sum()

    def tangent(self, g):
        g = np.asarray(g, dtype=float)
        return g - g.mean()


class LogisticAgent(AgentObjective):
    """Local logistic loss with ridge term, scaled by the global sample count.

    ``f(x) = 1/(2 m l) sum_j log(1 + exp(-y_j a_j^T x)) + c/(2m) ||x||^2``.
    Not dual friendly.
    """

    def __init__(self, A, y, m, l, c):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.y = np.asarray(y, dtype=float).ravel()
        if self.A.shape[0] != self.y.size:
            raise ValueError("A and y have different numbers of rows")
        if not np.all(np.isin(self.y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if c <= 0:
            raise ValueError("c must be positive")
        self.dim = self.A.shape[1]
        self._ya = self.A * self.y[:, None]
        self._w = 1.0 / (2.0 * m * l)
        self._reg = c / m
        lam = np.linalg.eigvalsh(self.A.T @ self.A)[-1] if self.A.size else 0.0
        self.mu = self._reg
        self.L = float(lam / (8.0 * m * l) + self._reg)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        margins = self._ya @ x
        return float(self._w * np.logaddexp(0.0, -margins).sum() + 0.5 * self._reg * x @ x)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        s = expit(-(self._ya @ x))
        return -self._w * (self._ya.T @ s) + self._reg * x


class RegularizedAgentObjective(AgentObjective):
    """``base(x) + c/2 ||x - center||^2``.

    The conjugate oracle exists when the base has a closed-form regularized
    argmax (quadratic family, entropy); otherwise the wrapper is gradient-only.
    """

    def __init__(self, base: AgentObjective, c: float, center):
        if c <= 0:
            raise ValueError("regularization modulus must be positive")
        self.base = base
        self.modulus = float(c)
        self.center = np.asarray(center, dtype=float).ravel()
        self.dim = base.dim
        self.domain = base.domain
        self.mu = base.mu + self.modulus
        self.L = base.L + self.modulus
        self.M = math.inf
        probe = base._regularized_argmax(np.zeros(self.dim), self.modulus, self.center)
        self.dual_friendly = probe is not None

    def value(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return self.base.value(x) + 0.5 * self.modulus * float(d @ d)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return self.base.gradient(x) + self.modulus * (x - self.center)

    def conjugate_argmax(self, z):
        if not self.dual_friendly:
            raise NotDualFriendlyError(
                f"no closed-form regularized conjugate for {type(self.base).__name__}"
            )
        return self.base._regularized_argmax(z, self.modulus, self.center)

    def tangent(self, g):
        return self.base.tangent(g)


def make_quadratic(c, scale: float) -> QuadraticAgent:
    """``f(x) = scale/2 ||x - c||^2``."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return QuadraticAgent.from_hessian(scale * np.eye(c.size), c)


def make_quadratic_form(P, center) -> QuadraticAgent:
    return QuadraticAgent.from_hessian(P, center)


def make_ridge(H, b, m: int, l: int, c: float) -> QuadraticAgent:
    """One agent's share ``1/(2ml) ||b - H x||^2 + c/(2m) ||x||^2`` of a ridge problem.

    With ``c = 0`` and rank-deficient ``H`` the agent is smooth but not
    strongly convex; it then has no conjugate oracle until regularized.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if c < 0:
        raise ValueError("c must be nonnegative")
    n = H.shape[1]
    P = H.T @ H / (m * l) + (c / m) * np.eye(n)
    return QuadraticAgent(P, H.T @ b / (m * l), b @ b / (2.0 * m * l))


def make_entropy(q, mu: float = 1.0) -> EntropyAgent:
    return EntropyAgent(q, mu)


def make_logistic(A, y, m: int, l: int, c: float) -> LogisticAgent:
    return LogisticAgent(A, y, m, l, c)


def regularize(base: AgentObjective, c: float, center) -> RegularizedAgentObjective:
    return RegularizedAgentObjective(base, c, center)


def local_minimizer(agent: AgentObjective, tol: float = 1e-10) -> np.ndarray:
    """``argmin f_i``, i.e. the conjugate argmax at zero.

    Closed form for dual-friendly agents; least-norm solution for singular
    quadratics; otherwise FGM on the gradient to ``||grad|| <= tol``.
    """
    from .fgm import FgmParams, fgm_minimize

    if agent.dual_friendly:
        return agent.conjugate_argmax(np.zeros(agent.dim))
    if isinstance(agent, QuadraticAgent):
        return agent.min_norm_minimizer()
    if agent.mu <= 0 or agent.domain != REAL:
        raise NotStronglyConvexError(
            f"{type(agent).__name__} with mu={agent.mu} needs regularization"
        )
    x, _ = fgm_minimize(agent.gradient, FgmParams.for_function(agent.mu, agent.L),
                        np.zeros(agent.dim), max_iters=1_000_000, grad_tol=tol,
                        keep_trajectory=False)
    if np.linalg.norm(agent.gradient(x)) > tol:
        raise NotStronglyConvexError("local minimization did not reach tolerance")
    return x


@dataclass(frozen=True)
class SeparableObjective:
    """``F(x) = sum_i f_i(x_i)`` over stacked blocks ``x = (x_1, ..., x_m)``."""

    agents: tuple

    def __post_init__(self):
        agents = tuple(self.agents)
        if not agents:
            raise ValueError("need at least one agent")
        if len({a.dim for a in agents}) != 1:
            raise ValueError("all agents must share the same dimension")
        if len({a.domain for a in agents}) != 1:
            raise ValueError("all agents must share the same domain")
        object.__setattr__(self, "agents", agents)
        object.__setattr__(self, "_batch", _batch_gradient(agents))

    @property
    def m(self):
        return len(self.agents)

    @property
    def n(self):
        return self.agents[0].dim

    @property
    def domain(self):
        return self.agents[0].domain

    @property
    def mu(self):
        return min(a.mu for a in self.agents)

    @property
    def L(self):
        return max(a.L for a in self.agents)

    @property
    def M(self):
        return max(a.M for a in self.agents)

    @property
    def mu_sum(self):
        return sum(a.mu for a in self.agents)

    @property
    def dual_friendly(self):
        return all(a.dual_friendly for a in self.agents)

    def value(self, x) -> float:
        xb = np.asarray(x, dtype=float).reshape(self.m, self.n)
        return sum(a.value(xi) for a, xi in zip(self.agents, xb))

    def gradients(self, x) -> np.ndarray:
        """Stacked local gradients, one row per agent."""
        xb = np.asarray(x, dtype=float).reshape(self.m, self.n)
        if self._batch is not None:
            return self._batch(xb)
        return np.stack([a.gradient(xi) for a, xi in zip(self.agents, xb)])

    def conjugate_argmaxes(self, z) -> np.ndarray:
        zb = np.asarray(z, dtype=float).reshape(self.m, self.n)
        return np.stack([a.conjugate_argmax(zi) for a, zi in zip(self.agents, zb)])

    def tangent(self, g) -> np.ndarray:
        return np.stack([a.tangent(gi) for a, gi in zip(self.agents, g)])

    def consensus_value(self, z) -> float:
        """``sum_i f_i(z)`` for a single point ``z``."""
        return sum(a.value(z) for a in self.agents)

    def consensus_gradient(self, z) -> np.ndarray:
        return sum(a.gradient(z) for a in self.agents)


def _batch_gradient(agents):
    """Vectorized stacked gradient for homogeneous agent lists, else None."""
    if all(type(a) is QuadraticAgent for a in agents):
        P = np.stack([a.P for a in agents])
        b = np.stack([a.b for a in agents])
        return lambda x: np.einsum("ijk,ik->ij", P, x) - b
    if all(type(a) is LogisticAgent for a in agents) and len({a.A.shape for a in agents}) == 1:
        ya = np.stack([a._ya for a in agents])
        w = np.array([a._w for a in agents])[:, None]
        reg = np.array([a._reg for a in agents])[:, None]

        def grad(x):
            s = expit(-np.einsum("ijk,ik->ij", ya, x))
            return -w * np.einsum("ijk,ij->ik", ya, s) + reg * x
        return grad
    return None


# --------------------------------------------------------------------------
# data

def load_csv_dataset(path, m: int):
    """Read ``features..., label`` rows and split them into ``m`` contiguous shards.

    Returns a list of ``(A_i, y_i)`` pairs whose sizes differ by at most one.
    """
    try:
        data = np.loadtxt(Path(path), delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    if data.shape[1] < 2:
        raise DatasetError("need at least one feature column and a label column")
    A, y = data[:, :-1], data[:, -1]
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DatasetError("labels must be -1 or +1")
    if len(y) < m:
        raise DatasetError(f"{len(y)} rows cannot be split among {m} agents")
    idx = np.array_split(np.arange(len(y)), m)
    return [(A[i], y[i]) for i in idx]


def quadratic_agents(m, n, seed=0, kappa=4.0):
    """Isotropic quadratics with scales alternating between 1 and ``kappa``.

    Keeps ``mu = 1`` and ``L = kappa`` for every ``m`` (``kappa`` is reached
    once ``m >= 2``).
    """
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((m, n))
    return [make_quadratic(centers[i], 1.0 if i % 2 == 0 else kappa) for i in range(m)]


def ridge_agents(m, n, l, c=0.1, seed=0, noise=0.1):
    """Synthetic ridge regression: ``H ~ N(0,1)``, ``b = H x_true + noise``."""
    rng = np.random.default_rng(seed)
    x_true = rng.standard_normal(n)
    H = rng.standard_normal((m * l, n))
    b = H @ x_true + noise * rng.standard_normal(m * l)
    return [make_ridge(H[i * l:(i + 1) * l], b[i * l:(i + 1) * l], m, l, c)
            for i in range(m)]


def logistic_shards(m, n, l, seed=0):
    """Separable synthetic classification data, ``l`` points per agent."""
    rng = np.random.default_rng(seed)
    x_true = rng.uniform(-1.0, 1.0, n)
    A = rng.uniform(-1.0, 1.0, (m * l, n))
    y = np.sign(A @ x_true)
    y[y == 0] = 1.0
    return [(A[i * l:(i + 1) * l], y[i * l:(i + 1) * l]) for i in range(m)]


def logistic_agents(m, n, l, c=0.1, seed=0, shards=None):
    """Logistic agents on synthetic data or on given ``(A_i, y_i)`` shards.

    With uneven shards ``l`` is the mean shard size, so the agents still sum
    to the global average loss.
    """
    if shards is None:
        shards = logistic_shards(m, n, l, seed)
    l_mean = sum(len(y) for _, y in shards) / m
    return [make_logistic(A, y, m, l_mean, c) for A, y in shards]


def entropy_agents(m, n, seed=0, concentration=10.0, mu=1.0):
    """KL-barycenter agents with Dirichlet-distributed ``q_i``.

    Larger ``concentration`` puts the ``q_i`` closer to uniform.
    """
    rng = np.random.default_rng(seed)
    q = rng.dirichlet(np.full(n, concentration), size=m)
    q = np.clip(q, 1e-12, None)
    q /= q.sum(axis=1, keepdims=True)
    return [make_entropy(qi, mu) for qi in q]
