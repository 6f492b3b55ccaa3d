"""Distributed dual fast gradient methods over a simulated network.

All eight methods share one outer loop. Agent ``i`` holds the dual block
``z_i`` (block ``i`` of ``sqrt(W) y``) and its extrapolation ``z~_i``. In each
outer iteration every agent

1. computes a primal point from ``z~_i``, exactly (conjugate oracle) or by a
   truncated inner fast gradient loop,
2. shares it with its neighbors,
3. takes the dual step ``z_i = z~_i - s ((W x)_i + d z~_i)`` and extrapolates.

Agent loops are vectorized over the ``(m, n)`` stack; all cross-agent data
flows through :class:`netdual.simnet.NetworkSim`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .fgm import alpha_step, initial_alpha, momentum_schedule
from .graph import SpectralSummary, Topology, laplacian, spectral_summary
from .problems import REAL, SeparableObjective, local_minimizer, regularize
from .simnet import NetworkSim

VARIANTS = (
    "case1", "case2", "case3", "case4",
    "nofriend_sc_smooth", "nofriend_smooth",
    "augmented_sc", "augmented_smooth",
)
TWO_LOOP = VARIANTS[4:]
AUGMENTED = VARIANTS[6:]

#: stand-in radius when a reference radius is exactly zero; any positive
#: upper bound on ||y*|| or ||x* - x*(0)|| keeps the methods valid
ZERO_RADIUS_STANDIN = 1.0

#: q = 1 (perfectly conditioned) is plain gradient descent; the recurrence
#: needs q < 1, and the largest double below 1 gives the same iterates
Q_MAX = float(np.nextafter(1.0, 0.0))


class VariantMismatchError(ValueError):
    """The problem does not satisfy what the chosen variant needs."""


class MissingConstantError(ValueError):
    pass


@dataclass(frozen=True)
class AlgoConfig:
    """Run parameters.

    ``N`` and ``T`` default to :func:`iteration_bound`. ``mu``, ``L`` and
    ``M`` override the values derived from the problem.
    """

    variant: str
    epsilon: float
    R: float | None = None
    R_x: float | None = None
    R_w: float | None = None
    M: float | None = None
    N: int | None = None
    T: int | None = None
    mu: float | None = None
    L: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        for name in ("N", "T"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be at least 1")


@dataclass
class DualAgentState:
    """Stacked per-agent dual state; row ``i`` belongs to agent ``i``."""

    z: np.ndarray
    z_tilde: np.ndarray
    alpha: float

    @classmethod
    def zeros(cls, m, n, q):
        return cls(np.zeros((m, n)), np.zeros((m, n)), initial_alpha(q))


@dataclass
class RunTrace:
    """Per outer iteration metrics of one run.

    Row ``k - 1`` describes outer iteration ``k``: the primal candidate is
    the stack of primal points the agents computed (and shared) in that
    iteration, and ``comm_rounds`` / ``oracle_calls`` are totals after it.
    """

    variant: str
    N: int
    T: int | None
    comm_rounds: np.ndarray
    oracle_calls: np.ndarray
    candidates: np.ndarray
    objective: np.ndarray
    consensus_residual: np.ndarray
    dual_gap_witness: np.ndarray
    f_star: float | None = None
    violation_count: int = 0
    z: np.ndarray | None = None
    z_tilde: np.ndarray | None = None

    @property
    def iterations(self):
        return np.arange(1, self.N + 1)

    @property
    def primal_gap(self):
        if self.f_star is None:
            return np.full(self.N, np.nan)
        return self.objective - self.f_star

    @property
    def oracle_calls_max(self):
        return self.oracle_calls.max(axis=1)

    @property
    def final_candidate(self):
        return self.candidates[-1]


@dataclass(frozen=True)
class DerivedDualConstants:
    """Smoothness and strong convexity of the (possibly regularized) dual.

    ``mu_phi`` holds on the range of ``sqrt(W)``.
    """

    L_phi: float
    mu_phi: float
    R_w: float | None = None


# --------------------------------------------------------------------------
# bounds

def _ceil_count(x):
    if math.isnan(x) or x == math.inf:
        raise MissingConstantError("iteration bound is not finite")
    return 1 if x < 1 else int(math.ceil(x))


def _log(x):
    return math.log(x) if x > 0 else -math.inf


def _need(name, value, positive=True):
    if value is None or not math.isfinite(value) or (positive and value <= 0):
        raise MissingConstantError(f"iteration bound needs a positive finite {name}, got {value}")
    return float(value)


def iteration_bound(variant, *, spectral: SpectralSummary, epsilon, mu=None, L=None,
                    M=None, mu_sum=None, R=None, R_x=None, R_w=None, m=None):
    """Outer count ``N`` and inner count ``T`` (None for single-loop variants).

    Ceilings of the complexity bounds, floored at 1. Radii may be zero
    (nothing left to do); the log factor then drops to the floor.
    """
    eps = _need("epsilon", epsilon)
    chi = spectral.chi
    lmax = spectral.lambda_max
    lmin = spectral.lambda_min_plus
    sqrt2 = math.sqrt(2.0)

    def radius(name, v):
        return _need(name, v, positive=False)

    if variant == "case1":
        mu, L, R = _need("mu", mu), _need("L", L), radius("R", R)
        return _ceil_count(2 * math.sqrt(L / mu * chi) * _log(2 * sqrt2 * lmax * R**2 / (mu * eps))), None
    if variant == "case2":
        mu, M = _need("mu", mu), radius("M", M)
        a = 4 * chi * M**2 / (mu * eps) + 1
        return _ceil_count(2 * math.sqrt(a) * _log(a)), None
    if variant == "case3":
        L, R, R_x = _need("L", L), radius("R", R), radius("R_x", R_x)
        a = (2 * L * R_x**2 / eps + 1) * chi
        return _ceil_count(2 * math.sqrt(a) * _log(8 * sqrt2 * lmax * R**2 * R_x**2 / eps**2)), None
    if variant == "case4":
        M, R_x = radius("M", M), radius("R_x", R_x)
        a = 16 * chi * M**2 * R_x**2 / eps**2 + 1
        return _ceil_count(2 * math.sqrt(a) * _log(a)), None
    if variant == "nofriend_sc_smooth":
        mu, L = _need("mu", mu), _need("L", L)
        R, R_w = radius("R", R), radius("R_w", R_w)
        kappa = L / mu
        N = 8 * math.sqrt(kappa * chi) * _log(2 * sqrt2 * lmax * R**2 / (mu * eps))
        T = math.sqrt(kappa) * _log(6 * L * R**2 * R_w**2 / eps**2 * math.sqrt(kappa * chi))
        return _ceil_count(N), _ceil_count(T)
    if variant == "nofriend_smooth":
        L, R, R_x, R_w = _need("L", L), radius("R", R), radius("R_x", R_x), radius("R_w", R_w)
        a = 2 * L * R_x**2 / eps + 1
        N = 8 * math.sqrt(a * chi) * _log(8 * sqrt2 * lmax * R_x**2 * R**2 / eps**2)
        inner = 2 * math.sqrt(6) * R**2 * R_w**2 / eps
        if R_x > 0:
            inner *= (L / eps + 1 / (2 * R_x**2)) * math.sqrt(a * chi)
        T = math.sqrt(a) * _log(inner)
        return _ceil_count(N), _ceil_count(T)
    if variant == "augmented_sc":
        mub, L = _need("mu_sum", mu_sum), _need("L", L)
        R, R_w = radius("R", R), radius("R_w", R_w)
        a = L / mub + chi
        L_alpha = L + mub * chi
        N = 8 * math.sqrt(a * chi) * _log(2 * sqrt2 * lmax * R**2 / (mub * eps))
        T = math.sqrt(a) * _log(6 * L_alpha * R**2 * R_w**2 / eps**2 * math.sqrt(a * chi))
        return _ceil_count(N), _ceil_count(T)
    if variant == "augmented_smooth":
        L, R, R_x, R_w = _need("L", L), radius("R", R), radius("R_x", R_x), radius("R_w", R_w)
        m = _need("m", m)
        if R_x == 0:
            return 1, 1
        a = 2 * R_x**2 * L / (m * eps) + chi + 1
        alpha = m * (eps / R_x**2) / lmin
        N = 8 * math.sqrt(a * chi) * _log(8 * sqrt2 * lmax * R_x**2 * R**2 / (m * eps**2))
        c2 = 24 * (L + alpha * lmax + m * eps / R_x**2) * R**2 * R_w**2 / eps**2
        T = math.sqrt(a) * _log(c2 * math.sqrt(a * chi))
        return _ceil_count(N), _ceil_count(T)
    raise ValueError(f"unknown variant {variant!r}")


# --------------------------------------------------------------------------
# variant setup

@dataclass
class _Plan:
    """Everything a run needs beyond the problem: steps, moduli, oracles."""

    step: float
    dual_reg: float
    q: float
    primal: object  # callable (z_tilde, sim) -> (m, n) primal stack
    inner_q: float | None = None
    inner_T: int | None = None
    constants: DerivedDualConstants | None = None


def _radius(v, name):
    if v is None:
        raise MissingConstantError(f"{name} is required for this variant")
    if v < 0 or not math.isfinite(v):
        raise ValueError(f"{name} must be a nonnegative finite number")
    return v if v > 0 else ZERO_RADIUS_STANDIN


def _local_minimizers(problem, tol=1e-10):
    return np.stack([local_minimizer(a, tol) for a in problem.agents])


def _conjugate_oracle(agents):
    def primal(zt, sim):
        sim.record_oracle_calls("conjugate")
        return np.stack([a.conjugate_argmax(zi) for a, zi in zip(agents, zt)])
    return primal


def _inner_fgm(grad, zt, step, betas, sim):
    """Truncated local FGM on ``max_w <zt, w> - h(w)`` from ``w = 0``.

    ``grad(w_tilde, sim)`` returns the stacked gradient of ``h``.
    """
    w = np.zeros_like(zt)
    wt = w
    for beta in betas:
        w_next = wt + step * (zt - grad(wt, sim))
        wt = w_next + beta * (w_next - w)
        w = w_next
    return w


def _plan(problem: SeparableObjective, spec: SpectralSummary, cfg: AlgoConfig, T: int | None,
          w: np.ndarray | None = None):
    v = cfg.variant
    mu = problem.mu if cfg.mu is None else cfg.mu
    L = problem.L if cfg.L is None else cfg.L
    lmax, chi = spec.lambda_max, spec.chi
    eps = cfg.epsilon
    agents = problem.agents

    def require(cond, msg):
        if not cond:
            raise VariantMismatchError(f"{v}: {msg}")

    if v in ("case1", "case2"):
        require(problem.dual_friendly, "every agent needs a conjugate-argmax oracle")
        require(mu > 0, "needs strongly convex agents (mu > 0)")
        if v == "case1":
            require(math.isfinite(L), "needs smooth agents (finite L)")
            return _Plan(mu / lmax, 0.0, (mu / L) / chi, _conjugate_oracle(agents),
                         constants=DerivedDualConstants(lmax / mu, spec.lambda_min_plus / L))
        R = _radius(cfg.R, "R")
        d = eps / (4 * R**2)
        Lp = lmax / mu + d
        return _Plan(1.0 / Lp, d, d / Lp, _conjugate_oracle(agents),
                     constants=DerivedDualConstants(Lp, d))

    if v in ("case3", "case4"):
        rho = eps / _radius(cfg.R_x, "R_x")**2
        centers = _local_minimizers(problem)
        reg = [regularize(a, rho, c) for a, c in zip(agents, centers)]
        require(all(r.dual_friendly for r in reg),
                "the regularized agents have no conjugate oracle; use nofriend_smooth")
        if v == "case3":
            require(math.isfinite(L), "needs smooth agents (finite L)")
            return _Plan(rho / lmax, 0.0, (rho / (L + rho)) / chi, _conjugate_oracle(reg),
                         constants=DerivedDualConstants(lmax / rho, spec.lambda_min_plus / (L + rho)))
        d = eps / (4 * _radius(cfg.R, "R")**2)
        Lp = lmax / rho + d
        return _Plan(1.0 / Lp, d, d / Lp, _conjugate_oracle(reg),
                     constants=DerivedDualConstants(Lp, d))

    # two-loop variants work with gradients on all of R^n
    require(problem.domain == REAL, "gradient inner loops need an unconstrained domain")
    require(math.isfinite(L), "needs smooth agents (finite L)")
    R_w = cfg.R_w

    if v == "nofriend_sc_smooth":
        require(mu > 0, "needs strongly convex agents (mu > 0)")
        qt = mu / L

        def grad(w, sim):
            sim.record_oracle_calls("gradient")
            return problem.gradients(w)
        inner_step = 1.0 / L
        step, q = mu / lmax, qt / chi
        consts = DerivedDualConstants(lmax / mu, spec.lambda_min_plus / L, R_w)

    elif v == "nofriend_smooth":
        rho = eps / _radius(cfg.R_x, "R_x")**2
        centers = _local_minimizers(problem)
        qt = rho / (L + rho)

        def grad(w, sim):
            sim.record_oracle_calls("gradient")
            return problem.gradients(w) + rho * (w - centers)
        inner_step = 1.0 / (L + rho)
        step, q = rho / lmax, qt / chi
        consts = DerivedDualConstants(lmax / rho, spec.lambda_min_plus / (L + rho), R_w)

    elif v == "augmented_sc":
        mu_a = problem.mu_sum
        require(mu_a > 0, "needs a positive sum of strong convexity moduli")
        alpha = mu_a / spec.lambda_min_plus
        L_a = L + alpha * lmax
        if w is None:
            raise MissingConstantError("augmented_sc needs the Laplacian for its inner modulus")
        qt = augmented_modulus([a.mu for a in agents], alpha, w) / L_a

        def grad(w, sim):
            sim.record_oracle_calls("gradient")
            return problem.gradients(w) + alpha * sim.exchange(w).mix()
        inner_step = 1.0 / L_a
        step, q = mu_a / lmax, qt / chi
        consts = DerivedDualConstants(lmax / mu_a, spec.lambda_min_plus / L_a, R_w)

    else:  # augmented_smooth
        rho = eps / _radius(cfg.R_x, "R_x")**2
        centers = _local_minimizers(problem)
        mu_a = problem.m * rho
        alpha = mu_a / spec.lambda_min_plus
        L_a = L + alpha * lmax + mu_a
        # the regularized augmented objective is only rho-strongly convex
        qt = rho / L_a

        def grad(w, sim):
            sim.record_oracle_calls("gradient")
            return problem.gradients(w) + alpha * sim.exchange(w).mix() + rho * (w - centers)
        inner_step = 1.0 / L_a
        step, q = mu_a / lmax, qt / chi
        consts = DerivedDualConstants(lmax / mu_a, spec.lambda_min_plus / L_a, R_w)

    qt = min(qt, Q_MAX)
    betas = momentum_schedule(qt, T)

    def primal(zt, sim):
        return _inner_fgm(grad, zt, inner_step, betas, sim)

    return _Plan(step, 0.0, q, primal, inner_q=qt, inner_T=T, constants=consts)


def bound_for(problem: SeparableObjective, spec: SpectralSummary, cfg: AlgoConfig):
    """:func:`iteration_bound` with constants taken from the problem and config."""
    mu = problem.mu if cfg.mu is None else cfg.mu
    L = problem.L if cfg.L is None else cfg.L
    M = problem.M if cfg.M is None else cfg.M
    return iteration_bound(cfg.variant, spectral=spec, epsilon=cfg.epsilon, mu=mu, L=L,
                           M=M, mu_sum=problem.mu_sum, R=cfg.R, R_x=cfg.R_x, R_w=cfg.R_w,
                           m=problem.m)


def resolve_counts(problem, spec, cfg):
    """``(N, T)`` after filling whatever the config leaves open."""
    N, T = cfg.N, cfg.T
    two_loop = cfg.variant in TWO_LOOP
    if N is None or (two_loop and T is None):
        bN, bT = bound_for(problem, spec, cfg)
        N = bN if N is None else N
        T = bT if T is None else T
    return N, (T if two_loop else None)


def derived_constants(problem, topology_or_spec, cfg: AlgoConfig) -> DerivedDualConstants:
    spec, w = _spectrum(topology_or_spec)
    T = 1 if cfg.variant in TWO_LOOP else None
    return _plan(problem, spec, cfg, T, w).constants


def step_parameters(problem, topology_or_spec, cfg: AlgoConfig):
    """Outer ``(step, dual_reg, q)`` of a variant, as used by :func:`run`."""
    spec, w = _spectrum(topology_or_spec)
    T = 1 if cfg.variant in TWO_LOOP else None
    plan = _plan(problem, spec, cfg, T, w)
    return plan.step, plan.dual_reg, min(plan.q, Q_MAX)


def _spectrum(x):
    if isinstance(x, SpectralSummary):
        return x, None
    w = laplacian(x) if isinstance(x, Topology) else np.asarray(x, dtype=float)
    return spectral_summary(w), w


def augmented_modulus(mus, alpha, w) -> float:
    """Strong convexity modulus of ``F + (alpha/2) <x, W x>``.

    The per-agent moduli ``mus`` bound the Hessian of ``F`` below by
    ``diag(mus)``, so the modulus is ``lambda_min(diag(mus) + alpha W)``.
    Along the consensus direction this is at most ``sum(mus) / m``.
    """
    w = np.asarray(w, dtype=float)
    return float(np.linalg.eigvalsh(np.diag(np.asarray(mus, dtype=float)) + alpha * w)[0])


# --------------------------------------------------------------------------
# driver

def run(problem: SeparableObjective, topology: Topology, config: AlgoConfig, *,
        f_star: float | None = None, sim: NetworkSim | None = None,
        record_iterates: bool = False, inner_monitor=None) -> RunTrace:
    """Run ``config.variant`` for ``N`` outer iterations.

    Parameters
    ----------
    problem, topology, config
    f_star : float, optional
        Optimal value, used to fill ``primal_gap``.
    sim : NetworkSim, optional
        Simulator to route messages through (a fresh one by default).
    record_iterates : bool
        Keep ``z_k`` and ``z~_k`` for ``k = 0..N``.
    inner_monitor : callable, optional
        ``inner_monitor(k, z_tilde, x)`` is called with the extrapolated dual
        point and the primal stack computed from it.
    """
    if problem.m != topology.m:
        raise ValueError(f"problem has {problem.m} agents, graph has {topology.m} nodes")
    w = laplacian(topology)
    spec = spectral_summary(w)
    # build the plan first so variant mismatches surface before bound checks
    two_loop = config.variant in TWO_LOOP
    plan = _plan(problem, spec, config, 1 if two_loop else None, w)
    N, T = resolve_counts(problem, spec, config)
    if two_loop:
        plan = _plan(problem, spec, config, T, w)
    plan.q = min(plan.q, Q_MAX)
    sim = NetworkSim(topology) if sim is None else sim
    m, n = problem.m, problem.n
    ei, ej = np.array(topology.edges).T

    state = DualAgentState.zeros(m, n, plan.q)
    rounds = np.empty(N, dtype=np.int64)
    calls = np.empty((N, m), dtype=np.int64)
    cands = np.empty((N, m, n))
    obj = np.empty(N)
    resid = np.empty(N)
    witness = np.empty(N)
    zs = [state.z] if record_iterates else None
    zts = [state.z_tilde] if record_iterates else None

    for k in range(N):
        zt = state.z_tilde
        x = plan.primal(zt, sim)
        if inner_monitor is not None:
            inner_monitor(k, zt, x)
        wx = sim.exchange(x).mix()
        z_next = zt - plan.step * (wx + plan.dual_reg * zt)
        alpha, beta = alpha_step(state.alpha, plan.q)
        state = DualAgentState(z_next, z_next + beta * (z_next - state.z), alpha)

        rounds[k] = sim.round_count
        calls[k] = sim.oracle_calls()
        cands[k] = x
        obj[k] = problem.value(x)
        d = x[ei] - x[ej]
        resid[k] = math.sqrt(float(np.sum(d * d)))
        witness[k] = float(np.sum(zt * x))
        if record_iterates:
            zs.append(state.z)
            zts.append(state.z_tilde)

    return RunTrace(
        variant=config.variant, N=N, T=T, comm_rounds=rounds, oracle_calls=calls,
        candidates=cands, objective=obj, consensus_residual=resid,
        dual_gap_witness=witness, f_star=f_star, violation_count=sim.violation_count,
        z=np.stack(zs) if record_iterates else None,
        z_tilde=np.stack(zts) if record_iterates else None,
    )


def _runner(variant):
    def fn(problem, topology, config, **kw):
        if config.variant != variant:
            config = replace(config, variant=variant)
        return run(problem, topology, config, **kw)
    fn.__name__ = f"run_{variant}"
    fn.__doc__ = f"Run the ``{variant}`` method; see :func:`run`."
    return fn


run_case1 = _runner("case1")
run_case2 = _runner("case2")
run_case3 = _runner("case3")
run_case4 = _runner("case4")
run_nofriend_sc_smooth = _runner("nofriend_sc_smooth")
run_nofriend_smooth = _runner("nofriend_smooth")
run_augmented_sc = _runner("augmented_sc")
run_augmented_smooth = _runner("augmented_smooth")
