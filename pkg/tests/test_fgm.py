import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netdual.fgm import (
    FgmDivergence,
    FgmParams,
    alpha_step,
    fgm_minimize,
    initial_alpha,
    momentum_schedule,
)

from oracles import alpha_root, random_spd


def test_initial_alpha_examples():
    assert initial_alpha(0.0) == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-12)
    a = initial_alpha(0.25)
    assert a == pytest.approx((-1 + math.sqrt(6)) / 2, abs=1e-12)
    assert (a * a - 0.25) / (1 - a) == pytest.approx(1.0, abs=1e-14)
    assert 1 - initial_alpha(1 - 1e-12) < 1e-11
    for q in (-0.1, 1.0, 2.0):
        with pytest.raises(ValueError):
            initial_alpha(q)


def test_alpha_step_fixed_point():
    a = 0.3
    nxt, beta = alpha_step(a, a * a)
    assert nxt == pytest.approx(a, abs=1e-15)
    assert beta >= 0


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 1 - 1e-9), st.floats(0, 1 - 1e-9))
def test_alpha_step_matches_root_oracle(alpha, q):
    nxt, beta = alpha_step(alpha, q)
    assert 0 < nxt < 1
    assert abs(nxt * nxt - (1 - nxt) * alpha * alpha - q * nxt) <= 1e-14
    assert nxt == pytest.approx(alpha_root(alpha, q), rel=1e-9)
    assert beta >= 0


@pytest.mark.parametrize("q", [0.0, 1e-8, 1e-3, 0.3, 0.99])
def test_alpha_recurrence_residual_along_run(q):
    alpha = initial_alpha(q)
    for _ in range(500):
        nxt, _ = alpha_step(alpha, q)
        assert abs(nxt**2 - (1 - nxt) * alpha**2 - q * nxt) <= 1e-14
        # alpha decreases monotonically towards sqrt(q)
        assert math.sqrt(q) * (1 - 1e-12) <= nxt <= alpha
        alpha = nxt
    assert len(momentum_schedule(q, 7)) == 7


def test_params_validation():
    assert FgmParams.for_function(1.0, 4.0).q == 0.25
    with pytest.raises(ValueError):
        FgmParams(q=0.5, step=0.0)
    with pytest.raises(ValueError):
        FgmParams(q=0.5, step=1.0, alpha0=1.5)


def test_near_unit_q_converges_immediately():
    params = FgmParams(q=1 - 1e-15, step=1.0)
    x, traj = fgm_minimize(lambda x: x, params, [1.0], max_iters=2)
    assert abs(x[0]) <= 1e-12


def test_diagonal_quadratic_rate_example():
    d = np.array([1.0, 4.0])
    f = lambda x: 0.5 * float(d @ (x * x))
    x, traj = fgm_minimize(lambda x: d * x, FgmParams.for_function(1.0, 4.0), [1.0, 1.0], 50)
    assert f(x) <= 4.0 * (1 - math.sqrt(0.25)) ** 50 * 2.0


def test_converges_to_center():
    c = np.array([3.0, -1.0, 0.5])
    x, _ = fgm_minimize(lambda x: x - c, FgmParams.for_function(1.0, 1.0 + 1e-9), np.zeros(3), 100)
    np.testing.assert_allclose(x, c, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 10))
def test_rate_certificate_random_quadratics(seed, n):
    rng = np.random.default_rng(seed)
    P = random_spd(rng, n, 1.0, rng.uniform(1.5, 100.0))
    eig = np.linalg.eigvalsh(P)
    mu, L = eig[0], eig[-1]
    xs = rng.standard_normal(n)
    x0 = rng.standard_normal(n)
    f = lambda x: 0.5 * (x - xs) @ P @ (x - xs)
    _, traj = fgm_minimize(lambda x: P @ (x - xs), FgmParams.for_function(mu, L), x0, 200)
    r0 = np.sum((x0 - xs) ** 2)
    for k, xk in enumerate(traj.xs):
        assert f(xk) <= L * (1 - math.sqrt(mu / L)) ** k * r0 * (1 + 1e-9) + 1e-13


def test_grad_tol_stop_and_determinism():
    P = np.diag([1.0, 10.0])
    params = FgmParams.for_function(1.0, 10.0)
    x1, t1 = fgm_minimize(lambda x: P @ x, params, [1.0, 1.0], 1000, grad_tol=1e-9)
    x2, t2 = fgm_minimize(lambda x: P @ x, params, [1.0, 1.0], 1000, grad_tol=1e-9)
    assert np.linalg.norm(P @ x1) <= 1e-9
    assert len(t1.grad_norms) < 1000
    assert np.array_equal(np.array(t1.xs), np.array(t2.xs))


def test_divergence_is_reported():
    with pytest.raises(FgmDivergence):
        fgm_minimize(lambda x: np.full_like(x, np.nan), FgmParams(q=0.1, step=1.0), [1.0])
