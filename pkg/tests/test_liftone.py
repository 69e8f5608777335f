from __future__ import annotations

from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ewdesign import (ApproximateDesign, ExpectedInfo, GlmModel, LiftOneProfile, ParameterEnsemble,
                      Predictors, det, lift_profile, liftone_optimize, maximize_profile)
from ewdesign.errors import DegenerateProfile, SingularStart
from ewdesign.forlion import Sensitivity
from ewdesign.liftone import build_profile, generic_stationarity_coeffs, stationarity_coeffs

from conftest import cumulative_po, small_glm
from oracles import grid_check, random_profile


@pytest.mark.parametrize("J", [2, 3, 4, 5])
def test_closed_form_coefficients_match_generic(J):
    rng = np.random.default_rng(J)
    for _ in range(50):
        b = rng.normal(size=J)
        p = int(rng.integers(J - 1, J + 6))
        np.testing.assert_allclose(stationarity_coeffs(b, p), generic_stationarity_coeffs(b, p), atol=1e-12)


@pytest.mark.parametrize("J", [2, 3, 4, 5, 6])
def test_stationarity_polynomial_is_the_derivative(J):
    rng = np.random.default_rng(10 + J)
    for _ in range(20):
        prof = random_profile(rng, J)
        A = prof.stationarity_coeffs()
        z = rng.uniform(0.05, 0.95, 5)
        step = 1e-6
        fd = (prof(z + step) - prof(z - step)) / (2 * step)
        analytic = -(1 - z) ** (prof.p - J) * np.polynomial.polynomial.polyval(z, A)
        np.testing.assert_allclose(analytic, fd, rtol=1e-6, atol=1e-9)


def test_only_b0_positive_gives_zero():
    for J in (2, 3, 4, 5):
        b = np.zeros(J)
        b[0] = 1.0
        z, f = maximize_profile(LiftOneProfile(0, b, J + 1, J))
        assert z == 0.0 and f == 1.0


def test_constant_profile_gives_zero():
    for J in (2, 3, 4, 5):
        b = np.array([comb(J - 1, j) for j in range(J)], dtype=float)
        prof = LiftOneProfile(0, b, J - 1, J)
        np.testing.assert_allclose(prof(np.linspace(0, 1, 11)), 1.0)
        assert maximize_profile(prof)[0] == 0.0


@pytest.mark.parametrize("J", [2, 3, 4, 5])
def test_maximizer_matches_fine_grid(J):
    rng = np.random.default_rng(1000 + J)
    for _ in range(25):
        ok, z, zg = grid_check(random_profile(rng, J))
        assert ok, (z, zg)


def test_profile_reproduces_objective_and_endpoints():
    region, model, ev = small_glm()
    rng = np.random.default_rng(5)
    pts = np.column_stack([rng.uniform(-1, 1, 6), rng.uniform(-1, 1, 6)])
    xi = ApproximateDesign.normalized(pts, rng.dirichlet(np.ones(6)))
    for i in range(xi.m):
        prof = lift_profile(ev, xi, i)
        assert prof.b.size == 2
        assert float(prof(xi.weights[i])) == pytest.approx(ev.objective(xi), rel=1e-9)
        rest = np.delete(np.arange(xi.m), i)
        removed = ApproximateDesign.normalized(pts[rest], xi.weights[rest])
        assert float(prof(0.0)) == pytest.approx(ev.objective(removed), rel=1e-9)


def test_mlm_profile_matches_direct_determinant():
    _, model, ev = cumulative_po()
    pts = np.array([[0.0], [1.0], [2.5], [4.0]])
    xi = ApproximateDesign.normalized(pts, [0.1, 0.4, 0.3, 0.2])
    mats = [ev.point_info(x) for x in pts]
    for i in range(4):
        prof = lift_profile(ev, xi, i)
        z = 0.3
        w = xi.weights * (1 - z) / (1 - xi.weights[i])
        w[i] = z
        direct = det(sum(wj * M for wj, M in zip(w, mats)))
        assert float(prof(z)) == pytest.approx(direct, rel=1e-8)


def test_saturated_design_gets_uniform_weights():
    _, model, ev = small_glm()
    pts = np.array([[-1.0, -1.0], [1.0, -0.5], [0.2, 1.0]])
    res = liftone_optimize(ev, pts, [0.6, 0.3, 0.1], eps=1e-12, max_iter=2000)
    np.testing.assert_allclose(res.weights, 1 / 3, atol=1e-6)


def test_symmetric_two_point_design():
    model = GlmModel("identity", Predictors.linear(1))
    ev = ExpectedInfo(model, ParameterEnsemble.from_samples([[0.0, 0.0]]))
    res = liftone_optimize(ev, [[-1.0], [1.0]], [0.8, 0.2], eps=1e-12)
    np.testing.assert_allclose(res.weights, [0.5, 0.5], atol=1e-8)


def test_mlm_weights_beat_random_search():
    _, model, ev = cumulative_po()
    pts = np.array([[0.0], [0.8], [1.6], [2.4], [3.2], [4.0]])
    res = liftone_optimize(ev, pts, eps=1e-10, d_tol=1e-8)
    mats = np.array([ev.point_info(x) for x in pts])
    W = np.random.default_rng(0).dirichlet(np.ones(6), 10_000)
    best = max(det(np.einsum("i,ijk->jk", w, mats)) for w in W)
    assert res.objective >= best * (1 - 1e-12)


def test_trajectory_is_monotone_and_converged_design_is_optimal():
    region, model, ev = small_glm()
    pts = region.corners()
    pts = np.vstack([pts, [[0.0, 0.0], [0.5, -0.5]]])
    res = liftone_optimize(ev, pts, eps=1e-10, d_tol=1e-7)
    assert res.converged
    assert np.all(np.diff(res.trajectory) >= 0)
    xi = ApproximateDesign(pts, res.weights)
    d = Sensitivity(ev, xi).at_support()
    assert d.max() <= model.p + 1e-7
    assert float(np.dot(res.weights, d)) == pytest.approx(model.p, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["cyclic", "random"]))
def test_liftone_monotone_on_random_instances(seed, order):
    rng = np.random.default_rng(seed)
    region, model, ev = small_glm(B=15, seed=seed % 7)
    pts = rng.uniform(-1, 1, (int(rng.integers(3, 9)), 2))
    res = liftone_optimize(ev, pts, eps=1e-8, order=order, seed=seed, max_iter=300)
    assert np.all(np.diff(res.trajectory) >= -1e-15 * np.abs(res.trajectory).max())
    assert res.objective >= res.trajectory[0]
    assert res.weights.sum() == pytest.approx(1.0)
    # trace identity at the returned weights
    xi = ApproximateDesign(pts, res.weights)
    d = Sensitivity(ev, xi).at_support()
    assert float(np.dot(res.weights, d)) == pytest.approx(model.p, abs=1e-9)


def test_singular_start_recovers_by_restart_or_reports():
    _, model, ev = small_glm()
    # the first point alone cannot support the model; a random restart can
    res = liftone_optimize(ev, [[0, 0], [1, 0], [0, 1]], [1.0, 0.0, 0.0])
    assert res.objective > 0
    with pytest.raises(SingularStart):
        liftone_optimize(ev, [[0, 0], [1, 1]])


def test_degenerate_profile_is_reported():
    model = GlmModel("logit", Predictors.linear(1))
    ev = ExpectedInfo(model, ParameterEnsemble.from_samples([[0.0, 0.0]]))
    xi = ApproximateDesign([[0.5], [0.5]], [0.5, 0.5])
    with pytest.raises(DegenerateProfile):
        lift_profile(ev, xi, 0)


def test_ill_conditioned_profile_falls_back_to_power_basis():
    # J = 12 makes the 11 x 11 Vandermonde system too ill-conditioned to trust
    rng = np.random.default_rng(0)
    p, J = 12, 12
    A = rng.normal(size=(p, p))
    F_rest = A @ A.T
    Bm = rng.normal(size=(p, J - 1))
    F_i = Bm @ Bm.T
    prof = build_profile(0, F_rest, F_i, p, J)
    assert prof.power is not None
    for z in (0.0, 0.37, 0.81, 1.0):
        direct = det((1 - z) * F_rest + z * F_i)
        assert float(prof(z)) == pytest.approx(direct, rel=1e-7, abs=1e-7 * det(F_rest))
    z, f = maximize_profile(prof)
    grid = np.linspace(0, 1, 20001)
    assert f >= prof(grid).max() * (1 - 1e-9)
