from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ewdesign import (ApproximateDesign, ExpectedInfo, GlmModel, MlmModel, Normal, ParameterEnsemble,
                      Predictors, Uniform, design_info, det, ew_objective, expected_point_info, glm_nu)
from ewdesign.errors import AllDrawsInfeasible, DimensionMismatch, InfeasibleParameters

from conftest import cumulative_po, random_design, small_glm


def test_prior_requires_seed_and_is_reproducible():
    dists = [Normal(0, 1), Uniform(-1, 2)]
    with pytest.raises(ValueError):
        ParameterEnsemble.from_prior(dists, mc_size=10)
    a = ParameterEnsemble.from_prior(dists, mc_size=100, seed=5)
    b = ParameterEnsemble.from_prior(dists, mc_size=100, seed=5)
    c = ParameterEnsemble.from_prior(dists, mc_size=100, seed=6)
    np.testing.assert_array_equal(a.thetas, b.thetas)
    assert not np.array_equal(a.thetas, c.thetas)
    assert a.thetas.shape == (100, 2)
    assert np.all((a.thetas[:, 1] >= -1) & (a.thetas[:, 1] < 2))


def test_prior_validation():
    with pytest.raises(ValueError):
        Uniform(1, 1)
    with pytest.raises(ValueError):
        Normal(0, 0)
    with pytest.raises(ValueError):
        ParameterEnsemble(np.array([[np.nan]]))


def test_ensemble_model_dimension_check():
    model = GlmModel("logit", Predictors.linear(2))
    with pytest.raises(DimensionMismatch):
        ExpectedInfo(model, ParameterEnsemble.from_samples(np.zeros((3, 2))))


def test_degenerate_ensemble_equals_model_info():
    _, model, ev = small_glm()
    x = np.array([0.3, -0.7])
    for b in range(3):
        single = ev.ensemble.single(b)
        np.testing.assert_allclose(expected_point_info(model, x, single), model.info(x, ev.ensemble.thetas[b]),
                                   rtol=1e-14, atol=1e-16)


def test_mean_of_two_parameter_vectors():
    model = GlmModel("logit", Predictors.parse(["1"], ["x1"]))
    ens = ParameterEnsemble.from_samples([[1.0], [-1.0]])
    F = expected_point_info(model, [0.0], ens)
    assert F[0, 0] == pytest.approx(0.19661193, abs=1e-8)
    assert F[0, 0] == pytest.approx((glm_nu("logit", 1.0) + glm_nu("logit", -1.0)) / 2)


def test_expected_info_is_mean_of_per_theta_info():
    _, model, ev = small_glm(B=30)
    x = np.array([-0.2, 0.9])
    manual = np.mean([model.info(x, th) for th in ev.ensemble.thetas], axis=0)
    np.testing.assert_allclose(ev.point_info(x), manual, rtol=1e-12)
    _, mlm, ev2 = cumulative_po(B=10)
    y = np.array([1.7])
    manual = np.mean([mlm.info(y, th) for th in ev2.ensemble.thetas], axis=0)
    np.testing.assert_allclose(ev2.point_info(y), manual, rtol=1e-12)


def test_glm_matrix_form_matches_sum_form():
    rng = np.random.default_rng(2)
    region, _, ev = small_glm()
    for _ in range(20):
        xi = random_design(region, 5, rng)
        A, B = ev.design_info(xi), ev.design_info_sum(xi)
        np.testing.assert_allclose(A, B, rtol=1e-12, atol=1e-12 * np.abs(B).max())


def test_design_info_examples():
    region, model, ev = small_glm()
    x = np.array([0.1, 0.2])
    one = ApproximateDesign([x], [1.0])
    np.testing.assert_allclose(ev.design_info(one), ev.point_info(x))
    twice = ApproximateDesign([x, x], [0.5, 0.5])
    np.testing.assert_allclose(ev.design_info(twice), ev.point_info(x), rtol=1e-14)
    # fewer than p support points cannot identify the model
    assert ev.objective(ApproximateDesign([x, -x], [0.5, 0.5])) == 0.0
    xi = random_design(region, 6, np.random.default_rng(0))
    recomputed = sum(w * model.info(p, th) for p, w in zip(xi.points, xi.weights)
                     for th in ev.ensemble.thetas) / ev.ensemble.B
    assert ew_objective(model, xi, ev.ensemble) == pytest.approx(np.linalg.det(recomputed), rel=1e-10)


def test_one_parameter_model_objective_is_weighted_mean():
    model = GlmModel("logit", Predictors.parse(["x1"], ["x1"]))
    ens = ParameterEnsemble.from_samples([[0.5], [1.5]])
    pts = np.array([[0.3], [1.0], [-2.0]])
    w = np.array([0.2, 0.5, 0.3])
    scalars = [np.mean([glm_nu("logit", x[0] * t) * x[0] ** 2 for t in (0.5, 1.5)]) for x in pts]
    assert ew_objective(model, ApproximateDesign(pts, w), ens) == pytest.approx(np.dot(w, scalars))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.05, 0.95))
def test_design_info_is_linear_in_weights(seed, t):
    rng = np.random.default_rng(seed)
    region, _, ev = small_glm(B=20)
    pts = random_design(region, 4, rng).points
    w1, w2 = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
    mix = t * w1 + (1 - t) * w2
    lhs = ev.design_info(ApproximateDesign.normalized(pts, mix))
    rhs = t * ev.design_info(ApproximateDesign.normalized(pts, w1)) + (1 - t) * ev.design_info(
        ApproximateDesign.normalized(pts, w2))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.05, 0.95))
def test_log_objective_is_concave_in_weights(seed, t):
    rng = np.random.default_rng(seed)
    region, _, ev = small_glm(B=20)
    pts = random_design(region, 5, rng).points
    w1, w2 = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
    f = lambda w: ev.log_objective(ApproximateDesign.normalized(pts, w))
    assert f(t * w1 + (1 - t) * w2) >= t * f(w1) + (1 - t) * f(w2) - 1e-9


def test_point_cache_returns_same_values():
    _, _, ev = small_glm()
    x = np.array([0.25, -0.5])
    first = ev.point_weight(x)
    assert ev.point_weight(x.copy()) is first
    with pytest.raises(ValueError):
        first[0, 0] = 1.0


def test_cumulative_prior_feasibility_filter():
    model = MlmModel.npo(3, "cumulative", Predictors.linear(1))
    dists = [Normal(-1, 0.5), Normal(0, 0.5), Normal(1, 0.5), Normal(0, 0.5)]
    probes = np.array([[0.0], [2.0]])
    with pytest.raises(InfeasibleParameters):
        ParameterEnsemble.from_prior(dists, 200, seed=1, model=model, probe_points=probes)
    ens = ParameterEnsemble.from_prior(dists, 200, seed=1, model=model, probe_points=probes, feasibility_filter=True)
    assert ens.B == 200
    assert model.check_feasible(probes, ens.thetas).all()
    hopeless = [Normal(1, 0.01), Normal(0, 0.01), Normal(-1, 0.01), Normal(0, 0.01)]
    with pytest.raises(AllDrawsInfeasible):
        ParameterEnsemble.from_prior(hopeless, 50, seed=1, model=model, probe_points=probes, feasibility_filter=True)


def test_functional_wrappers_agree():
    region, model, ev = small_glm()
    xi = random_design(region, 4, np.random.default_rng(4))
    np.testing.assert_allclose(design_info(model, xi, ev.ensemble), ev.design_info(xi))
    assert ew_objective(model, xi, ev.ensemble) == det(ev.design_info(xi))
